#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "iprrn/errors.hpp"
#include "iprrn/metrics.hpp"

namespace fs = std::filesystem;

namespace iprrn {

namespace {

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc{} ? std::string(buf, end) : std::to_string(v);
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

}  // namespace

void write_metrics_csv(const fs::path& path, const std::vector<MetricsReport>& reports,
                       const std::map<std::string, std::string>& metadata) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& [k, v] : metadata) out << "# " << k << '=' << v << '\n';
  out << "clip,frame_idx,psnr,ssim,gap_psnr\n";
  for (const auto& r : reports) {
    for (size_t t = 0; t < r.per_frame_psnr.size(); ++t) {
      out << r.clip << ',' << t + 1 << ',' << number(r.per_frame_psnr[t]) << ',' << number(r.per_frame_ssim[t])
          << ",\n";
    }
    out << r.clip << ",all," << number(r.mean_psnr) << ',' << number(r.mean_ssim) << ',' << number(r.gap_psnr)
        << '\n';
  }
}

void plot_psnr_curves(const fs::path& path, const std::string& title, const std::vector<PsnrSeries>& series) {
  constexpr int kW = 800, kH = 480, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
  const cv::Scalar palette[] = {{200, 80, 20}, {30, 30, 220}, {40, 160, 40}, {160, 40, 160}, {20, 140, 200}};

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  size_t frames = 1;
  for (const auto& s : series) {
    frames = std::max(frames, s.psnr.size());
    for (double v : s.psnr) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-6) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  cv::Mat canvas(kH, kW, CV_8UC3, cv::Scalar(255, 255, 255));
  const int plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
  const auto to_px = [&](double frame, double value) {
    const double fx = frames > 1 ? frame / static_cast<double>(frames - 1) : 0.5;
    return cv::Point(kLeft + static_cast<int>(std::lround(fx * plot_w)),
                     kTop + static_cast<int>(std::lround((hi - value) / (hi - lo) * plot_h)));
  };
  cv::rectangle(canvas, {kLeft, kTop}, {kLeft + plot_w, kTop + plot_h}, {0, 0, 0}, 1);
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const auto p = to_px(0, v);
    cv::line(canvas, {kLeft - 4, p.y}, {kLeft + plot_w, p.y}, {225, 225, 225}, 1);
    cv::putText(canvas, fixed(v, 2), {5, p.y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1);
  }
  for (size_t t = 0; t < frames; ++t) {
    const auto p = to_px(static_cast<double>(t), lo);
    if (frames <= 20 || t % (frames / 10) == 0) {
      cv::putText(canvas, std::to_string(t + 1), {p.x - 5, p.y + 18}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1);
    }
  }
  cv::putText(canvas, title, {kLeft, 25}, cv::FONT_HERSHEY_SIMPLEX, 0.6, {0, 0, 0}, 1);
  cv::putText(canvas, "frame", {kLeft + plot_w / 2 - 20, kH - 10}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0}, 1);

  for (size_t k = 0; k < series.size(); ++k) {
    const auto colour = palette[k % std::size(palette)];
    std::vector<cv::Point> pts;
    for (size_t t = 0; t < series[k].psnr.size(); ++t) {
      const double v = series[k].psnr[t];
      pts.push_back(to_px(static_cast<double>(t), std::isfinite(v) ? v : hi));
    }
    if (pts.size() > 1) cv::polylines(canvas, pts, false, colour, 2, cv::LINE_AA);
    for (const auto& p : pts) cv::circle(canvas, p, 3, colour, cv::FILLED, cv::LINE_AA);
    const int ly = kTop + 18 + 18 * static_cast<int>(k);
    cv::line(canvas, {kLeft + plot_w - 180, ly - 4}, {kLeft + plot_w - 150, ly - 4}, colour, 2);
    cv::putText(canvas, series[k].label, {kLeft + plot_w - 145, ly}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0}, 1);
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), canvas)) throw InputError("cannot write plot " + path.string());
}

}  // namespace iprrn
