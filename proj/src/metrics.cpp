#include "iprrn/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "iprrn/errors.hpp"

namespace iprrn {

std::string to_string(ChannelMode mode) { return mode == ChannelMode::kY ? "Y" : "RGB"; }

namespace {

constexpr int64_t kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

void check_pair(const torch::Tensor& ref, const torch::Tensor& test) {
  if (ref.dim() != 3 || !ref.sizes().equals(test.sizes())) {
    throw InputError("metric inputs must be (C, H, W) frames of identical size");
  }
}

// Clamped, cropped, channel-selected double planes (C', H', W').
torch::Tensor prepare(const torch::Tensor& frame, ChannelMode mode, int64_t border_crop) {
  auto x = frame.detach().to(torch::kFloat64).clamp(0.0, 1.0);
  if (mode == ChannelMode::kY) x = rgb_to_y(x);
  if (border_crop > 0) {
    if (x.size(1) <= 2 * border_crop || x.size(2) <= 2 * border_crop) {
      throw InputError("border crop removes the whole frame");
    }
    x = x.narrow(1, border_crop, x.size(1) - 2 * border_crop).narrow(2, border_crop, x.size(2) - 2 * border_crop);
  }
  return x;
}

torch::Tensor ssim_window() {
  auto taps = torch::empty({kSsimWindow}, torch::kFloat64);
  auto acc = taps.accessor<double, 1>();
  double total = 0.0;
  for (int64_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i - kSsimWindow / 2);
    acc[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += acc[i];
  }
  taps /= total;
  return torch::outer(taps, taps).view({1, 1, kSsimWindow, kSsimWindow});
}

}  // namespace

torch::Tensor rgb_to_y(const torch::Tensor& frame) {
  if (frame.size(0) == 1) return frame;
  if (frame.size(0) != 3) throw InputError("luma conversion needs RGB frames");
  return (16.0 + 65.481 * frame[0] + 128.553 * frame[1] + 24.966 * frame[2]).unsqueeze(0) / 255.0;
}

double psnr(const torch::Tensor& ref, const torch::Tensor& test, ChannelMode mode, int64_t border_crop) {
  check_pair(ref, test);
  auto a = prepare(ref, mode, border_crop);
  auto b = prepare(test, mode, border_crop);
  const double mse = (a - b).square().mean().item<double>();
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const torch::Tensor& ref, const torch::Tensor& test, ChannelMode mode, int64_t border_crop) {
  check_pair(ref, test);
  auto a = prepare(ref, mode, border_crop).unsqueeze(1);  // (C, 1, H, W)
  auto b = prepare(test, mode, border_crop).unsqueeze(1);
  if (a.size(2) < kSsimWindow || a.size(3) < kSsimWindow) {
    throw InputError("SSIM needs frames of at least 11x11 pixels");
  }
  const auto window = ssim_window();
  const auto filter = [&](const torch::Tensor& x) { return torch::conv2d(x, window); };
  auto mu1 = filter(a), mu2 = filter(b);
  auto s11 = filter(a * a) - mu1 * mu1;
  auto s22 = filter(b * b) - mu2 * mu2;
  auto s12 = filter(a * b) - mu1 * mu2;
  auto map = ((2.0 * mu1 * mu2 + kSsimC1) * (2.0 * s12 + kSsimC2)) /
             ((mu1 * mu1 + mu2 * mu2 + kSsimC1) * (s11 + s22 + kSsimC2));
  return map.mean().item<double>();
}

GapStats gap_report(const std::vector<double>& per_frame_psnr) {
  if (per_frame_psnr.empty()) throw InputError("gap_report needs at least one PSNR value");
  GapStats g;
  std::vector<double> finite;
  for (double v : per_frame_psnr) {
    if (std::isinf(v) && v > 0) {
      ++g.infinite;
    } else {
      finite.push_back(v);
    }
  }
  if (finite.empty()) {
    g.min = g.max = g.mean = kPsnrIdentical;
    return g;
  }
  const auto [lo, hi] = std::minmax_element(finite.begin(), finite.end());
  g.min = *lo;
  g.max = *hi;
  g.gap = g.max - g.min;
  double total = 0.0;
  for (double v : finite) total += v;
  g.mean = total / static_cast<double>(finite.size());
  return g;
}

MetricsReport evaluate_sequence(const std::string& clip, const torch::Tensor& sr, const torch::Tensor& hr,
                                ChannelMode mode, int64_t border_crop) {
  if (sr.dim() != 4 || !sr.sizes().equals(hr.sizes())) {
    throw InputError("clip " + clip + ": SR and HR sequences differ in shape");
  }
  MetricsReport r;
  r.clip = clip;
  r.channel_mode = mode;
  r.border_crop = border_crop;
  for (int64_t t = 0; t < sr.size(0); ++t) {
    auto out = sr[t].clamp(0.0, 1.0);
    r.per_frame_psnr.push_back(psnr(hr[t], out, mode, border_crop));
    r.per_frame_ssim.push_back(ssim(hr[t], out, mode, border_crop));
  }
  const auto g = gap_report(r.per_frame_psnr);
  r.mean_psnr = g.mean;
  r.min_psnr = g.min;
  r.max_psnr = g.max;
  r.gap_psnr = g.gap;
  r.infinite_frames = g.infinite;
  double total = 0.0;
  for (double v : r.per_frame_ssim) total += v;
  r.mean_ssim = total / static_cast<double>(r.per_frame_ssim.size());
  return r;
}

}  // namespace iprrn
