#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "iprrn/data.hpp"
#include "iprrn/errors.hpp"

namespace fs = std::filesystem;

namespace iprrn {

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    ManifestEntry e;
    if (!(fields >> e.clip_id)) continue;
    if (!(fields >> e.split)) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected '<clip_id> <split>'");
    }
    std::string extra;
    if (fields >> extra) throw InputError(path.string() + ":" + std::to_string(line_no) + ": trailing field '" + extra + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write manifest " + path.string());
  for (const auto& e : entries) out << e.clip_id << ' ' << e.split << '\n';
}

torch::Tensor read_frame(const fs::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw InputError("cannot read frame " + path.string());
  if (img.channels() == 4) cv::cvtColor(img, img, cv::COLOR_BGRA2BGR);
  if (img.channels() == 3) cv::cvtColor(img, img, cv::COLOR_BGR2RGB);
  const double range = img.depth() == CV_16U ? 65535.0 : 255.0;
  cv::Mat as_float;
  img.convertTo(as_float, CV_32F);
  // Divide in torch so 8-bit levels match quantize8() bit for bit.
  auto hwc = torch::from_blob(as_float.data, {as_float.rows, as_float.cols, as_float.channels()}, torch::kFloat32);
  return (hwc.permute({2, 0, 1}) / range).contiguous();
}

void write_frame(const fs::path& path, const torch::Tensor& frame) {
  if (frame.dim() != 3 || (frame.size(0) != 1 && frame.size(0) != 3)) {
    throw InputError("write_frame expects a (1|3, H, W) frame");
  }
  auto bytes = (frame.detach().to(torch::kFloat32).clamp(0.0, 1.0) * 255.0).round().to(torch::kUInt8);
  auto hwc = bytes.permute({1, 2, 0}).contiguous();
  const int h = static_cast<int>(hwc.size(0)), w = static_cast<int>(hwc.size(1)), c = static_cast<int>(hwc.size(2));
  cv::Mat img(h, w, CV_8UC(c), hwc.data_ptr<uint8_t>());
  cv::Mat bgr;
  if (c == 3) {
    cv::cvtColor(img, bgr, cv::COLOR_RGB2BGR);
  } else {
    bgr = img;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) throw InputError("cannot write frame " + path.string());
}

std::string frame_filename(int64_t index) {
  std::ostringstream name;
  name << std::setw(8) << std::setfill('0') << index << ".png";
  return name.str();
}

torch::Tensor read_clip(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("clip directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  if (files.empty()) throw InputError("no PNG frames in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<torch::Tensor> frames;
  for (const auto& f : files) {
    frames.push_back(read_frame(f));
    if (!frames.back().sizes().equals(frames.front().sizes())) {
      throw InputError("frame " + f.string() + " differs in size from the first frame of its clip");
    }
  }
  return torch::stack(frames);
}

void write_clip(const fs::path& dir, const torch::Tensor& frames) {
  fs::create_directories(dir);
  for (int64_t t = 0; t < frames.size(0); ++t) write_frame(dir / frame_filename(t + 1), frames[t]);
}

torch::Tensor quantize8(const torch::Tensor& x) { return (x.clamp(0.0, 1.0) * 255.0).round() / 255.0; }

namespace {

uint64_t fnv1a(std::string_view text) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<ClipRecord> load_dataset(const fs::path& root, const std::string& split, const DegradationSpec& spec) {
  if (!fs::is_directory(root)) throw InputError("data root not found: " + root.string());
  const auto entries = read_manifest(root / kDatasetManifest);
  const char* cache_env = std::getenv("IPRRN_CACHE");
  std::vector<ClipRecord> clips;
  for (const auto& e : entries) {
    if (!split.empty() && e.split != split) continue;
    const fs::path clip_dir = root / e.clip_id;
    auto hr = read_clip(clip_dir);
    torch::Tensor lr;
    fs::path cached;
    if (cache_env != nullptr && *cache_env != '\0') {
      std::ostringstream key;
      key << std::hex << fnv1a(render(spec) + "|" + fs::absolute(clip_dir).lexically_normal().string());
      cached = fs::path(cache_env) / key.str();
      if (fs::is_directory(cached)) {
        lr = read_clip(cached);
        if (lr.size(0) != hr.size(0)) lr = torch::Tensor();
      }
    }
    if (!lr.defined()) {
      lr = quantize8(degrade(hr, spec));
      if (!cached.empty()) write_clip(cached, lr);
    }
    clips.push_back({e.clip_id, hr, lr, ClipMeta{clip_dir.string(), 0, 0}});
  }
  if (clips.empty()) {
    throw InputError("no clips" + (split.empty() ? std::string() : " with split '" + split + "'") + " under " +
                     root.string());
  }
  return clips;
}

}  // namespace iprrn
