#pragma once

// PSNR / SSIM on the luma channel (or RGB), per-frame curves and the
// max-minus-min PSNR gap of a reconstructed sequence.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace iprrn {

enum class ChannelMode { kY, kRGB };

std::string to_string(ChannelMode mode);

/// Returned by psnr() for identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// Declared luma convention, recorded in every report.
inline constexpr const char* kLumaConvention = "bt601-studio (Y = 16/255 + (65.481 R + 128.553 G + 24.966 B) / 255)";

/// BT.601 studio-swing luma of a (3, H, W) RGB frame in [0,1] -> (1, H, W).
/// Single-channel frames are returned unchanged.
torch::Tensor rgb_to_y(const torch::Tensor& frame);

/// 10 log10(1 / MSE) on (C, H, W) frames clamped to [0,1]. Identical inputs
/// give kPsnrIdentical. Throws InputError on shape mismatch.
double psnr(const torch::Tensor& ref, const torch::Tensor& test, ChannelMode mode = ChannelMode::kY,
            int64_t border_crop = 0);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), k1 = 0.01,
/// k2 = 0.03, dynamic range 1, averaged over valid windows (and channels
/// in RGB mode).
double ssim(const torch::Tensor& ref, const torch::Tensor& test, ChannelMode mode = ChannelMode::kY,
            int64_t border_crop = 0);

struct GapStats {
  double min = 0.0;
  double max = 0.0;
  double gap = 0.0;
  double mean = 0.0;
  int64_t infinite = 0;  // sentinels excluded from min/max/mean/gap
};

/// Throws InputError on an empty list. A list of only sentinels reports
/// min = max = mean = infinity and gap 0.
GapStats gap_report(const std::vector<double>& per_frame_psnr);

struct MetricsReport {
  std::string clip;
  std::vector<double> per_frame_psnr;
  std::vector<double> per_frame_ssim;
  double mean_psnr = 0.0;
  double min_psnr = 0.0;
  double max_psnr = 0.0;
  double gap_psnr = 0.0;
  double mean_ssim = 0.0;
  int64_t infinite_frames = 0;
  ChannelMode channel_mode = ChannelMode::kY;
  int64_t border_crop = 0;
};

/// Scores (N, C, H, W) SR against HR frame by frame. SR is clamped here.
MetricsReport evaluate_sequence(const std::string& clip, const torch::Tensor& sr, const torch::Tensor& hr,
                                ChannelMode mode = ChannelMode::kY, int64_t border_crop = 0);

/// CSV with header `clip,frame_idx,psnr,ssim,gap_psnr`: one row per frame
/// (empty gap), then one `<clip>,all,<mean psnr>,<mean ssim>,<gap>` row per
/// clip. Leading `# key=value` lines carry `metadata`.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports,
                       const std::map<std::string, std::string>& metadata = {});

struct PsnrSeries {
  std::string label;
  std::vector<double> psnr;
};

/// Per-frame PSNR curves as a PNG line chart, one colour per series.
void plot_psnr_curves(const std::filesystem::path& path, const std::string& title,
                      const std::vector<PsnrSeries>& series);

}  // namespace iprrn
