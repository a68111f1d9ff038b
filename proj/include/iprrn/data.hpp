#pragma once

// HR/LR clip handling: the degradation model, synthetic sequences for
// desk-scale experiments, aligned patch sampling and frame-folder I/O.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "iprrn/config.hpp"

namespace iprrn {

struct ClipMeta {
  std::string source;
  int64_t crop_y = 0;  // HR pixels
  int64_t crop_x = 0;
};

/// A clip as (N, C, H, W) float tensors in [0,1]; lr dims are hr dims / scale.
struct ClipRecord {
  std::string id;
  torch::Tensor hr;
  torch::Tensor lr;
  ClipMeta meta;
};

/// HR -> LR for (.., C, H, W). Gaussian mode blurs with reflect padding and
/// keeps every scale-th pixel starting at 0; bicubic mode is an antialiased
/// bicubic downscale. Output is clamped to [0,1]. Throws InputError when H
/// or W is not divisible by the scale.
torch::Tensor degrade(const torch::Tensor& hr, const DegradationSpec& spec);

/// Degrades `hr` and packages the pair.
ClipRecord make_clip(std::string id, torch::Tensor hr, const DegradationSpec& spec, std::string source = {});

enum class SynthKind { kTranslatingTexture, kRotatingPattern, kRandomSmooth };

std::string to_string(SynthKind kind);
SynthKind synth_kind_from(const std::string& name);

struct SynthOptions {
  SynthKind kind = SynthKind::kTranslatingTexture;
  int64_t frames = 7;
  int64_t height = 64;
  int64_t width = 64;
  int64_t channels = 3;
  uint64_t seed = 0;
  /// (dy, dx) HR pixels per frame; drawn from the seed when unset.
  std::optional<std::array<double, 2>> velocity;
  /// Highest spatial frequency in cycles per frame extent; 0 picks min(H,W)/6.
  int64_t max_frequency = 0;
  int64_t components = 12;
};

/// Deterministic synthetic sequence (N, C, H, W) in [0,1]. Translating
/// textures are periodic on the frame, so integer velocities give exact
/// wrap-around shifts.
torch::Tensor synth_sequence(const SynthOptions& options);

/// Aligned crop at HR offset (y, x); both offsets must be multiples of the
/// clip's scale. Throws InputError when the crop leaves the frame.
ClipRecord crop_patch(const ClipRecord& clip, int64_t hr_patch, int64_t y, int64_t x);

/// Random aligned crop; offsets are drawn as multiples of the scale.
ClipRecord sample_patch(const ClipRecord& clip, int64_t hr_patch, std::mt19937_64& rng);

/// HR / LR size ratio of a clip.
int64_t clip_scale(const ClipRecord& clip);

// ---------------------------------------------------------------------------
// Frame folders: <root>/<clip_id>/00000001.png, plus <root>/manifest.txt
// with one "<clip_id> <split>" line per clip.

struct ManifestEntry {
  std::string clip_id;
  std::string split;
  bool operator==(const ManifestEntry&) const = default;
};

inline constexpr const char* kDatasetManifest = "manifest.txt";

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

/// (C, H, W) float in [0,1]; RGB order for colour images.
torch::Tensor read_frame(const std::filesystem::path& path);
/// Clamps to [0,1] and writes an 8-bit PNG.
void write_frame(const std::filesystem::path& path, const torch::Tensor& frame);

/// 1-based, zero-padded to 8 digits.
std::string frame_filename(int64_t index);

/// Sorted *.png frames of a clip directory as (N, C, H, W).
torch::Tensor read_clip(const std::filesystem::path& dir);
void write_clip(const std::filesystem::path& dir, const torch::Tensor& frames);

/// Rounds to the nearest 8-bit level.
torch::Tensor quantize8(const torch::Tensor& x);

/// Loads the clips of `split` ("" for all) and degrades them. Degraded LR
/// frames are quantized to 8 bit; when IPRRN_CACHE is set they are cached
/// there as PNG folders keyed by the degradation spec.
std::vector<ClipRecord> load_dataset(const std::filesystem::path& root, const std::string& split,
                                     const DegradationSpec& spec);

}  // namespace iprrn
