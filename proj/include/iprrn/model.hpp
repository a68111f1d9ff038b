#pragma once

// IPRRN: IPNet builds h_0 once, RRNet reconstructs the sequence front to back.

#include <cstdint>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "iprrn/config.hpp"
#include "iprrn/ipnet.hpp"
#include "iprrn/rrnet.hpp"

namespace iprrn {

/// Left-pads a (B, N, C, H, W) sequence to at least m frames by repeating
/// frame 1, then keeps the first m.
torch::Tensor leading_frames(const torch::Tensor& lr_seq, int64_t m);

/// Factor applied after Kaiming init to residual branch outputs and to the
/// RRNet spatial head, so a fresh model starts near the bicubic upscale.
inline constexpr double kResidualInitScale = 0.1;

struct IPRRNImpl : torch::nn::Module {
  /// Validates cfg and initializes weights from cfg.init_seed. RRNet is
  /// initialized before IPNet so toggling IPNet leaves RRNet's init intact.
  explicit IPRRNImpl(const ModelConfig& cfg);

  /// h_0 for a (B, N, C, H, W) LR batch; all zeros when IPNet is disabled.
  HiddenState prebuild_hidden(const torch::Tensor& lr_seq);

  /// Unrolls the cell over all N frames starting from h0. At t = 1 the
  /// neighbor frame is frame 1 itself. Returns (B, N, C, sH, sW).
  torch::Tensor run_sequence(const torch::Tensor& lr_seq, const HiddenState& h0);

  torch::Tensor forward(const torch::Tensor& lr_seq) { return run_sequence(lr_seq, prebuild_hidden(lr_seq)); }

  ModelConfig cfg;
  RRNet rrnet{nullptr};
  IPNet ipnet{nullptr};  // null when ipnet_frames == 0
};
TORCH_MODULE(IPRRN);

/// Trainable scalar count computed from the config alone.
int64_t count_params(const ModelConfig& cfg);

/// Trainable scalar count of an instantiated module.
int64_t count_params(torch::nn::Module& module);

/// Frame-at-a-time inference with O(1) live state (plus the m-frame IPNet
/// buffer at the start). SR frame t is emitted once max(t, m) inputs have
/// been read.
class StreamingReconstructor {
 public:
  explicit StreamingReconstructor(IPRRN model);

  /// Feeds one (B, C, H, W) LR frame; returns the SR frames that became available.
  std::vector<torch::Tensor> push(const torch::Tensor& frame);

  /// Flushes the IPNet buffer for sequences shorter than m.
  std::vector<torch::Tensor> finish();

  int64_t frames_read() const { return frames_read_; }
  int64_t frames_emitted() const { return frames_emitted_; }

 private:
  torch::Tensor advance(const torch::Tensor& frame);
  std::vector<torch::Tensor> start(const std::vector<torch::Tensor>& buffered);

  IPRRN model_;
  std::vector<torch::Tensor> pending_;
  std::optional<HiddenState> hidden_;
  torch::Tensor previous_;
  int64_t frames_read_ = 0;
  int64_t frames_emitted_ = 0;
};

}  // namespace iprrn
