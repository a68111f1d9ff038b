#pragma once

// The recurrent reconstruction cell. One step consumes the previous hidden
// state with the previous and current LR frames and emits the next hidden
// state plus the SR frame.

#include <torch/torch.h>

#include "iprrn/blocks.hpp"
#include "iprrn/config.hpp"

namespace iprrn {

/// LR-resolution recurrent state, split into a temporal part that carries
/// history and a spatial part that is pixel-shuffled into the SR residual.
struct HiddenState {
  torch::Tensor temporal;  // (B, hidden_temporal, H, W)
  torch::Tensor spatial;   // (B, s*s*C, H, W)

  static HiddenState zeros(const ModelConfig& cfg, int64_t batch, int64_t height, int64_t width,
                           torch::TensorOptions options = {});

  /// Temporal channels first, then spatial.
  torch::Tensor concat() const { return torch::cat({temporal, spatial}, 1); }
};

struct StepOutput {
  HiddenState hidden;
  torch::Tensor sr;  // (B, C, s*H, s*W)
};

/// Maps trunk features to a hidden state: conv+ReLU for the temporal part,
/// a plain conv for the spatial part. IPNet owns a second, independent copy.
struct PropagationHeadImpl : torch::nn::Module {
  PropagationHeadImpl(int64_t in_channels, int64_t temporal_channels, int64_t spatial_channels);
  HiddenState forward(const torch::Tensor& features);

  torch::nn::Conv2d temporal{nullptr}, spatial{nullptr};
};
TORCH_MODULE(PropagationHead);

struct RRNetImpl : torch::nn::Module {
  explicit RRNetImpl(const ModelConfig& cfg);

  /// Frames are (B, C, H, W); h_prev must match the configured split.
  StepOutput step(const HiddenState& h_prev, const torch::Tensor& frame_prev, const torch::Tensor& frame_cur);

  /// Deep features D_t before the head, exposed for tests.
  torch::Tensor features(const HiddenState& h_prev, const torch::Tensor& frame_prev, const torch::Tensor& frame_cur);

  ModelConfig cfg;
  torch::nn::Conv2d entry{nullptr};
  torch::nn::Sequential trunk;
  PropagationHead head{nullptr};
};
TORCH_MODULE(RRNet);

}  // namespace iprrn
