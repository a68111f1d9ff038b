#pragma once

// Information prebuilt network: turns the first m LR frames into the initial
// hidden state h_0 of the recurrence. Runs once per sequence.

#include <torch/torch.h>

#include "iprrn/blocks.hpp"
#include "iprrn/config.hpp"
#include "iprrn/rrnet.hpp"

namespace iprrn {

struct IPNetImpl : torch::nn::Module {
  /// Requires cfg.ipnet_enabled().
  explicit IPNetImpl(const ModelConfig& cfg);

  /// Stacks m frames (B, m, C, H, W) on the channel axis and applies the
  /// grouped 3x3 conv, one filter bank per frame. Throws InputError unless
  /// exactly m frames are given.
  torch::Tensor shallow_extract(const torch::Tensor& frames);

  /// Channel attention (identity when SE is disabled) then 1x1 reduction.
  torch::Tensor filter_features(const torch::Tensor& shallow);

  /// Stack of residual blocks; shape preserving.
  torch::Tensor deep_extract(const torch::Tensor& filtered);

  /// Full IPNet: frames (B, m, C, H, W) -> h_0.
  HiddenState forward(const torch::Tensor& frames);

  ModelConfig cfg;
  torch::nn::Conv2d shallow{nullptr};
  SEBlock se{nullptr};
  torch::nn::Conv2d reduce{nullptr};
  torch::nn::Sequential deep;
  PropagationHead head{nullptr};
};
TORCH_MODULE(IPNet);

}  // namespace iprrn
