#pragma once

// Differentiable building blocks shared by IPNet and RRNet.
//
// Tensors are NCHW (a batch of feature maps). Every convolution is stride 1
// with zero "same" padding so residual additions line up.

#include <cstdint>

#include <torch/torch.h>

namespace iprrn {

/// Kaiming fan-in normal weights, zero biases, for every conv/linear in `module`.
void kaiming_init(torch::nn::Module& module);

/// Multiplies the last conv of every residual and residual dense block in
/// `module` by `factor`, keeping fresh deep trunks close to identity.
void scale_residual_branches(torch::nn::Module& module, double factor);

/// Zeroes every parameter of `module` in place.
void zero_parameters(torch::nn::Module& module);

torch::nn::Conv2d conv3x3(int64_t in, int64_t out, int64_t groups = 1);
torch::nn::Conv2d conv1x1(int64_t in, int64_t out);

/// Channel count of the SE bottleneck. The reduction ratio falls back to
/// `channels` when channels < reduction; otherwise it must divide channels.
int64_t se_hidden_channels(int64_t channels, int64_t reduction);

/// Squeeze-and-excitation channel attention: global average pooling, a
/// bias-free ReLU bottleneck and a sigmoid gate applied channel-wise.
struct SEBlockImpl : torch::nn::Module {
  SEBlockImpl(int64_t channels, int64_t reduction);

  /// Per-channel gates E in (0,1), shape (B, C).
  torch::Tensor scales(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x);

  int64_t channels;
  torch::nn::Linear reduce{nullptr};  // W1: C -> C/r
  torch::nn::Linear expand{nullptr};  // W2: C/r -> C
};
TORCH_MODULE(SEBlock);

/// x + conv3x3(relu(conv3x3(x)))
struct ResidualBlockImpl : torch::nn::Module {
  explicit ResidualBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Residual dense block: three densely connected conv3x3+ReLU stages, a 1x1
/// fusion back to the input width, and a local residual connection.
struct ResidualDenseBlockImpl : torch::nn::Module {
  static constexpr int64_t kStages = 3;

  ResidualDenseBlockImpl(int64_t channels, int64_t growth);
  torch::Tensor forward(const torch::Tensor& x);

  int64_t channels, growth;
  torch::nn::ModuleList stages;
  torch::nn::Conv2d fusion{nullptr};
};
TORCH_MODULE(ResidualDenseBlock);

/// Rearranges (.., C*s*s, H, W) into (.., C, s*H, s*W). Input channel
/// c*s*s + dy*s + dx lands at output offset (dy, dx) of channel c.
torch::Tensor pixel_shuffle(const torch::Tensor& x, int64_t scale);

/// Exact inverse of pixel_shuffle.
torch::Tensor pixel_unshuffle(const torch::Tensor& x, int64_t scale);

}  // namespace iprrn
