#pragma once

#include <cstdint>

#include <torch/torch.h>

namespace iprrn {

/// Keys cubic convolution kernel with a = -0.5 (Catmull-Rom).
double cubic_kernel(double x);

/// Dense (out_size x in_size) matrix of separable bicubic weights. Sample
/// centers are aligned on pixel centers; when downscaling the kernel is
/// stretched by the scale factor (antialiasing). Rows are renormalized so
/// truncation at the borders keeps constants constant.
torch::Tensor bicubic_weights(int64_t in_size, int64_t out_size);

/// Bicubic resampling of the two trailing (H, W) dims to (out_h, out_w).
/// Differentiable; no clamping, so overshoot past the input range survives.
torch::Tensor bicubic_resize_to(const torch::Tensor& image, int64_t out_h, int64_t out_w);

/// Resamples by `factor` on both axes; output size round(in * factor).
torch::Tensor bicubic_resize(const torch::Tensor& image, double factor);

/// Normalized 1-D Gaussian taps of odd length `size`.
torch::Tensor gaussian_taps(double sigma, int64_t size);

/// Separable Gaussian blur with reflect padding on the trailing (H, W) dims.
torch::Tensor gaussian_blur(const torch::Tensor& image, double sigma, int64_t kernel_size);

}  // namespace iprrn
