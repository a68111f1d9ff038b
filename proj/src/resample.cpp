#include "iprrn/resample.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "iprrn/errors.hpp"

namespace iprrn {

namespace {

constexpr double kCubicA = -0.5;
constexpr double kCubicSupport = 2.0;

// Collapses leading dims so the image is (B, 1, H, W) for conv2d.
torch::Tensor as_planes(const torch::Tensor& image) {
  if (image.dim() < 2) throw InputError("expected an image with at least (H, W) dims");
  return image.reshape({-1, 1, image.size(-2), image.size(-1)});
}

torch::Tensor restore_shape(const torch::Tensor& planes, const torch::Tensor& like) {
  auto sizes = like.sizes().vec();
  sizes[sizes.size() - 2] = planes.size(-2);
  sizes[sizes.size() - 1] = planes.size(-1);
  return planes.reshape(sizes);
}

}  // namespace

double cubic_kernel(double x) {
  x = std::abs(x);
  if (x < 1.0) return ((kCubicA + 2.0) * x - (kCubicA + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * kCubicA;
  return 0.0;
}

torch::Tensor bicubic_weights(int64_t in_size, int64_t out_size) {
  if (in_size < 1 || out_size < 1) throw ConfigError("resize sizes must be positive");
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  const double filter_scale = std::max(scale, 1.0);
  const double support = kCubicSupport * filter_scale;

  auto weights = torch::zeros({out_size, in_size}, torch::kFloat64);
  auto acc = weights.accessor<double, 2>();
  std::vector<double> taps;
  for (int64_t i = 0; i < out_size; ++i) {
    const double center = (static_cast<double>(i) + 0.5) * scale;
    const auto lo = std::max<int64_t>(static_cast<int64_t>(std::floor(center - support + 0.5)), 0);
    const auto hi = std::min<int64_t>(static_cast<int64_t>(std::floor(center + support + 0.5)), in_size);
    taps.assign(static_cast<size_t>(std::max<int64_t>(hi - lo, 0)), 0.0);
    double total = 0.0;
    for (int64_t j = lo; j < hi; ++j) {
      const double w = cubic_kernel((static_cast<double>(j) - center + 0.5) / filter_scale);
      taps[static_cast<size_t>(j - lo)] = w;
      total += w;
    }
    for (int64_t j = lo; j < hi; ++j) {
      acc[i][j] = total != 0.0 ? taps[static_cast<size_t>(j - lo)] / total : 0.0;
    }
  }
  return weights;
}

torch::Tensor bicubic_resize_to(const torch::Tensor& image, int64_t out_h, int64_t out_w) {
  if (image.dim() < 2) throw InputError("bicubic_resize expects (.., H, W)");
  const auto opts = image.options();
  auto wy = bicubic_weights(image.size(-2), out_h).to(opts);
  auto wx = bicubic_weights(image.size(-1), out_w).to(opts);
  return torch::matmul(torch::matmul(wy, image), wx.t());
}

torch::Tensor bicubic_resize(const torch::Tensor& image, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw ConfigError("resize factor must be positive, got " + std::to_string(factor));
  }
  const auto out_h = static_cast<int64_t>(std::llround(static_cast<double>(image.size(-2)) * factor));
  const auto out_w = static_cast<int64_t>(std::llround(static_cast<double>(image.size(-1)) * factor));
  if (out_h < 1 || out_w < 1) throw ConfigError("resize factor collapses the image");
  return bicubic_resize_to(image, out_h, out_w);
}

torch::Tensor gaussian_taps(double sigma, int64_t size) {
  if (!(sigma > 0.0)) throw ConfigError("Gaussian sigma must be positive");
  if (size < 1 || size % 2 == 0) throw ConfigError("Gaussian kernel size must be odd");
  auto taps = torch::empty({size}, torch::kFloat64);
  auto acc = taps.accessor<double, 1>();
  const int64_t half = size / 2;
  double total = 0.0;
  for (int64_t k = -half; k <= half; ++k) {
    const double v = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    acc[k + half] = v;
    total += v;
  }
  return taps / total;
}

torch::Tensor gaussian_blur(const torch::Tensor& image, double sigma, int64_t kernel_size) {
  const int64_t half = kernel_size / 2;
  auto taps = gaussian_taps(sigma, kernel_size).to(image.options());
  auto planes = as_planes(image);
  if (planes.size(-2) <= half || planes.size(-1) <= half) {
    throw InputError("image of " + std::to_string(planes.size(-2)) + "x" + std::to_string(planes.size(-1)) +
                     " is too small for reflect padding by " + std::to_string(half));
  }
  auto padded = torch::reflection_pad2d(planes, {half, half, half, half});
  auto vertical = torch::conv2d(padded, taps.view({1, 1, kernel_size, 1}));
  auto blurred = torch::conv2d(vertical, taps.view({1, 1, 1, kernel_size}));
  return restore_shape(blurred, image);
}

}  // namespace iprrn
