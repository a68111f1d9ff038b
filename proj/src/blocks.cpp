#include "iprrn/blocks.hpp"

#include <string>

#include "iprrn/errors.hpp"

namespace iprrn {

void kaiming_init(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& child : module.modules(/*include_self=*/true)) {
    if (auto* conv = child->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn, torch::kReLU);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* linear = child->as<torch::nn::Linear>()) {
      torch::nn::init::kaiming_normal_(linear->weight, 0.0, torch::kFanIn, torch::kReLU);
      if (linear->bias.defined()) linear->bias.zero_();
    }
  }
}

void scale_residual_branches(torch::nn::Module& module, double factor) {
  torch::NoGradGuard no_grad;
  for (auto& child : module.modules(/*include_self=*/true)) {
    if (auto* rb = child->as<ResidualBlockImpl>()) {
      rb->conv2->weight.mul_(factor);
    } else if (auto* rdb = child->as<ResidualDenseBlockImpl>()) {
      rdb->fusion->weight.mul_(factor);
    }
  }
}

void zero_parameters(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& p : module.parameters()) p.zero_();
}

torch::nn::Conv2d conv3x3(int64_t in, int64_t out, int64_t groups) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1).groups(groups));
}

torch::nn::Conv2d conv1x1(int64_t in, int64_t out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1));
}

int64_t se_hidden_channels(int64_t channels, int64_t reduction) {
  if (channels < 1 || reduction < 1) {
    throw ConfigError("SE block needs positive channels and reduction");
  }
  const int64_t r = channels < reduction ? channels : reduction;
  if (channels % r != 0) {
    throw ConfigError("SE reduction " + std::to_string(r) + " does not divide " +
                      std::to_string(channels) + " channels");
  }
  return channels / r;
}

SEBlockImpl::SEBlockImpl(int64_t channels_, int64_t reduction) : channels(channels_) {
  const int64_t hidden = se_hidden_channels(channels, reduction);
  reduce = register_module("reduce", torch::nn::Linear(torch::nn::LinearOptions(channels, hidden).bias(false)));
  expand = register_module("expand", torch::nn::Linear(torch::nn::LinearOptions(hidden, channels).bias(false)));
}

torch::Tensor SEBlockImpl::scales(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != channels) {
    throw ConfigError("SE block expects " + std::to_string(channels) + " channels, got " +
                      std::to_string(x.dim() == 4 ? x.size(1) : -1));
  }
  auto squeezed = x.mean({2, 3});
  return torch::sigmoid(expand(torch::relu(reduce(squeezed))));
}

torch::Tensor SEBlockImpl::forward(const torch::Tensor& x) {
  return x * scales(x).unsqueeze(-1).unsqueeze(-1);
}

ResidualBlockImpl::ResidualBlockImpl(int64_t channels)
    : conv1(register_module("conv1", conv3x3(channels, channels))),
      conv2(register_module("conv2", conv3x3(channels, channels))) {}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  return x + conv2(torch::relu(conv1(x)));
}

ResidualDenseBlockImpl::ResidualDenseBlockImpl(int64_t channels_, int64_t growth_)
    : channels(channels_), growth(growth_) {
  if (channels < 1 || growth < 1) throw ConfigError("RDB widths must be positive");
  for (int64_t i = 0; i < kStages; ++i) {
    stages->push_back(conv3x3(channels + i * growth, growth));
  }
  register_module("stages", stages);
  fusion = register_module("fusion", conv1x1(channels + kStages * growth, channels));
}

torch::Tensor ResidualDenseBlockImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> features{x};
  features.reserve(kStages + 1);
  for (const auto& stage : *stages) {
    auto input = features.size() == 1 ? x : torch::cat(features, 1);
    features.push_back(torch::relu(stage->as<torch::nn::Conv2d>()->forward(input)));
  }
  return x + fusion(torch::cat(features, 1));
}

namespace {

void check_scale(int64_t scale) {
  if (scale < 1) throw ConfigError("pixel shuffle scale must be >= 1");
}

}  // namespace

torch::Tensor pixel_shuffle(const torch::Tensor& x, int64_t scale) {
  check_scale(scale);
  if (x.dim() < 3) throw ConfigError("pixel_shuffle expects (.., C, H, W)");
  const int64_t c = x.size(-3);
  if (c % (scale * scale) != 0) {
    throw ConfigError("pixel_shuffle: " + std::to_string(c) + " channels not divisible by " +
                      std::to_string(scale * scale));
  }
  return torch::pixel_shuffle(x, scale);
}

torch::Tensor pixel_unshuffle(const torch::Tensor& x, int64_t scale) {
  check_scale(scale);
  if (x.dim() < 3) throw ConfigError("pixel_unshuffle expects (.., C, H, W)");
  if (x.size(-1) % scale != 0 || x.size(-2) % scale != 0) {
    throw ConfigError("pixel_unshuffle: spatial dims not divisible by scale");
  }
  return torch::pixel_unshuffle(x, scale);
}

}  // namespace iprrn
