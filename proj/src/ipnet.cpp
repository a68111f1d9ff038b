#include "iprrn/ipnet.hpp"

#include <string>

#include "iprrn/errors.hpp"

namespace iprrn {

IPNetImpl::IPNetImpl(const ModelConfig& cfg_) : cfg(cfg_) {
  cfg.validate();
  if (!cfg.ipnet_enabled()) throw ConfigError("IPNet requires ipnet_frames >= 1");
  const int64_t m = cfg.ipnet_frames;
  shallow = register_module("shallow", conv3x3(m * cfg.channels, cfg.shallow_width(), m));
  if (cfg.se_enabled) se = register_module("se", SEBlock(cfg.shallow_width(), cfg.se_reduction));
  reduce = register_module("reduce", conv1x1(cfg.shallow_width(), cfg.ipnet_width));
  for (int64_t i = 0; i < cfg.ipnet_res_blocks; ++i) deep->push_back(ResidualBlock(cfg.ipnet_width));
  register_module("deep", deep);
  head = register_module("head", PropagationHead(cfg.ipnet_width, cfg.hidden_temporal, cfg.hidden_spatial));
}

torch::Tensor IPNetImpl::shallow_extract(const torch::Tensor& frames) {
  if (frames.dim() != 5 || frames.size(1) != cfg.ipnet_frames || frames.size(2) != cfg.channels) {
    throw InputError("IPNet expects (B, " + std::to_string(cfg.ipnet_frames) + ", " + std::to_string(cfg.channels) +
                     ", H, W) frames, got " + std::to_string(frames.dim() == 5 ? frames.size(1) : -1) + " frames");
  }
  auto stacked = frames.reshape({frames.size(0), -1, frames.size(3), frames.size(4)});
  return shallow(stacked);
}

torch::Tensor IPNetImpl::filter_features(const torch::Tensor& shallow_features) {
  return reduce(cfg.se_enabled ? se(shallow_features) : shallow_features);
}

torch::Tensor IPNetImpl::deep_extract(const torch::Tensor& filtered) {
  auto x = filtered;
  for (auto& block : *deep) x = block.forward(x);
  return x;
}

HiddenState IPNetImpl::forward(const torch::Tensor& frames) {
  return head(deep_extract(filter_features(shallow_extract(frames))));
}

}  // namespace iprrn
