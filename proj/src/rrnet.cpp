#include "iprrn/rrnet.hpp"

#include <string>

#include "iprrn/errors.hpp"
#include "iprrn/resample.hpp"

namespace iprrn {

HiddenState HiddenState::zeros(const ModelConfig& cfg, int64_t batch, int64_t height, int64_t width,
                               torch::TensorOptions options) {
  return {torch::zeros({batch, cfg.hidden_temporal, height, width}, options),
          torch::zeros({batch, cfg.hidden_spatial, height, width}, options)};
}

PropagationHeadImpl::PropagationHeadImpl(int64_t in_channels, int64_t temporal_channels, int64_t spatial_channels)
    : temporal(register_module("temporal", conv3x3(in_channels, temporal_channels))),
      spatial(register_module("spatial", conv3x3(in_channels, spatial_channels))) {}

HiddenState PropagationHeadImpl::forward(const torch::Tensor& features) {
  return {torch::relu(temporal(features)), spatial(features)};
}

RRNetImpl::RRNetImpl(const ModelConfig& cfg_) : cfg(cfg_) {
  cfg.validate();
  const int64_t in = 2 * cfg.channels + cfg.hidden_channels();
  entry = register_module("entry", conv3x3(in, cfg.width));
  for (int64_t i = 0; i < cfg.n_blocks; ++i) {
    if (cfg.backbone == Backbone::kDense) {
      trunk->push_back(ResidualDenseBlock(cfg.width, cfg.rdb_growth));
    } else {
      trunk->push_back(ResidualBlock(cfg.width));
    }
  }
  register_module("trunk", trunk);
  head = register_module("head", PropagationHead(cfg.width, cfg.hidden_temporal, cfg.hidden_spatial));
}

torch::Tensor RRNetImpl::features(const HiddenState& h_prev, const torch::Tensor& frame_prev,
                                  const torch::Tensor& frame_cur) {
  if (frame_cur.dim() != 4 || frame_cur.size(1) != cfg.channels) {
    throw ConfigError("RRNet expects (B, " + std::to_string(cfg.channels) + ", H, W) frames");
  }
  if (!frame_prev.sizes().equals(frame_cur.sizes())) {
    throw ConfigError("previous and current frames differ in shape");
  }
  const auto b = frame_cur.size(0), h = frame_cur.size(2), w = frame_cur.size(3);
  const auto expect = [&](const torch::Tensor& t, int64_t c, const char* name) {
    if (t.dim() != 4 || t.size(0) != b || t.size(1) != c || t.size(2) != h || t.size(3) != w) {
      throw ConfigError(std::string("hidden state ") + name + " part does not match the configured split (" +
                        std::to_string(c) + " channels at the frame resolution)");
    }
  };
  expect(h_prev.temporal, cfg.hidden_temporal, "temporal");
  expect(h_prev.spatial, cfg.hidden_spatial, "spatial");

  auto x = torch::relu(entry(torch::cat({frame_cur, frame_prev, h_prev.temporal, h_prev.spatial}, 1)));
  for (auto& block : *trunk) x = block.forward(x);
  return x;
}

StepOutput RRNetImpl::step(const HiddenState& h_prev, const torch::Tensor& frame_prev,
                           const torch::Tensor& frame_cur) {
  HiddenState next = head(features(h_prev, frame_prev, frame_cur));
  auto residual = iprrn::pixel_shuffle(next.spatial, cfg.scale);
  auto upscaled = bicubic_resize_to(frame_cur, cfg.scale * frame_cur.size(2), cfg.scale * frame_cur.size(3));
  return {std::move(next), upscaled + residual};
}

}  // namespace iprrn
