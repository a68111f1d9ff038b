#include "iprrn/model.hpp"

#include <string>

#include "iprrn/errors.hpp"

namespace iprrn {

torch::Tensor leading_frames(const torch::Tensor& lr_seq, int64_t m) {
  if (lr_seq.dim() != 5 || lr_seq.size(1) < 1) throw InputError("expected a non-empty (B, N, C, H, W) sequence");
  if (m < 1) throw ConfigError("leading_frames needs m >= 1");
  const int64_t n = lr_seq.size(1);
  if (n >= m) return lr_seq.narrow(1, 0, m);
  auto first = lr_seq.narrow(1, 0, 1);
  return torch::cat({first.expand({-1, m - n, -1, -1, -1}), lr_seq}, 1);
}

IPRRNImpl::IPRRNImpl(const ModelConfig& cfg_) : cfg(cfg_) {
  cfg.validate();
  torch::manual_seed(cfg.init_seed);
  rrnet = register_module("rrnet", RRNet(cfg));
  kaiming_init(*rrnet);
  scale_residual_branches(*rrnet, kResidualInitScale);
  {
    torch::NoGradGuard no_grad;
    rrnet->head->spatial->weight.mul_(kResidualInitScale);
  }
  if (cfg.ipnet_enabled()) {
    torch::manual_seed(cfg.init_seed + 1);
    ipnet = register_module("ipnet", IPNet(cfg));
    kaiming_init(*ipnet);
    scale_residual_branches(*ipnet, kResidualInitScale);
    // Prebuilt state starts at the magnitude RRNet's own heads produce.
    torch::NoGradGuard no_grad;
    ipnet->head->temporal->weight.mul_(kResidualInitScale);
    ipnet->head->spatial->weight.mul_(kResidualInitScale);
  }
}

HiddenState IPRRNImpl::prebuild_hidden(const torch::Tensor& lr_seq) {
  if (lr_seq.dim() != 5 || lr_seq.size(1) < 1) throw InputError("expected a non-empty (B, N, C, H, W) sequence");
  if (!cfg.ipnet_enabled()) {
    return HiddenState::zeros(cfg, lr_seq.size(0), lr_seq.size(3), lr_seq.size(4), lr_seq.options());
  }
  return ipnet(leading_frames(lr_seq, cfg.ipnet_frames));
}

torch::Tensor IPRRNImpl::run_sequence(const torch::Tensor& lr_seq, const HiddenState& h0) {
  if (lr_seq.dim() != 5 || lr_seq.size(1) < 1) throw InputError("run_sequence needs at least one frame");
  const int64_t n = lr_seq.size(1);
  std::vector<torch::Tensor> outputs;
  outputs.reserve(static_cast<size_t>(n));
  HiddenState hidden = h0;
  torch::Tensor previous = lr_seq.select(1, 0);
  for (int64_t t = 0; t < n; ++t) {
    auto current = lr_seq.select(1, t);
    auto out = rrnet->step(hidden, previous, current);
    hidden = std::move(out.hidden);
    outputs.push_back(std::move(out.sr));
    previous = current;
  }
  return torch::stack(outputs, 1);
}

namespace {

int64_t conv_params(int64_t in, int64_t out, int64_t kernel, int64_t groups = 1) {
  return out * (in / groups) * kernel * kernel + out;
}

}  // namespace

int64_t count_params(const ModelConfig& cfg) {
  cfg.validate();
  const int64_t head_rr = conv_params(cfg.width, cfg.hidden_temporal, 3) + conv_params(cfg.width, cfg.hidden_spatial, 3);
  int64_t block = 0;
  if (cfg.backbone == Backbone::kDense) {
    for (int64_t i = 0; i < ResidualDenseBlockImpl::kStages; ++i) {
      block += conv_params(cfg.width + i * cfg.rdb_growth, cfg.rdb_growth, 3);
    }
    block += conv_params(cfg.width + ResidualDenseBlockImpl::kStages * cfg.rdb_growth, cfg.width, 1);
  } else {
    block = 2 * conv_params(cfg.width, cfg.width, 3);
  }
  int64_t total = conv_params(2 * cfg.channels + cfg.hidden_channels(), cfg.width, 3) + cfg.n_blocks * block + head_rr;

  if (cfg.ipnet_enabled()) {
    const int64_t m = cfg.ipnet_frames, sw = cfg.shallow_width(), iw = cfg.ipnet_width;
    total += conv_params(m * cfg.channels, sw, 3, m);
    if (cfg.se_enabled) total += 2 * sw * se_hidden_channels(sw, cfg.se_reduction);
    total += conv_params(sw, iw, 1);
    total += cfg.ipnet_res_blocks * 2 * conv_params(iw, iw, 3);
    total += conv_params(iw, cfg.hidden_temporal, 3) + conv_params(iw, cfg.hidden_spatial, 3);
  }
  return total;
}

int64_t count_params(torch::nn::Module& module) {
  int64_t total = 0;
  for (const auto& p : module.parameters()) {
    if (p.requires_grad()) total += p.numel();
  }
  return total;
}

// ---------------------------------------------------------------------------

StreamingReconstructor::StreamingReconstructor(IPRRN model) : model_(std::move(model)) {}

torch::Tensor StreamingReconstructor::advance(const torch::Tensor& frame) {
  auto out = model_->rrnet->step(*hidden_, previous_, frame);
  hidden_ = std::move(out.hidden);
  previous_ = frame;
  ++frames_emitted_;
  return out.sr;
}

std::vector<torch::Tensor> StreamingReconstructor::start(const std::vector<torch::Tensor>& buffered) {
  hidden_ = model_->prebuild_hidden(torch::stack(buffered, 1));
  previous_ = buffered.front();
  std::vector<torch::Tensor> out;
  for (const auto& frame : buffered) out.push_back(advance(frame));
  return out;
}

std::vector<torch::Tensor> StreamingReconstructor::push(const torch::Tensor& frame) {
  torch::NoGradGuard no_grad;
  ++frames_read_;
  if (hidden_) return {advance(frame)};
  pending_.push_back(frame);
  if (static_cast<int64_t>(pending_.size()) < std::max<int64_t>(model_->cfg.ipnet_frames, 1)) return {};
  auto out = start(pending_);
  pending_.clear();
  return out;
}

std::vector<torch::Tensor> StreamingReconstructor::finish() {
  torch::NoGradGuard no_grad;
  if (hidden_ || pending_.empty()) return {};
  auto out = start(pending_);
  pending_.clear();
  return out;
}

}  // namespace iprrn
