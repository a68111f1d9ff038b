#include "iprrn/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "iprrn/errors.hpp"

namespace fs = std::filesystem;

namespace iprrn {

torch::Tensor sequence_loss(const torch::Tensor& sr, const torch::Tensor& hr) {
  if (!sr.sizes().equals(hr.sizes())) throw InputError("loss inputs differ in shape");
  return (sr - hr).abs().mean();
}

double learning_rate_at(const TrainConfig& cfg, int64_t epoch) {
  return cfg.lr * std::pow(cfg.decay_factor, static_cast<double>(epoch / cfg.decay_every));
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc{} ? std::string(buf, end) : std::to_string(v);
}

std::shared_ptr<torch::optim::Adam> make_optimizer(IPRRN& model, const TrainConfig& cfg) {
  return std::make_shared<torch::optim::Adam>(
      model->parameters(), torch::optim::AdamOptions(cfg.lr).betas({cfg.beta1, cfg.beta2}));
}

void set_learning_rate(torch::optim::Adam& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

}  // namespace

void append_log_row(const fs::path& path, const EpochLog& row) {
  const bool fresh = !fs::exists(path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw InputError("cannot write " + path.string());
  if (fresh) out << "epoch,loss,lr\n";
  out << row.epoch << ',' << shortest(row.loss) << ',' << shortest(row.lr) << '\n';
}

std::vector<EpochLog> read_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::vector<EpochLog> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochLog row;
    char comma = 0;
    std::istringstream fields(line);
    if (!(fields >> row.epoch >> comma >> row.loss >> comma >> row.lr)) {
      throw InputError("malformed log row in " + path.string() + ": " + line);
    }
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const DegradationSpec& degradation)
    : model_cfg_(model_cfg), train_cfg_(train_cfg), degradation_(degradation), rng_(train_cfg.seed) {
  model_cfg_.validate();
  train_cfg_.validate();
  model_ = IPRRN(model_cfg_);
  optimizer_ = make_optimizer(model_, train_cfg_);
}

Trainer::Trainer(Checkpoint resume)
    : model_cfg_(resume.model_config),
      train_cfg_(resume.train_config),
      degradation_(resume.degradation),
      model_(resume.model),
      optimizer_(resume.optimizer),
      epoch_(resume.epoch) {
  if (!optimizer_) optimizer_ = make_optimizer(model_, train_cfg_);
  if (!resume.rng_state.empty()) {
    std::istringstream state(resume.rng_state);
    state >> rng_;
  } else {
    rng_.seed(train_cfg_.seed);
  }
}

std::pair<torch::Tensor, torch::Tensor> Trainer::make_batch(const std::vector<ClipRecord>& dataset,
                                                            const std::vector<size_t>& picks) {
  std::vector<torch::Tensor> lrs, hrs;
  for (size_t i : picks) {
    const auto& clip = dataset[i];
    const int64_t n = clip.hr.size(0);
    if (n < train_cfg_.seq_len) {
      throw InputError("clip " + clip.id + " has " + std::to_string(n) + " frames, seq_len is " +
                       std::to_string(train_cfg_.seq_len));
    }
    std::uniform_int_distribution<int64_t> start_dist(0, n - train_cfg_.seq_len);
    const int64_t start = start_dist(rng_);
    auto patch = sample_patch(clip, train_cfg_.hr_patch, rng_);
    lrs.push_back(patch.lr.narrow(0, start, train_cfg_.seq_len));
    hrs.push_back(patch.hr.narrow(0, start, train_cfg_.seq_len));
  }
  return {torch::stack(lrs), torch::stack(hrs)};
}

double Trainer::accumulate_gradients(const torch::Tensor& lr_batch, const torch::Tensor& hr_batch) {
  model_->train();
  optimizer_->zero_grad();
  auto loss = sequence_loss(model_->forward(lr_batch), hr_batch);
  loss.backward();
  return loss.item<double>();
}

EpochLog Trainer::run_epoch(const std::vector<ClipRecord>& dataset) {
  if (dataset.empty()) throw InputError("training set is empty");
  const double lr = learning_rate_at(train_cfg_, epoch_);
  set_learning_rate(*optimizer_, lr);

  std::vector<size_t> order;
  for (int64_t r = 0; r < train_cfg_.dataset_repeat; ++r) {
    for (size_t i = 0; i < dataset.size(); ++i) order.push_back(i);
  }
  std::shuffle(order.begin(), order.end(), rng_);

  double total = 0.0;
  int64_t batches = 0;
  for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(train_cfg_.batch_size)) {
    const size_t end = std::min(order.size(), begin + static_cast<size_t>(train_cfg_.batch_size));
    const std::vector<size_t> picks(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                    order.begin() + static_cast<std::ptrdiff_t>(end));
    auto [lr_batch, hr_batch] = make_batch(dataset, picks);
    const double loss = accumulate_gradients(lr_batch, hr_batch);
    if (!std::isfinite(loss)) {
      throw TrainingDiverged("loss became " + std::to_string(loss) + " at epoch " + std::to_string(epoch_) +
                             ", batch " + std::to_string(batches));
    }
    if (train_cfg_.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(model_->parameters(), train_cfg_.grad_clip);
    optimizer_->step();
    total += loss;
    ++batches;
  }
  EpochLog row{epoch_, total / static_cast<double>(batches), lr};
  ++epoch_;
  return row;
}

Checkpoint Trainer::checkpoint() const {
  std::ostringstream state;
  state << rng_;
  return {model_cfg_, train_cfg_, degradation_, epoch_, state.str(), model_, optimizer_};
}

Checkpoint train(Trainer& trainer, const std::vector<ClipRecord>& dataset, const TrainOutputs& outputs) {
  while (trainer.epoch() < trainer.train_config().max_epochs) {
    EpochLog row;
    try {
      row = trainer.run_epoch(dataset);
    } catch (const TrainingDiverged&) {
      if (!outputs.diagnostic_dir.empty()) {
        fs::create_directories(outputs.diagnostic_dir);
        save_checkpoint(trainer.checkpoint(), outputs.diagnostic_dir / "diverged.ckpt");
      }
      throw;
    }
    if (!outputs.log_csv.empty()) append_log_row(outputs.log_csv, row);
    if (outputs.on_epoch) outputs.on_epoch(row);
  }
  auto ckpt = trainer.checkpoint();
  if (!outputs.final_checkpoint.empty()) save_checkpoint(ckpt, outputs.final_checkpoint);
  return ckpt;
}

Checkpoint train(const std::vector<ClipRecord>& dataset, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                 const TrainOutputs& outputs, const DegradationSpec& degradation) {
  if (dataset.empty()) throw InputError("training set is empty");
  Trainer trainer(model_cfg, train_cfg, degradation);
  return train(trainer, dataset, outputs);
}

EvalResult evaluate(IPRRN model, const std::vector<ClipRecord>& clips, ChannelMode mode, int64_t border_crop) {
  torch::NoGradGuard no_grad;
  model->eval();
  EvalResult result;
  double elapsed_ms = 0.0;
  int64_t frames = 0;
  for (const auto& clip : clips) {
    if (clip_scale(clip) != model->cfg.scale) {
      throw ConfigError("clip " + clip.id + " has scale " + std::to_string(clip_scale(clip)) + ", model expects " +
                        std::to_string(model->cfg.scale));
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto sr = model->forward(clip.lr.unsqueeze(0)).squeeze(0);
    elapsed_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    frames += sr.size(0);
    result.reports.push_back(evaluate_sequence(clip.id, sr, clip.hr, mode, border_crop));
    result.sr.push_back(sr);
  }
  result.ms_per_frame = frames > 0 ? elapsed_ms / static_cast<double>(frames) : 0.0;
  return result;
}

}  // namespace iprrn
