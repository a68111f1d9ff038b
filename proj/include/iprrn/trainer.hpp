#pragma once

// End-to-end training: IPNet once per sequence, RRNet unrolled over every
// frame, L1 over the whole sequence, Adam with step decay.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "iprrn/config.hpp"
#include "iprrn/data.hpp"
#include "iprrn/metrics.hpp"
#include "iprrn/model.hpp"

namespace iprrn {

/// Mean absolute error over all frames, pixels and channels. Throws
/// InputError when the shapes differ.
torch::Tensor sequence_loss(const torch::Tensor& sr, const torch::Tensor& hr);

/// lr0 * decay_factor^(epoch / decay_every), epochs counted from 0.
double learning_rate_at(const TrainConfig& cfg, int64_t epoch);

/// Thrown when the training loss stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to resume training or reproduce a forward pass.
struct Checkpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  DegradationSpec degradation;
  int64_t epoch = 0;  // completed epochs
  std::string rng_state;
  IPRRN model{nullptr};
  std::shared_ptr<torch::optim::Adam> optimizer;  // may be null for inference-only checkpoints
};

inline constexpr const char* kCheckpointFormat = "iprrn-checkpoint/1";

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochLog {
  int64_t epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

/// Writes and reads the `epoch,loss,lr` training log.
void append_log_row(const std::filesystem::path& path, const EpochLog& row);
std::vector<EpochLog> read_log(const std::filesystem::path& path);

class Trainer {
 public:
  Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const DegradationSpec& degradation = {});
  explicit Trainer(Checkpoint resume);

  /// One pass over `dataset` (repeated dataset_repeat times) in seeded
  /// random order. Throws TrainingDiverged on a non-finite loss.
  EpochLog run_epoch(const std::vector<ClipRecord>& dataset);

  /// Loss and gradients of one batch without an optimizer step.
  double accumulate_gradients(const torch::Tensor& lr_batch, const torch::Tensor& hr_batch);

  Checkpoint checkpoint() const;
  IPRRN model() const { return model_; }
  torch::optim::Adam& optimizer() { return *optimizer_; }
  int64_t epoch() const { return epoch_; }
  const TrainConfig& train_config() const { return train_cfg_; }

 private:
  std::pair<torch::Tensor, torch::Tensor> make_batch(const std::vector<ClipRecord>& dataset,
                                                     const std::vector<size_t>& picks);

  ModelConfig model_cfg_;
  TrainConfig train_cfg_;
  DegradationSpec degradation_;
  IPRRN model_{nullptr};
  std::shared_ptr<torch::optim::Adam> optimizer_;
  std::mt19937_64 rng_;
  int64_t epoch_ = 0;
};

struct TrainOutputs {
  std::filesystem::path log_csv;           // appended per epoch when set
  std::filesystem::path final_checkpoint;  // written at the end when set
  std::filesystem::path diagnostic_dir;    // receives diverged.ckpt on NaN
  std::function<void(const EpochLog&)> on_epoch;
};

/// Trains from scratch for train_cfg.max_epochs epochs.
Checkpoint train(const std::vector<ClipRecord>& dataset, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                 const TrainOutputs& outputs = {}, const DegradationSpec& degradation = {});

/// Continues `trainer` until max_epochs.
Checkpoint train(Trainer& trainer, const std::vector<ClipRecord>& dataset, const TrainOutputs& outputs = {});

struct EvalResult {
  std::vector<MetricsReport> reports;
  std::vector<torch::Tensor> sr;  // (N, C, sH, sW) per clip, unclamped
  double ms_per_frame = 0.0;
};

/// Full-frame inference and scoring of each clip.
EvalResult evaluate(IPRRN model, const std::vector<ClipRecord>& clips, ChannelMode mode = ChannelMode::kY,
                    int64_t border_crop = 0);

}  // namespace iprrn
