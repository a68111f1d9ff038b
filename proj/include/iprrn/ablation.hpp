#pragma once

// Ablation harness: trains and scores config variants that share seed and
// data, and renders the comparison table.
//
// Plan file sections:
//   [plan]         name, sort_by (optional, e.g. model.ipnet_frames)
//   [model] [train] [degradation]   base configuration
//   [sweep]        exactly one `model.<key>` / `train.<key>` with a comma list
//   [variant.<n>]  `model.<key>` / `train.<key>` overrides, `init_from = <n>`
// `init_from` copies the recurrent-cell weights of an earlier variant before
// training (the IPNet portability / fine-tune experiment).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "iprrn/config.hpp"
#include "iprrn/data.hpp"

namespace iprrn {

struct AblationVariant {
  std::string name;
  ModelConfig model;
  TrainConfig train;
  std::string init_from;
  std::vector<std::pair<std::string, std::string>> settings;  // overridden keys in plan order
};

struct AblationPlan {
  std::string name = "ablation";
  std::string sort_by;
  DegradationSpec degradation;
  std::vector<AblationVariant> variants;
};

/// Throws ConfigError naming the offending key (with file:line).
AblationPlan parse_ablation_plan(const KvDocument& doc);

struct AblationRow {
  std::string variant;
  std::vector<std::pair<std::string, std::string>> settings;
  double psnr = 0.0;
  double ssim = 0.0;
  double first_frame_psnr = 0.0;
  double gap_psnr = 0.0;
  int64_t params = 0;
  double ms_per_frame = 0.0;
  std::string error;  // non-empty when the variant failed
};

struct AblationReport {
  std::string name;
  std::vector<std::string> setting_columns;
  std::vector<AblationRow> rows;

  std::string to_markdown() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Trains every variant on `train_set` and scores it on `eval_set`.
/// Failures are recorded in the row and the run continues.
AblationReport ablate(const AblationPlan& plan, const std::vector<ClipRecord>& train_set,
                      const std::vector<ClipRecord>& eval_set,
                      const std::function<void(const std::string&)>& progress = {});

}  // namespace iprrn
