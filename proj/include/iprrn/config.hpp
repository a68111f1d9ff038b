#pragma once

// Configuration types and the line-oriented `key = value` format with
// `[section]` headers used for config files, run manifests and ablation plans.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace iprrn {

/// Trunk block type of the recurrent cell. `kDense` is RRNet; `kResidual`
/// is the plain residual-block recurrence used for the portability study.
enum class Backbone { kDense, kResidual };

enum class DegradationMode { kGaussian, kBicubic };

std::string to_string(Backbone b);
std::string to_string(DegradationMode m);

struct ModelConfig {
  int64_t scale = 4;
  int64_t channels = 3;

  // IPNet; ipnet_frames == 0 disables it (zero initial hidden state).
  int64_t ipnet_frames = 7;
  int64_t shallow_per_frame = 16;
  int64_t ipnet_width = 128;
  int64_t ipnet_res_blocks = 5;
  bool se_enabled = true;
  int64_t se_reduction = 16;

  // Recurrent cell.
  Backbone backbone = Backbone::kDense;
  int64_t width = 128;
  int64_t n_blocks = 10;  // RDBs, or residual blocks for the resblock backbone
  int64_t rdb_growth = 64;
  int64_t hidden_temporal = 128;
  int64_t hidden_spatial = 48;

  uint64_t init_seed = 0;

  bool ipnet_enabled() const { return ipnet_frames > 0; }
  int64_t shallow_width() const { return ipnet_frames * shallow_per_frame; }
  int64_t hidden_channels() const { return hidden_temporal + hidden_spatial; }

  /// Throws ConfigError naming the offending field.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  int64_t batch_size = 8;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double decay_factor = 0.1;
  int64_t decay_every = 60;
  int64_t max_epochs = 0;  // required
  int64_t seq_len = 7;
  int64_t hr_patch = 256;
  int64_t dataset_repeat = 1;
  double grad_clip = 0.0;  // max global norm; 0 disables
  uint64_t seed = 0;

  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

struct DegradationSpec {
  DegradationMode mode = DegradationMode::kGaussian;
  double blur_sigma = 1.6;
  int64_t kernel_size = 13;
  int64_t scale = 4;

  void validate() const;

  bool operator==(const DegradationSpec&) const = default;
};

/// One `key = value` line and where it came from.
struct KvEntry {
  std::string value;
  int line = 0;
};

/// Parsed config text: ordered sections of ordered keys. Keys before any
/// section header live in section "". `#` and `;` start comments.
class KvDocument {
 public:
  static KvDocument parse(std::string_view text, std::string source = "<string>");
  static KvDocument load(const std::filesystem::path& path);

  const std::string& source() const { return source_; }
  bool has_section(const std::string& section) const;
  std::vector<std::string> sections() const;
  /// Keys of `section` in file order; empty when the section is absent.
  std::vector<std::string> keys(const std::string& section) const;
  const KvEntry* find(const std::string& section, const std::string& key) const;
  /// "source:line" for error messages.
  std::string where(const KvEntry& entry) const;

  void set(const std::string& section, const std::string& key, std::string value);
  /// Canonical text rendering; parse(render()) reproduces the document.
  std::string render() const;

 private:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, KvEntry>> entries;
  };
  Section* section_ptr(const std::string& name);
  const Section* section_ptr(const std::string& name) const;

  std::string source_;
  std::vector<Section> sections_;
};

// Reading a section rejects unknown keys and malformed values with a
// ConfigError of the form "file:line: message". Missing keys keep defaults.
ModelConfig model_config_from(const KvDocument& doc, const std::string& section = "model");
TrainConfig train_config_from(const KvDocument& doc, const std::string& section = "train");
DegradationSpec degradation_from(const KvDocument& doc, const std::string& section = "degradation");

/// Writes every field (defaults materialized) into `section`.
void write_section(KvDocument& doc, const std::string& section, const ModelConfig& cfg);
void write_section(KvDocument& doc, const std::string& section, const TrainConfig& cfg);
void write_section(KvDocument& doc, const std::string& section, const DegradationSpec& spec);

/// Sets one field by key; throws ConfigError("unknown key ...") otherwise.
void set_field(ModelConfig& cfg, const std::string& key, const std::string& value);
void set_field(TrainConfig& cfg, const std::string& key, const std::string& value);
void set_field(DegradationSpec& spec, const std::string& key, const std::string& value);

/// Single-section text of a config, e.g. "[model]\nscale = 4\n...".
std::string render(const ModelConfig& cfg, const std::string& section = "model");
std::string render(const TrainConfig& cfg, const std::string& section = "train");
std::string render(const DegradationSpec& spec, const std::string& section = "degradation");

}  // namespace iprrn
