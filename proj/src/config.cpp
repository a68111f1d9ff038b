#include "iprrn/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "iprrn/errors.hpp"

namespace iprrn {

std::string to_string(Backbone b) { return b == Backbone::kDense ? "rdb" : "resblock"; }

std::string to_string(DegradationMode m) { return m == DegradationMode::kGaussian ? "gaussian" : "bicubic"; }

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc{} ? std::string(buf, end) : std::to_string(v);
}

// Each parser throws ConfigError with a bare message; callers prefix the
// location.
void parse_value(const std::string& text, int64_t& out) {
  int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw ConfigError("expected an integer, got '" + text + "'");
  out = v;
}

void parse_value(const std::string& text, uint64_t& out) {
  uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("expected a non-negative integer, got '" + text + "'");
  }
  out = v;
}

void parse_value(const std::string& text, double& out) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw ConfigError("expected a number, got '" + text + "'");
  out = v;
}

void parse_value(const std::string& text, bool& out) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") {
    out = true;
  } else if (text == "false" || text == "0" || text == "off" || text == "no") {
    out = false;
  } else {
    throw ConfigError("expected true/false, got '" + text + "'");
  }
}

void parse_value(const std::string& text, Backbone& out) {
  if (text == "rdb") {
    out = Backbone::kDense;
  } else if (text == "resblock") {
    out = Backbone::kResidual;
  } else {
    throw ConfigError("expected rdb or resblock, got '" + text + "'");
  }
}

void parse_value(const std::string& text, DegradationMode& out) {
  if (text == "gaussian") {
    out = DegradationMode::kGaussian;
  } else if (text == "bicubic") {
    out = DegradationMode::kBicubic;
  } else {
    throw ConfigError("expected gaussian or bicubic, got '" + text + "'");
  }
}

std::string format_value(int64_t v) { return std::to_string(v); }
std::string format_value(uint64_t v) { return std::to_string(v); }
std::string format_value(double v) { return format_double(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(Backbone v) { return to_string(v); }
std::string format_value(DegradationMode v) { return to_string(v); }

// The single list of fields per config type; parsing, rendering and
// overrides all walk it.
template <class Cfg, class Visitor>
void visit_fields(Cfg& c, Visitor&& v) {
  if constexpr (std::is_same_v<std::remove_const_t<Cfg>, ModelConfig>) {
    v("scale", c.scale);
    v("channels", c.channels);
    v("ipnet_frames", c.ipnet_frames);
    v("shallow_per_frame", c.shallow_per_frame);
    v("ipnet_width", c.ipnet_width);
    v("ipnet_res_blocks", c.ipnet_res_blocks);
    v("se_enabled", c.se_enabled);
    v("se_reduction", c.se_reduction);
    v("backbone", c.backbone);
    v("width", c.width);
    v("n_blocks", c.n_blocks);
    v("rdb_growth", c.rdb_growth);
    v("hidden_temporal", c.hidden_temporal);
    v("hidden_spatial", c.hidden_spatial);
    v("init_seed", c.init_seed);
  } else if constexpr (std::is_same_v<std::remove_const_t<Cfg>, TrainConfig>) {
    v("batch_size", c.batch_size);
    v("lr", c.lr);
    v("beta1", c.beta1);
    v("beta2", c.beta2);
    v("decay_factor", c.decay_factor);
    v("decay_every", c.decay_every);
    v("max_epochs", c.max_epochs);
    v("seq_len", c.seq_len);
    v("hr_patch", c.hr_patch);
    v("dataset_repeat", c.dataset_repeat);
    v("grad_clip", c.grad_clip);
    v("seed", c.seed);
  } else {
    v("mode", c.mode);
    v("blur_sigma", c.blur_sigma);
    v("kernel_size", c.kernel_size);
    v("scale", c.scale);
  }
}

template <class Cfg>
void set_field_impl(Cfg& cfg, const std::string& key, const std::string& value) {
  bool found = false;
  visit_fields(cfg, [&](const char* name, auto& field) {
    if (key == name) {
      parse_value(value, field);
      found = true;
    }
  });
  if (!found) throw ConfigError("unknown key '" + key + "'");
}

template <class Cfg>
Cfg config_from(const KvDocument& doc, const std::string& section) {
  Cfg cfg;
  for (const auto& key : doc.keys(section)) {
    const KvEntry* entry = doc.find(section, key);
    try {
      set_field_impl(cfg, key, entry->value);
    } catch (const ConfigError& e) {
      throw ConfigError(doc.where(*entry) + ": [" + section + "] " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(doc.source() + ": [" + section + "] " + e.what());
  }
  return cfg;
}

template <class Cfg>
void write_section_impl(KvDocument& doc, const std::string& section, const Cfg& cfg) {
  visit_fields(cfg, [&](const char* name, const auto& field) { doc.set(section, name, format_value(field)); });
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void ModelConfig::validate() const {
  require(scale >= 1, "scale must be >= 1");
  require(channels >= 1, "channels must be >= 1");
  require(ipnet_frames >= 0, "ipnet_frames must be >= 0 (0 disables IPNet)");
  require(shallow_per_frame >= 1, "shallow_per_frame must be >= 1");
  require(ipnet_width >= 1, "ipnet_width must be >= 1");
  require(ipnet_res_blocks >= 0, "ipnet_res_blocks must be >= 0");
  require(se_reduction >= 1, "se_reduction must be >= 1");
  require(width >= 1, "width must be >= 1");
  require(n_blocks >= 0, "n_blocks must be >= 0");
  require(rdb_growth >= 1, "rdb_growth must be >= 1");
  require(hidden_temporal >= 1, "hidden_temporal must be >= 1");
  require(hidden_spatial == scale * scale * channels,
          "hidden_spatial must equal scale^2 * channels (" + std::to_string(scale * scale * channels) + "), got " +
              std::to_string(hidden_spatial));
  if (ipnet_enabled() && se_enabled) {
    const int64_t c = shallow_width();
    const int64_t r = c < se_reduction ? c : se_reduction;
    require(c % r == 0, "se_reduction " + std::to_string(se_reduction) + " does not divide shallow width " +
                            std::to_string(c));
  }
}

void TrainConfig::validate() const {
  require(batch_size >= 1, "batch_size must be >= 1");
  require(lr > 0.0, "lr must be positive");
  require(beta1 > 0.0 && beta1 < 1.0, "beta1 must be in (0,1)");
  require(beta2 > 0.0 && beta2 < 1.0, "beta2 must be in (0,1)");
  require(decay_factor > 0.0, "decay_factor must be positive");
  require(decay_every >= 1, "decay_every must be >= 1");
  require(max_epochs >= 1, "max_epochs is required and must be >= 1");
  require(seq_len >= 1, "seq_len must be >= 1");
  require(hr_patch >= 1, "hr_patch must be >= 1");
  require(dataset_repeat >= 1, "dataset_repeat must be >= 1");
  require(grad_clip >= 0.0, "grad_clip must be >= 0");
}

void DegradationSpec::validate() const {
  require(scale >= 1, "scale must be >= 1");
  if (mode == DegradationMode::kGaussian) {
    require(blur_sigma > 0.0, "blur_sigma must be positive");
    require(kernel_size % 2 == 1, "kernel_size must be odd");
    const auto min_size = 2 * static_cast<int64_t>(std::ceil(3.0 * blur_sigma)) + 1;
    require(kernel_size >= min_size, "kernel_size must be >= " + std::to_string(min_size) + " for blur_sigma " +
                                         format_double(blur_sigma));
  }
}

// ---------------------------------------------------------------------------
// KvDocument

KvDocument KvDocument::parse(std::string_view text, std::string source) {
  KvDocument doc;
  doc.source_ = std::move(source);
  std::string current;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view raw = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    const auto comment = raw.find_first_of("#;");
    std::string line = trim(raw.substr(0, comment));
    if (line.empty()) {
      if (eol == text.size()) break;
      continue;
    }
    const std::string here = doc.source_ + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(here + ": unterminated section header");
      current = trim(std::string_view(line).substr(1, line.size() - 2));
      if (current.empty()) throw ConfigError(here + ": empty section name");
      if (doc.section_ptr(current) == nullptr) doc.sections_.push_back({current, {}});
    } else {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(here + ": expected 'key = value'");
      std::string key = trim(std::string_view(line).substr(0, eq));
      std::string value = trim(std::string_view(line).substr(eq + 1));
      if (key.empty()) throw ConfigError(here + ": empty key");
      if (doc.find(current, key) != nullptr) {
        throw ConfigError(here + ": duplicate key '" + key + "' in [" + current + "]");
      }
      if (doc.section_ptr(current) == nullptr) doc.sections_.push_back({current, {}});
      doc.section_ptr(current)->entries.emplace_back(std::move(key), KvEntry{std::move(value), line_no});
    }
    if (eol == text.size()) break;
  }
  return doc;
}

KvDocument KvDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

KvDocument::Section* KvDocument::section_ptr(const std::string& name) {
  for (auto& s : sections_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const KvDocument::Section* KvDocument::section_ptr(const std::string& name) const {
  for (const auto& s : sections_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

bool KvDocument::has_section(const std::string& section) const { return section_ptr(section) != nullptr; }

std::vector<std::string> KvDocument::sections() const {
  std::vector<std::string> out;
  for (const auto& s : sections_) out.push_back(s.name);
  return out;
}

std::vector<std::string> KvDocument::keys(const std::string& section) const {
  std::vector<std::string> out;
  if (const auto* s = section_ptr(section)) {
    for (const auto& [k, _] : s->entries) out.push_back(k);
  }
  return out;
}

const KvEntry* KvDocument::find(const std::string& section, const std::string& key) const {
  const auto* s = section_ptr(section);
  if (s == nullptr) return nullptr;
  for (const auto& [k, e] : s->entries) {
    if (k == key) return &e;
  }
  return nullptr;
}

std::string KvDocument::where(const KvEntry& entry) const { return source_ + ":" + std::to_string(entry.line); }

void KvDocument::set(const std::string& section, const std::string& key, std::string value) {
  auto* s = section_ptr(section);
  if (s == nullptr) {
    sections_.push_back({section, {}});
    s = &sections_.back();
  }
  for (auto& [k, e] : s->entries) {
    if (k == key) {
      e.value = std::move(value);
      return;
    }
  }
  s->entries.emplace_back(key, KvEntry{std::move(value), 0});
}

std::string KvDocument::render() const {
  std::string out;
  bool first = true;
  for (const auto& s : sections_) {
    if (!s.name.empty()) {
      if (!first) out += '\n';
      out += "[" + s.name + "]\n";
    }
    for (const auto& [k, e] : s.entries) out += k + " = " + e.value + "\n";
    first = false;
  }
  return out;
}

// ---------------------------------------------------------------------------

ModelConfig model_config_from(const KvDocument& doc, const std::string& section) {
  return config_from<ModelConfig>(doc, section);
}

TrainConfig train_config_from(const KvDocument& doc, const std::string& section) {
  return config_from<TrainConfig>(doc, section);
}

DegradationSpec degradation_from(const KvDocument& doc, const std::string& section) {
  return config_from<DegradationSpec>(doc, section);
}

void write_section(KvDocument& doc, const std::string& section, const ModelConfig& cfg) {
  write_section_impl(doc, section, cfg);
}
void write_section(KvDocument& doc, const std::string& section, const TrainConfig& cfg) {
  write_section_impl(doc, section, cfg);
}
void write_section(KvDocument& doc, const std::string& section, const DegradationSpec& spec) {
  write_section_impl(doc, section, spec);
}

void set_field(ModelConfig& cfg, const std::string& key, const std::string& value) {
  set_field_impl(cfg, key, value);
}
void set_field(TrainConfig& cfg, const std::string& key, const std::string& value) {
  set_field_impl(cfg, key, value);
}
void set_field(DegradationSpec& spec, const std::string& key, const std::string& value) {
  set_field_impl(spec, key, value);
}

std::string render(const ModelConfig& cfg, const std::string& section) {
  KvDocument doc;
  write_section(doc, section, cfg);
  return doc.render();
}

std::string render(const TrainConfig& cfg, const std::string& section) {
  KvDocument doc;
  write_section(doc, section, cfg);
  return doc.render();
}

std::string render(const DegradationSpec& spec, const std::string& section) {
  KvDocument doc;
  write_section(doc, section, spec);
  return doc.render();
}

}  // namespace iprrn
