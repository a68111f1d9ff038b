#include "iprrn/ablation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "iprrn/errors.hpp"
#include "iprrn/model.hpp"
#include "iprrn/trainer.hpp"

namespace fs = std::filesystem;

namespace iprrn {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

void apply_setting(AblationVariant& v, const std::string& key, const std::string& value) {
  const auto dot = key.find('.');
  const std::string scope = dot == std::string::npos ? "" : key.substr(0, dot);
  const std::string field = dot == std::string::npos ? key : key.substr(dot + 1);
  if (scope == "model") {
    set_field(v.model, field, value);
  } else if (scope == "train") {
    set_field(v.train, field, value);
  } else {
    throw ConfigError("unknown key '" + key + "' (expected model.<key> or train.<key>)");
  }
  v.settings.emplace_back(key, value);
}

bool is_known_key(const std::string& scoped) {
  const auto dot = scoped.find('.');
  if (dot == std::string::npos) return false;
  KvDocument defaults;
  write_section(defaults, "model", ModelConfig{});
  write_section(defaults, "train", TrainConfig{});
  return defaults.find(scoped.substr(0, dot), scoped.substr(dot + 1)) != nullptr;
}

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return "inf";
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::string shortest(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc{} ? std::string(buf, end) : std::to_string(v);
}

}  // namespace

AblationPlan parse_ablation_plan(const KvDocument& doc) {
  for (const auto& section : doc.sections()) {
    const bool known = section == "plan" || section == "model" || section == "train" || section == "degradation" ||
                       section == "sweep" || section.rfind("variant.", 0) == 0;
    if (!known) {
      throw ConfigError(doc.source() + ": unknown section [" + section + "]");
    }
  }
  AblationPlan plan;
  for (const auto& key : doc.keys("plan")) {
    const auto* e = doc.find("plan", key);
    if (key == "name") {
      plan.name = e->value;
    } else if (key == "sort_by") {
      plan.sort_by = e->value;
    } else {
      throw ConfigError(doc.where(*e) + ": [plan] unknown key '" + key + "'");
    }
  }

  AblationVariant base;
  {
    // Base sections may omit max_epochs until a variant supplies it.
    for (const auto& key : doc.keys("model")) {
      const auto* e = doc.find("model", key);
      try {
        set_field(base.model, key, e->value);
      } catch (const ConfigError& err) {
        throw ConfigError(doc.where(*e) + ": [model] " + err.what());
      }
    }
    for (const auto& key : doc.keys("train")) {
      const auto* e = doc.find("train", key);
      try {
        set_field(base.train, key, e->value);
      } catch (const ConfigError& err) {
        throw ConfigError(doc.where(*e) + ": [train] " + err.what());
      }
    }
  }
  plan.degradation = degradation_from(doc, "degradation");

  const auto sweep_keys = doc.keys("sweep");
  if (sweep_keys.size() > 1) throw ConfigError(doc.source() + ": [sweep] takes exactly one key");
  if (!sweep_keys.empty()) {
    const auto& key = sweep_keys.front();
    const auto* e = doc.find("sweep", key);
    const auto values = split_list(e->value);
    if (values.empty()) throw ConfigError(doc.where(*e) + ": [sweep] '" + key + "' has no values");
    for (const auto& value : values) {
      AblationVariant v = base;
      v.name = key.substr(key.find('.') + 1) + "=" + value;
      try {
        apply_setting(v, key, value);
      } catch (const ConfigError& err) {
        throw ConfigError(doc.where(*e) + ": [sweep] " + err.what());
      }
      plan.variants.push_back(std::move(v));
    }
    if (plan.sort_by.empty()) plan.sort_by = key;
  }

  for (const auto& section : doc.sections()) {
    if (section.rfind("variant.", 0) != 0) continue;
    AblationVariant v = base;
    v.name = section.substr(8);
    for (const auto& key : doc.keys(section)) {
      const auto* e = doc.find(section, key);
      try {
        if (key == "init_from") {
          v.init_from = e->value;
        } else {
          apply_setting(v, key, e->value);
        }
      } catch (const ConfigError& err) {
        throw ConfigError(doc.where(*e) + ": [" + section + "] " + err.what());
      }
    }
    plan.variants.push_back(std::move(v));
  }
  if (plan.variants.empty()) throw ConfigError(doc.source() + ": plan defines no variants");

  for (size_t i = 0; i < plan.variants.size(); ++i) {
    auto& v = plan.variants[i];
    try {
      v.model.validate();
      v.train.validate();
    } catch (const ConfigError& err) {
      throw ConfigError(doc.source() + ": variant '" + v.name + "': " + err.what());
    }
    if (!v.init_from.empty()) {
      const bool earlier = std::any_of(plan.variants.begin(), plan.variants.begin() + static_cast<std::ptrdiff_t>(i),
                                       [&](const AblationVariant& o) { return o.name == v.init_from; });
      if (!earlier) {
        throw ConfigError(doc.source() + ": variant '" + v.name + "' init_from '" + v.init_from +
                          "' must name an earlier variant");
      }
    }
  }
  if (!plan.sort_by.empty() && !is_known_key(plan.sort_by)) {
    throw ConfigError(doc.source() + ": [plan] sort_by names unknown key '" + plan.sort_by + "'");
  }
  return plan;
}

AblationReport ablate(const AblationPlan& plan, const std::vector<ClipRecord>& train_set,
                      const std::vector<ClipRecord>& eval_set,
                      const std::function<void(const std::string&)>& progress) {
  AblationReport report;
  report.name = plan.name;
  for (const auto& v : plan.variants) {
    for (const auto& [key, _] : v.settings) {
      if (std::find(report.setting_columns.begin(), report.setting_columns.end(), key) ==
          report.setting_columns.end()) {
        report.setting_columns.push_back(key);
      }
    }
  }

  std::map<std::string, IPRRN> trained;
  for (const auto& v : plan.variants) {
    if (progress) progress("variant " + v.name);
    AblationRow row;
    row.variant = v.name;
    row.settings = v.settings;
    try {
      row.params = count_params(v.model);
      Trainer trainer(v.model, v.train, plan.degradation);
      if (!v.init_from.empty()) {
        auto source = trained.find(v.init_from);
        if (source == trained.end()) throw ConfigError("init_from variant '" + v.init_from + "' did not train");
        torch::NoGradGuard no_grad;
        auto from = source->second->rrnet->named_parameters();
        for (auto& p : trainer.model()->rrnet->named_parameters()) {
          if (const auto* src = from.find(p.key()); src != nullptr && src->sizes().equals(p.value().sizes())) {
            p.value().copy_(*src);
          }
        }
      }
      train(trainer, train_set);
      auto result = evaluate(trainer.model(), eval_set);
      double psnr = 0, ssim = 0, first = 0, gap = 0;
      for (const auto& r : result.reports) {
        psnr += r.mean_psnr;
        ssim += r.mean_ssim;
        first += r.per_frame_psnr.front();
        gap += r.gap_psnr;
      }
      const auto n = static_cast<double>(result.reports.size());
      row.psnr = psnr / n;
      row.ssim = ssim / n;
      row.first_frame_psnr = first / n;
      row.gap_psnr = gap / n;
      row.ms_per_frame = result.ms_per_frame;
      trained.emplace(v.name, trainer.model());
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }

  if (!plan.sort_by.empty()) {
    const auto value_of = [&](const AblationRow& r) {
      for (const auto& [k, v] : r.settings) {
        if (k == plan.sort_by) {
          double d = 0;
          auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
          return ec == std::errc{} ? d : 0.0;
        }
      }
      return -std::numeric_limits<double>::infinity();
    };
    std::stable_sort(report.rows.begin(), report.rows.end(),
                     [&](const AblationRow& a, const AblationRow& b) { return value_of(a) < value_of(b); });
  }
  return report;
}

std::string AblationReport::to_markdown() const {
  std::ostringstream md;
  md << "### " << name << "\n\n| Variant |";
  for (const auto& c : setting_columns) md << ' ' << c << " |";
  md << " PSNR(dB)/SSIM | First-frame PSNR(dB) | Gap PSNR(dB) | Params(M) | Time(ms) |\n|---|";
  for (size_t i = 0; i < setting_columns.size(); ++i) md << "---|";
  md << "---|---|---|---|---|\n";
  for (const auto& r : rows) {
    md << "| " << r.variant << " |";
    for (const auto& c : setting_columns) {
      std::string value = "-";
      for (const auto& [k, v] : r.settings) {
        if (k == c) value = v;
      }
      md << ' ' << value << " |";
    }
    if (!r.error.empty()) {
      md << " failed: " << r.error << " | - | - | " << fixed(static_cast<double>(r.params) / 1e6, 2) << " | - |\n";
      continue;
    }
    md << ' ' << fixed(r.psnr, 2) << " / " << fixed(r.ssim, 4) << " | " << fixed(r.first_frame_psnr, 2) << " | "
       << fixed(r.gap_psnr, 2) << " | " << fixed(static_cast<double>(r.params) / 1e6, 2) << " | "
       << fixed(r.ms_per_frame, 1) << " |\n";
  }
  return md.str();
}

void AblationReport::write_csv(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "variant";
  for (const auto& c : setting_columns) out << ',' << c;
  out << ",psnr,ssim,first_frame_psnr,gap_psnr,params,ms_per_frame,error\n";
  for (const auto& r : rows) {
    out << r.variant;
    for (const auto& c : setting_columns) {
      std::string value;
      for (const auto& [k, v] : r.settings) {
        if (k == c) value = v;
      }
      out << ',' << value;
    }
    std::string error = r.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << ',' << shortest(r.psnr) << ',' << shortest(r.ssim) << ',' << shortest(r.first_frame_psnr) << ','
        << shortest(r.gap_psnr) << ',' << r.params << ',' << shortest(r.ms_per_frame) << ',' << error << '\n';
  }
}

}  // namespace iprrn
