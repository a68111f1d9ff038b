#include "iprrn/commands.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "iprrn/ablation.hpp"
#include "iprrn/config.hpp"
#include "iprrn/data.hpp"
#include "iprrn/errors.hpp"
#include "iprrn/manifest.hpp"
#include "iprrn/metrics.hpp"
#include "iprrn/model.hpp"
#include "iprrn/trainer.hpp"

namespace fs = std::filesystem;

namespace iprrn {

namespace {

struct Common {
  std::string config;
  std::string data_root;
  std::string out;
  std::optional<uint64_t> seed;
  std::string device = "cpu";
  bool force = false;
};

void require_device(const std::string& device) {
  if (device != "cpu") throw ConfigError("unsupported --device '" + device + "' (this build runs on cpu)");
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is required");
  if (!fs::is_directory(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

void check_sections(const KvDocument& doc, std::initializer_list<const char*> allowed) {
  for (const auto& s : doc.sections()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || s == a;
    if (!ok) throw ConfigError(doc.source() + ": unknown section [" + s + "]");
  }
}

/// Clips of `split`, or every clip when the manifest has none of that split.
std::vector<ClipRecord> load_split_or_all(const fs::path& root, const std::string& split, const DegradationSpec& spec) {
  const auto entries = read_manifest(root / kDatasetManifest);
  const bool any = std::any_of(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.split == split; });
  return load_dataset(root, any ? split : "", spec);
}

/// "mode=gaussian blur_sigma=1.6 ..." for single-line metadata.
std::string inline_spec(const DegradationSpec& spec) {
  KvDocument doc;
  write_section(doc, "degradation", spec);
  std::string line;
  for (const auto& key : doc.keys("degradation")) {
    if (!line.empty()) line += ' ';
    line += key + "=" + doc.find("degradation", key)->value;
  }
  return line;
}

bool non_empty_dir(const fs::path& p) { return fs::is_directory(p) && !fs::is_empty(p); }

// ---------------------------------------------------------------------------

int cmd_train(const Common& c, const std::string& split, std::ostream& out) {
  require_device(c.device);
  require_file(c.config, "--config");
  require_dir(c.data_root, "--data-root");
  if (c.out.empty()) throw ConfigError("--out is required");

  const auto doc = KvDocument::load(c.config);
  check_sections(doc, {"model", "train", "degradation"});
  auto model_cfg = model_config_from(doc);
  auto train_cfg = train_config_from(doc);
  const auto degradation = degradation_from(doc);
  if (c.seed) {
    train_cfg.seed = *c.seed;
    model_cfg.init_seed = *c.seed;
  }
  if (degradation.scale != model_cfg.scale) {
    throw ConfigError(doc.source() + ": [degradation] scale " + std::to_string(degradation.scale) +
                      " differs from [model] scale " + std::to_string(model_cfg.scale));
  }

  const fs::path out_dir(c.out);
  fs::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "train";
  manifest.seed = train_cfg.seed;
  manifest.started_at = utc_timestamp();
  manifest.input_hash = content_hash({c.config, c.data_root});
  write_section(manifest.config, "model", model_cfg);
  write_section(manifest.config, "train", train_cfg);
  write_section(manifest.config, "degradation", degradation);
  manifest.config.set("data", "root", c.data_root);
  manifest.config.set("data", "split", split);
  manifest.write(out_dir);

  const auto dataset = load_split_or_all(c.data_root, split, degradation);
  const fs::path log = out_dir / "train_log.csv";
  fs::remove(log);
  TrainOutputs outputs;
  outputs.log_csv = log;
  outputs.final_checkpoint = out_dir / "final.ckpt";
  outputs.diagnostic_dir = out_dir;
  outputs.on_epoch = [&](const EpochLog& row) {
    out << "epoch " << row.epoch << " loss " << row.loss << " lr " << row.lr << '\n';
  };
  train(dataset, model_cfg, train_cfg, outputs, degradation);

  manifest.finished_at = utc_timestamp();
  manifest.write(out_dir);
  return kExitOk;
}

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::vector<std::string> labels;
  std::string split = "test";
  std::string channel_mode = "Y";
  int64_t border_crop = 0;
  bool plot = false;
  bool debug_identity = false;
};

int cmd_eval(const Common& c, const EvalArgs& a, std::ostream& out) {
  require_device(c.device);
  require_dir(c.data_root, "--data-root");
  if (c.out.empty()) throw ConfigError("--out is required");
  if (a.checkpoints.empty() && !a.debug_identity) throw ConfigError("--checkpoint is required");
  for (const auto& p : a.checkpoints) require_file(p, "--checkpoint");
  if (!a.labels.empty() && a.labels.size() != a.checkpoints.size()) {
    throw ConfigError("--label must be given once per --checkpoint");
  }
  if (a.channel_mode != "Y" && a.channel_mode != "RGB") throw ConfigError("--channel-mode must be Y or RGB");
  const ChannelMode mode = a.channel_mode == "Y" ? ChannelMode::kY : ChannelMode::kRGB;

  std::vector<Checkpoint> ckpts;
  for (const auto& p : a.checkpoints) ckpts.push_back(load_checkpoint(p));
  DegradationSpec degradation = ckpts.empty() ? DegradationSpec{} : ckpts.front().degradation;
  if (!c.config.empty()) {
    require_file(c.config, "--config");
    const auto doc = KvDocument::load(c.config);
    check_sections(doc, {"model", "train", "degradation"});
    degradation = degradation_from(doc);
  }
  for (const auto& ck : ckpts) {
    if (ck.model_config.scale != degradation.scale) {
      throw ConfigError("checkpoint scale " + std::to_string(ck.model_config.scale) +
                        " does not match the data degradation scale " + std::to_string(degradation.scale));
    }
  }

  const fs::path out_dir(c.out);
  fs::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "eval";
  manifest.started_at = utc_timestamp();
  std::vector<fs::path> inputs{c.data_root};
  for (const auto& p : a.checkpoints) inputs.emplace_back(p);
  manifest.input_hash = content_hash(inputs);
  manifest.config.set("eval", "split", a.split);
  manifest.config.set("eval", "channel_mode", a.channel_mode);
  manifest.config.set("eval", "luma", kLumaConvention);
  manifest.config.set("eval", "border_crop", std::to_string(a.border_crop));
  manifest.config.set("eval", "debug_identity", a.debug_identity ? "true" : "false");
  for (size_t i = 0; i < a.checkpoints.size(); ++i) {
    manifest.config.set("eval", "checkpoint." + std::to_string(i + 1), a.checkpoints[i]);
  }
  write_section(manifest.config, "degradation", degradation);
  manifest.write(out_dir);

  const auto clips = load_split_or_all(c.data_root, a.split, degradation);
  const std::map<std::string, std::string> metadata{{"channel_mode", to_string(mode)},
                                                    {"luma", kLumaConvention},
                                                    {"border_crop", std::to_string(a.border_crop)},
                                                    {"degradation", inline_spec(degradation)}};

  std::vector<std::string> labels;
  std::vector<std::vector<MetricsReport>> per_label;
  if (a.debug_identity) {
    std::vector<MetricsReport> reports;
    for (const auto& clip : clips) reports.push_back(evaluate_sequence(clip.id, clip.hr, clip.hr, mode, a.border_crop));
    labels.emplace_back("identity");
    per_label.push_back(std::move(reports));
  }
  for (size_t i = 0; i < ckpts.size(); ++i) {
    const std::string label = a.labels.empty() ? fs::path(a.checkpoints[i]).stem().string() : a.labels[i];
    auto result = evaluate(ckpts[i].model, clips, mode, a.border_crop);
    for (size_t k = 0; k < clips.size(); ++k) write_clip(out_dir / "sr" / label / clips[k].id, result.sr[k]);
    labels.push_back(label);
    per_label.push_back(std::move(result.reports));
  }
  for (size_t i = 0; i < labels.size(); ++i) {
    write_metrics_csv(out_dir / ("metrics_" + labels[i] + ".csv"), per_label[i], metadata);
    for (const auto& r : per_label[i]) {
      out << labels[i] << ' ' << r.clip << " psnr " << r.mean_psnr << " ssim " << r.mean_ssim << " gap " << r.gap_psnr
          << '\n';
    }
  }
  if (a.plot) {
    for (size_t k = 0; k < clips.size(); ++k) {
      std::vector<PsnrSeries> series;
      for (size_t i = 0; i < labels.size(); ++i) series.push_back({labels[i], per_label[i][k].per_frame_psnr});
      plot_psnr_curves(out_dir / "plots" / (clips[k].id + ".png"), "PSNR per frame: " + clips[k].id, series);
    }
  }
  manifest.finished_at = utc_timestamp();
  manifest.write(out_dir);
  return kExitOk;
}

struct DegradeArgs {
  std::optional<int64_t> scale;
  std::optional<double> sigma;
  std::optional<int64_t> kernel_size;
  std::optional<std::string> mode;
};

int cmd_degrade(const Common& c, const DegradeArgs& a, std::ostream& out, std::ostream& err) {
  require_dir(c.data_root, "--data-root");
  if (c.out.empty()) throw ConfigError("--out is required");
  const fs::path hr_root(c.data_root), lr_root(c.out);
  if (non_empty_dir(lr_root) && !c.force) {
    throw ConfigError("output " + lr_root.string() + " already exists; pass --force to overwrite");
  }

  DegradationSpec spec;
  if (!c.config.empty()) {
    require_file(c.config, "--config");
    const auto doc = KvDocument::load(c.config);
    check_sections(doc, {"model", "train", "degradation"});
    spec = degradation_from(doc);
  }
  if (a.scale) spec.scale = *a.scale;
  if (a.sigma) spec.blur_sigma = *a.sigma;
  if (a.kernel_size) spec.kernel_size = *a.kernel_size;
  if (a.mode) set_field(spec, "mode", *a.mode);
  spec.validate();

  std::vector<ManifestEntry> entries;
  if (fs::is_regular_file(hr_root / kDatasetManifest)) {
    entries = read_manifest(hr_root / kDatasetManifest);
  } else {
    for (const auto& d : fs::directory_iterator(hr_root)) {
      if (d.is_directory()) entries.push_back({d.path().filename().string(), "all"});
    }
    std::sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) { return x.clip_id < y.clip_id; });
  }
  if (c.force && fs::exists(lr_root)) fs::remove_all(lr_root);
  fs::create_directories(lr_root);

  RunManifest manifest;
  manifest.command = "degrade";
  manifest.started_at = utc_timestamp();
  manifest.input_hash = content_hash({hr_root});
  write_section(manifest.config, "degradation", spec);
  manifest.config.set("data", "hr_root", hr_root.string());
  manifest.write(lr_root);

  std::vector<ManifestEntry> written;
  for (const auto& e : entries) {
    try {
      auto hr = read_clip(hr_root / e.clip_id);
      write_clip(lr_root / e.clip_id, degrade(hr, spec));
      written.push_back(e);
      out << "degraded " << e.clip_id << '\n';
    } catch (const InputError& ex) {
      err << "warning: skipping clip " << e.clip_id << ": " << ex.what() << '\n';
    }
  }
  write_manifest(lr_root / kDatasetManifest, written);
  manifest.finished_at = utc_timestamp();
  manifest.write(lr_root);
  if (written.empty()) {
    err << "error: no clip could be degraded\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_ablate(const Common& c, std::ostream& out) {
  require_device(c.device);
  require_file(c.config, "--config");
  require_dir(c.data_root, "--data-root");
  if (c.out.empty()) throw ConfigError("--out is required");
  const auto doc = KvDocument::load(c.config);
  auto plan = parse_ablation_plan(doc);
  if (c.seed) {
    for (auto& v : plan.variants) {
      v.train.seed = *c.seed;
      v.model.init_seed = *c.seed;
    }
  }
  const fs::path out_dir(c.out);
  fs::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "ablate";
  manifest.seed = c.seed.value_or(0);
  manifest.started_at = utc_timestamp();
  manifest.input_hash = content_hash({c.config, c.data_root});
  manifest.config = doc;
  manifest.write(out_dir);

  const auto train_set = load_split_or_all(c.data_root, "train", plan.degradation);
  const auto eval_set = load_split_or_all(c.data_root, "test", plan.degradation);
  const auto report = ablate(plan, train_set, eval_set, [&](const std::string& msg) { out << msg << '\n'; });
  report.write_csv(out_dir / "ablation.csv");
  {
    std::ofstream md(out_dir / "ablation.md");
    md << report.to_markdown();
  }
  out << report.to_markdown();
  manifest.finished_at = utc_timestamp();
  manifest.write(out_dir);
  const bool all_failed =
      std::all_of(report.rows.begin(), report.rows.end(), [](const AblationRow& r) { return !r.error.empty(); });
  return all_failed ? kExitFailure : kExitOk;
}

struct SynthArgs {
  std::string kind = "translating_texture";
  int64_t clips = 8;
  int64_t test_clips = 2;
  int64_t frames = 7;
  int64_t height = 64;
  int64_t width = 64;
};

int cmd_synth(const Common& c, const SynthArgs& a, std::ostream& out) {
  if (c.out.empty()) throw ConfigError("--out is required");
  if (a.clips < 1 || a.test_clips < 0 || a.test_clips > a.clips) throw ConfigError("need 0 <= --test-clips <= --clips");
  const fs::path root(c.out);
  if (non_empty_dir(root) && !c.force) {
    throw ConfigError("output " + root.string() + " already exists; pass --force to overwrite");
  }
  if (c.force && fs::exists(root)) fs::remove_all(root);
  SynthOptions o;
  o.kind = synth_kind_from(a.kind);
  o.frames = a.frames;
  o.height = a.height;
  o.width = a.width;
  const uint64_t seed = c.seed.value_or(0);

  RunManifest manifest;
  manifest.command = "synth";
  manifest.seed = seed;
  manifest.started_at = utc_timestamp();
  manifest.config.set("synth", "kind", a.kind);
  manifest.config.set("synth", "clips", std::to_string(a.clips));
  manifest.config.set("synth", "test_clips", std::to_string(a.test_clips));
  manifest.config.set("synth", "frames", std::to_string(a.frames));
  manifest.config.set("synth", "height", std::to_string(a.height));
  manifest.config.set("synth", "width", std::to_string(a.width));
  manifest.write(root);

  std::vector<ManifestEntry> entries;
  for (int64_t i = 0; i < a.clips; ++i) {
    o.seed = seed + static_cast<uint64_t>(i);
    std::ostringstream id;
    id << "clip" << std::setw(4) << std::setfill('0') << i;
    write_clip(root / id.str(), synth_sequence(o));
    entries.push_back({id.str(), i >= a.clips - a.test_clips ? "test" : "train"});
  }
  write_manifest(root / kDatasetManifest, entries);
  manifest.finished_at = utc_timestamp();
  manifest.write(root);
  out << "wrote " << a.clips << " clips to " << root.string() << '\n';
  return kExitOk;
}

void add_common(CLI::App* cmd, Common& c, bool with_config, bool with_seed) {
  if (with_config) cmd->add_option("--config", c.config, "Config file ([model] [train] [degradation])");
  cmd->add_option("--data-root", c.data_root, "Dataset root: <root>/<clip>/<frame>.png + manifest.txt");
  cmd->add_option("--out", c.out, "Output directory");
  if (with_seed) cmd->add_option("--seed", c.seed, "Overrides the training and init seeds");
  cmd->add_option("--device", c.device, "Compute device")->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"IPRRN video super-resolution: train, evaluate, degrade, ablate"};
  app.require_subcommand(1);
  Common common;

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd, common, true, true);
  std::string split = "train";
  train_cmd->add_option("--split", split, "Manifest split to train on")->capture_default_str();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate checkpoints on a dataset");
  add_common(eval_cmd, common, true, false);
  EvalArgs eval_args;
  eval_cmd->add_option("--checkpoint", eval_args.checkpoints, "Checkpoint file (repeatable)");
  eval_cmd->add_option("--label", eval_args.labels, "Series label per checkpoint");
  eval_cmd->add_option("--split", eval_args.split, "Manifest split to evaluate")->capture_default_str();
  eval_cmd->add_option("--channel-mode", eval_args.channel_mode, "Y or RGB")->capture_default_str();
  eval_cmd->add_option("--border-crop", eval_args.border_crop, "Pixels excluded per side")->capture_default_str();
  eval_cmd->add_flag("--per-frame-plot", eval_args.plot, "Write per-frame PSNR curves");
  eval_cmd->add_flag("--debug-identity", eval_args.debug_identity, "Score HR against itself");

  auto* degrade_cmd = app.add_subcommand("degrade", "Create LR frames from an HR tree");
  add_common(degrade_cmd, common, true, false);
  DegradeArgs degrade_args;
  degrade_cmd->add_option("--scale", degrade_args.scale, "Downsampling factor");
  degrade_cmd->add_option("--sigma", degrade_args.sigma, "Gaussian blur sigma");
  degrade_cmd->add_option("--kernel-size", degrade_args.kernel_size, "Gaussian kernel size (odd)");
  degrade_cmd->add_option("--mode", degrade_args.mode, "gaussian or bicubic");
  degrade_cmd->add_flag("--force", common.force, "Overwrite an existing output tree");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train and compare the variants of an ablation plan");
  add_common(ablate_cmd, common, false, true);
  ablate_cmd->add_option("--config,--plan", common.config, "Ablation plan file");

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
  SynthArgs synth_args;
  synth_cmd->add_option("--out", common.out, "Dataset root to create");
  synth_cmd->add_option("--seed", common.seed, "Base seed");
  synth_cmd->add_option("--kind", synth_args.kind, "translating_texture, rotating_pattern or random_smooth")
      ->capture_default_str();
  synth_cmd->add_option("--clips", synth_args.clips, "Number of clips")->capture_default_str();
  synth_cmd->add_option("--test-clips", synth_args.test_clips, "Clips assigned to the test split")
      ->capture_default_str();
  synth_cmd->add_option("--frames", synth_args.frames, "Frames per clip")->capture_default_str();
  synth_cmd->add_option("--height", synth_args.height, "HR height")->capture_default_str();
  synth_cmd->add_option("--width", synth_args.width, "HR width")->capture_default_str();
  synth_cmd->add_flag("--force", common.force, "Overwrite an existing output tree");

  std::vector<const char*> argv{"iprrn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(common, split, out);
    if (eval_cmd->parsed()) return cmd_eval(common, eval_args, out);
    if (degrade_cmd->parsed()) return cmd_degrade(common, degrade_args, out, err);
    if (ablate_cmd->parsed()) return cmd_ablate(common, out);
    if (synth_cmd->parsed()) return cmd_synth(common, synth_args, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace iprrn
