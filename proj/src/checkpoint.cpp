#include <string>

#include "iprrn/errors.hpp"
#include "iprrn/trainer.hpp"

namespace fs = std::filesystem;

namespace iprrn {

namespace {

std::string read_string(torch::serialize::InputArchive& archive, const std::string& key, const fs::path& path) {
  c10::IValue value;
  if (!archive.try_read(key, value) || !value.isString()) {
    throw InputError(path.string() + ": checkpoint field '" + key + "' is missing");
  }
  return value.toStringRef();
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  if (!ckpt.model) throw ConfigError("checkpoint has no model");
  KvDocument config;
  write_section(config, "model", ckpt.model_config);
  write_section(config, "train", ckpt.train_config);
  write_section(config, "degradation", ckpt.degradation);

  torch::serialize::OutputArchive archive;
  archive.write("format", c10::IValue(std::string(kCheckpointFormat)));
  archive.write("config", c10::IValue(config.render()));
  archive.write("epoch", c10::IValue(ckpt.epoch));
  archive.write("rng_state", c10::IValue(ckpt.rng_state));

  torch::serialize::OutputArchive model_archive;
  ckpt.model->save(model_archive);
  archive.write("model", model_archive);
  if (ckpt.optimizer) {
    torch::serialize::OutputArchive optim_archive;
    ckpt.optimizer->save(optim_archive);
    archive.write("optimizer", optim_archive);
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  archive.save_to(path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw InputError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw InputError(path.string() + ": not a readable checkpoint");
  }
  if (read_string(archive, "format", path) != kCheckpointFormat) {
    throw InputError(path.string() + ": unsupported checkpoint format");
  }
  const auto config = KvDocument::parse(read_string(archive, "config", path), path.string() + "#config");

  Checkpoint ckpt;
  ckpt.model_config = model_config_from(config, "model");
  // max_epochs is validated when training resumes, not for inference.
  TrainConfig train_cfg;
  for (const auto& key : config.keys("train")) set_field(train_cfg, key, config.find("train", key)->value);
  ckpt.train_config = train_cfg;
  ckpt.degradation = degradation_from(config, "degradation");
  c10::IValue epoch;
  archive.read("epoch", epoch);
  ckpt.epoch = epoch.toInt();
  ckpt.rng_state = read_string(archive, "rng_state", path);

  ckpt.model = IPRRN(ckpt.model_config);
  torch::serialize::InputArchive model_archive;
  archive.read("model", model_archive);
  ckpt.model->load(model_archive);

  torch::serialize::InputArchive optim_archive;
  if (archive.try_read("optimizer", optim_archive)) {
    ckpt.optimizer = std::make_shared<torch::optim::Adam>(
        ckpt.model->parameters(),
        torch::optim::AdamOptions(train_cfg.lr).betas({train_cfg.beta1, train_cfg.beta2}));
    ckpt.optimizer->load(optim_archive);
  }
  return ckpt;
}

}  // namespace iprrn
