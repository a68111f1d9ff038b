#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "iprrn/config.hpp"

namespace iprrn {

inline constexpr const char* kRunManifest = "run_manifest.ini";

/// SHA-1 of "blob <size>\0<content>", as git computes object ids.
std::string git_blob_hash(const std::filesystem::path& file);

/// SHA-1 over sorted "<relative path> <blob hash>" lines of every regular
/// file under the given files/directories (manifest files excluded).
std::string content_hash(const std::vector<std::filesystem::path>& inputs);

/// UTC, ISO 8601.
std::string utc_timestamp();

/// The one manifest written into every command's output directory: the
/// command, its fully materialized configuration and a hash of its inputs.
struct RunManifest {
  std::string command;
  uint64_t seed = 0;
  std::string input_hash;
  std::string started_at;
  std::string finished_at;
  KvDocument config;  // resolved sections, defaults included

  std::string render() const;
  void write(const std::filesystem::path& out_dir) const;
};

}  // namespace iprrn
