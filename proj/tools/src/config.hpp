#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "srnam/degrader.hpp"
#include "srnam/hrgen.hpp"
#include "srnam/imagedata.hpp"
#include "srnam/naminvert.hpp"

namespace srnam::cli {

/// Invalid configuration; the message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Either a manifest on disk or a procedurally generated set.
struct DataSpec {
  std::optional<std::filesystem::path> manifest;
  int64_t synthetic_count = 0;
  uint64_t synthetic_seed = 0;

  bool configured() const noexcept { return manifest.has_value() || synthetic_count > 0; }
};

struct RunConfig {
  uint64_t seed = 0;
  std::filesystem::path out = "runs/default";
  int64_t threads = 1;
  int64_t log_every = 0;

  DataSpec hr;
  DataSpec lr;

  degrader::DegraderTrainConfig degrader;
  std::optional<std::filesystem::path> degrader_checkpoint;

  hrgen::ProgressiveTrainConfig hrgen;
  std::optional<std::filesystem::path> generator_checkpoint;

  naminvert::InversionOptions invert;
  uint64_t noise_seed = 0;

  std::string landmark_backend = "synthetic";
  double landmark_sigma = 1.5;

  std::filesystem::path degrader_dir() const;
  std::filesystem::path generator_dir() const;
};

/// Flat `key -> value` assignments in application order.
using Assignments = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines; `#` starts a comment. Keys may repeat, the
/// last assignment wins.
Assignments read_config_file(const std::filesystem::path& path);

/// Splits `key=value`. Throws ConfigError on a malformed pair.
std::pair<std::string, std::string> split_assignment(const std::string& text);

/// Builds and validates a RunConfig. `seed` is applied first so that module
/// seeds not set explicitly derive from it. Unknown keys, malformed values
/// and missing referenced paths are ConfigErrors.
RunConfig build_config(const Assignments& assignments);

/// Every key build_config understands, sorted.
std::vector<std::string> known_keys();

imagedata::Dataset resolve_dataset(const DataSpec& spec, imagedata::Role role, const char* key);

}  // namespace srnam::cli
