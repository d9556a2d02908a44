#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace srnam::cli {

struct DegradeArgs {
  std::filesystem::path hr_image;
  std::optional<uint64_t> noise_seed;
  int64_t count = 1;
};

struct InvertArgs {
  std::vector<std::filesystem::path> lr_images;
  bool grid = false;
};

struct EvalArgs {
  std::filesystem::path solutions_dir;
  std::filesystem::path reference_dir;
  std::optional<std::filesystem::path> csv;
};

struct SynthArgs {
  std::string role = "hr";
  int64_t count = 0;
  std::optional<uint64_t> seed;
  std::optional<std::filesystem::path> dest;
};

// Each command returns the process exit status on success and throws on
// failure; main() maps exception types to exit codes.
int cmd_train_degrader(const RunConfig& config, bool force);
int cmd_train_generator(const RunConfig& config, bool force);
int cmd_degrade(const RunConfig& config, const DegradeArgs& args);
int cmd_invert(const RunConfig& config, const InvertArgs& args);
int cmd_eval(const RunConfig& config, const EvalArgs& args);
int cmd_synth(const RunConfig& config, const SynthArgs& args);

}  // namespace srnam::cli
