#include "srnam/checkpoint.hpp"

#include <cstdio>

#include "srnam/adam.hpp"
#include "srnam/errors.hpp"

namespace srnam {

void AdamSettings::validate() const {
  if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
      !(epsilon > 0.0)) {
    throw ValueError("invalid Adam settings");
  }
}

namespace checkpoint {

void save_module(const torch::nn::Module& module, const std::filesystem::path& path) {
  torch::serialize::OutputArchive archive;
  module.save(archive);
  archive.save_to(path.string());
}

void load_module(torch::nn::Module& module, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw CheckpointError("missing weight file " + path.string());
  }
  try {
    torch::serialize::InputArchive archive;
    archive.load_from(path.string());
    module.load(archive);
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot load " + path.string() + ": " + e.what_without_backtrace());
  }
}

void freeze(torch::nn::Module& module) {
  for (auto& p : module.parameters()) p.set_requires_grad(false);
  module.eval();
}

std::string dtype_name(torch::Dtype dtype) {
  if (dtype == torch::kFloat) return "float32";
  if (dtype == torch::kDouble) return "float64";
  throw ValueError("unsupported dtype");
}

torch::Dtype dtype_from_name(const std::string& name) {
  if (name == "float32") return torch::kFloat;
  if (name == "float64") return torch::kDouble;
  throw CheckpointError("unsupported dtype '" + name + "'");
}

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

}  // namespace checkpoint
}  // namespace srnam
