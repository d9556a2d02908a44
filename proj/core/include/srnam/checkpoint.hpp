#pragma once

#include <filesystem>
#include <string>

#include <torch/torch.h>

namespace srnam::checkpoint {

/// Version tag written into every manifest and checked on load.
inline constexpr int kFormatVersion = 1;

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kWeightsFile = "weights.pt";
inline constexpr const char* kLossHistoryFile = "loss_history.csv";

/// Serializes all parameters and buffers of `module`.
void save_module(const torch::nn::Module& module, const std::filesystem::path& path);

/// Loads parameters saved by save_module. Throws CheckpointError when the
/// file is missing or the parameter set does not match.
void load_module(torch::nn::Module& module, const std::filesystem::path& path);

/// Marks every parameter as not requiring gradients.
void freeze(torch::nn::Module& module);

/// "float32" / "float64".
std::string dtype_name(torch::Dtype dtype);
torch::Dtype dtype_from_name(const std::string& name);

/// Formats a loss value for CSV output (round-trippable, locale-free).
std::string format_real(double value);

}  // namespace srnam::checkpoint
