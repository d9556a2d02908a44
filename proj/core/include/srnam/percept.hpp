#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "srnam/image_tensor.hpp"

namespace srnam::percept {

/// Frozen convolutional feature network tapped at the end of several stages.
///
/// Implementations must be immutable after construction: `extract` is called
/// concurrently from training and evaluation code.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  /// One feature map per tap for a (B, 3, H, W) batch in [-1, 1].
  /// Differentiable with respect to the input.
  virtual std::vector<torch::Tensor> extract(const torch::Tensor& batch) const = 0;

  virtual size_t tap_count() const = 0;
  virtual std::string backend() const = 0;
  virtual torch::Dtype dtype() const = 0;
};

struct RandomFeatureOptions {
  uint64_t seed = 0;
  int64_t stages = 4;
  int64_t base_width = 8;
  torch::Dtype dtype = torch::kFloat;
};

/// Stride-2 3x3 conv + LeakyReLU stages with fixed-seed random weights; the
/// width doubles every stage. Every stage is tapped.
class RandomFeatureExtractor final : public FeatureExtractor {
 public:
  explicit RandomFeatureExtractor(const RandomFeatureOptions& options);

  std::vector<torch::Tensor> extract(const torch::Tensor& batch) const override;
  size_t tap_count() const override { return stages_.size(); }
  std::string backend() const override { return "random"; }
  torch::Dtype dtype() const override { return dtype_; }

  /// Read-only access for tests that re-derive features by hand.
  const std::vector<torch::nn::Conv2d>& stages() const noexcept { return stages_; }

 private:
  std::vector<torch::nn::Conv2d> stages_;
  torch::Dtype dtype_;
};

struct VggOptions {
  /// State dict produced by `torch.save(vgg19().state_dict(), path)`.
  /// Empty means keep deterministic random weights (useful for shape tests).
  std::filesystem::path weights;
  /// Pooling stages (0-based, at most 4) whose output is tapped.
  std::vector<int64_t> taps = {0, 1, 2, 3};
  uint64_t seed = 0;
  torch::Dtype dtype = torch::kFloat;
};

/// VGG-19 convolutional trunk with ImageNet input normalization. Parameter
/// names follow torchvision (`features.<index>.weight`).
class VggFeatureExtractor final : public FeatureExtractor {
 public:
  explicit VggFeatureExtractor(const VggOptions& options);

  std::vector<torch::Tensor> extract(const torch::Tensor& batch) const override;
  size_t tap_count() const override { return taps_.size(); }
  std::string backend() const override { return "pretrained"; }
  torch::Dtype dtype() const override { return dtype_; }

 private:
  struct Layer {
    int64_t index;
    torch::nn::Conv2d conv{nullptr};  // null for a pooling layer
  };
  std::vector<Layer> layers_;
  std::vector<int64_t> taps_;
  torch::Dtype dtype_;
};

struct PerceptConfig {
  std::string backend = "random";  // "random" | "pretrained"
  uint64_t seed = 0;
  int64_t width = 8;
  int64_t stages = 4;
  std::filesystem::path weights;
  torch::Dtype dtype = torch::kFloat;
};

std::shared_ptr<const FeatureExtractor> make_feature_extractor(const PerceptConfig& config);

/// Sum over taps of the per-element mean absolute feature difference.
/// Batched and differentiable; inputs of any dtype are cast to the extractor's.
torch::Tensor perceptual_distance(const FeatureExtractor& fx, const torch::Tensor& a,
                                  const torch::Tensor& b);

/// Image-level API, restricted to 64x64 inputs.
std::vector<torch::Tensor> features(const FeatureExtractor& fx, const ImageTensor& x);
double perceptual_distance(const FeatureExtractor& fx, const ImageTensor& a, const ImageTensor& b);

}  // namespace srnam::percept
