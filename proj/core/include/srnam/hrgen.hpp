#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "srnam/adam.hpp"
#include "srnam/image_tensor.hpp"
#include "srnam/imagedata.hpp"

namespace srnam::hrgen {

inline constexpr int64_t kLatentDim = 512;
inline constexpr int64_t kMaxStage = 4;  // 4 * 2^4 = 64

/// Resolution produced at `stage`: 4 * 2^stage.
constexpr int64_t stage_resolution(int64_t stage) noexcept { return int64_t{4} << stage; }

/// 512-d generator input.
class LatentCode {
 public:
  /// Throws ShapeError unless 1-d of length 512, ValueError if non-finite.
  explicit LatentCode(torch::Tensor values);
  static LatentCode sample(uint64_t seed);
  const torch::Tensor& values() const noexcept { return values_; }

 private:
  torch::Tensor values_;
};

struct GrowthSchedule {
  std::vector<int64_t> resolutions = {4, 8, 16, 32, 64};
  std::vector<int64_t> epochs = {10, 20, 20, 20, 50};
  std::vector<int64_t> batch_sizes = {64, 64, 64, 32, 16};
  double fade_fraction = 0.5;

  /// Equal lengths, starts at 4, strictly doubling, at most 64,
  /// positive epochs and batch sizes, fade_fraction in [0, 1].
  void validate() const;
  int64_t stages() const noexcept { return static_cast<int64_t>(resolutions.size()); }
};

/// alpha = 0 -> low, alpha = 1 -> high, linear in between.
torch::Tensor fade_blend(const torch::Tensor& low, const torch::Tensor& high, double alpha);
ImageTensor fade_blend(const ImageTensor& low, const ImageTensor& high, double alpha);

/// 2x nearest-neighbour up-sampling.
torch::Tensor upsample2x(const torch::Tensor& x);

struct ProgressiveArch {
  int64_t latent_dim = kLatentDim;
  /// Feature channels of the block producing stage s; one entry per stage.
  std::vector<int64_t> widths = {512, 512, 256, 128, 64};
  bool normalize_latent = true;
  uint64_t seed = 0;  // block s is initialised from mix_seed(seed, s)
  bool operator==(const ProgressiveArch&) const = default;
  void validate() const;
};

/// Generator output at one stage with both fade branches exposed.
struct GeneratorBranches {
  torch::Tensor low;   // previous stage RGB up-sampled 2x (undefined at stage 0)
  torch::Tensor high;  // current stage RGB
};

/// Progressively grown generator. Stage 0 maps the latent to 4x4 features;
/// every later stage up-samples 2x and applies two 3x3 convs. Each stage has
/// its own 1x1 toRGB head followed by tanh.
struct ProgressiveGeneratorImpl : torch::nn::Module {
  explicit ProgressiveGeneratorImpl(const ProgressiveArch& arch, int64_t stage = 0);

  /// Adds the next block and toRGB head. Existing parameters are untouched.
  void grow();
  int64_t stage() const noexcept { return stage_; }

  GeneratorBranches branches(const torch::Tensor& z, int64_t stage);

  /// (B, latent) -> (B, 3, R, R), R = 4 * 2^stage; fades when alpha < 1.
  torch::Tensor forward(const torch::Tensor& z, int64_t stage, double alpha = 1.0);

  ProgressiveArch arch;

 private:
  torch::Tensor features(const torch::Tensor& z, int64_t stage);
  torch::Tensor to_rgb(const torch::Tensor& h, int64_t stage);

  int64_t stage_;
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::ModuleList to_rgb_{nullptr};
};
TORCH_MODULE(ProgressiveGenerator);

/// Mirror image of the generator: fromRGB heads feed blocks that halve the
/// resolution; stage 0 ends in a fully connected score.
struct ProgressiveDiscriminatorImpl : torch::nn::Module {
  explicit ProgressiveDiscriminatorImpl(const ProgressiveArch& arch, int64_t stage = 0);

  void grow();
  int64_t stage() const noexcept { return stage_; }

  /// (B, 3, R, R) -> (B). During a fade the new fromRGB+block pathway is
  /// blended with the previous stage's fromRGB applied to the 2x
  /// average-pooled input.
  torch::Tensor forward(const torch::Tensor& x, int64_t stage, double alpha = 1.0);

  /// Parameter-owning pieces, exposed for pathway isolation tests.
  torch::nn::Conv2d from_rgb(int64_t stage) const;
  torch::nn::Sequential block(int64_t stage) const;

  ProgressiveArch arch;

 private:
  int64_t stage_;
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::ModuleList from_rgb_{nullptr};
  torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(ProgressiveDiscriminator);

/// Image-level forward for a single latent code; output clamped to [-1, 1].
ImageTensor gen_forward(ProgressiveGenerator& g, const LatentCode& z, int64_t stage, double alpha);
double disc_forward_prog(ProgressiveDiscriminator& d, const ImageTensor& x, int64_t stage,
                         double alpha);

/// Returns a deep copy grown by one stage; `g` itself is left unchanged.
ProgressiveGenerator grow(const ProgressiveGenerator& g);

struct StageLossRecord;

struct ProgressiveTrainConfig {
  GrowthSchedule schedule;
  ProgressiveArch arch;
  AdamSettings adam;
  double gp_lambda = 10.0;
  int64_t d_steps_per_g_step = 1;
  torch::Dtype dtype = torch::kFloat;
  uint64_t data_seed = 1;
  uint64_t sample_seed = 2024;  // latents of the 8x8 sample grid
  std::function<void(const StageLossRecord&)> on_iteration;
  void validate() const;
};

struct StageLossRecord {
  int64_t stage = 0;
  int64_t resolution = 0;
  int64_t iteration = 0;
  double alpha = 1.0;
  double d_loss = 0;
  double gp = 0;
  double g_loss = 0;
};

/// Latents of the fixed 8x8 sample grid, (64, latent_dim).
torch::Tensor sample_latents(int64_t latent_dim, uint64_t sample_seed);

/// Trains stage by stage, writing `out_dir/stage_<r>/` after each one
/// (manifest.json, weights.pt, samples.pt, samples.png) and the whole loss
/// history to `out_dir/loss_history.csv`. Throws DivergenceError naming
/// stage and iteration on a non-finite loss.
std::vector<StageLossRecord> train_progressive(const ProgressiveTrainConfig& config,
                                               const imagedata::Dataset& hr,
                                               const std::filesystem::path& out_dir);

struct StageCheckpoint {
  ProgressiveArch arch;
  int64_t stage = 0;
  uint64_t sample_seed = 0;
  ProgressiveGenerator generator{nullptr};
  ProgressiveDiscriminator discriminator{nullptr};
};

/// Loads one `stage_<r>` directory (frozen, eval mode).
StageCheckpoint load_stage(const std::filesystem::path& stage_dir);

/// Highest-resolution `stage_<r>` directory under `generator_dir`.
std::filesystem::path latest_stage_dir(const std::filesystem::path& generator_dir);

/// Regenerates the sample grid tensor (64, 3, R, R) from a loaded checkpoint.
torch::Tensor regenerate_samples(StageCheckpoint& ckpt);

}  // namespace srnam::hrgen
