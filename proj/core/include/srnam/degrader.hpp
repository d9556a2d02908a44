#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include <torch/torch.h>

#include "srnam/adam.hpp"
#include "srnam/image_tensor.hpp"
#include "srnam/imagedata.hpp"
#include "srnam/losses.hpp"
#include "srnam/percept.hpp"

namespace srnam::degrader {

inline constexpr int64_t kNoiseDim = 100;

/// 100-d conditioning noise of the degradation generator.
class NoiseVector {
 public:
  /// Throws ShapeError unless `values` is a 1-d tensor of length 100.
  explicit NoiseVector(torch::Tensor values);

  /// i.i.d. standard normal draw from a private generator seeded with `seed`.
  static NoiseVector sample(uint64_t seed);

  const torch::Tensor& values() const noexcept { return values_; }

 private:
  torch::Tensor values_;
};

/// Depth-to-space: (B, C r^2, H, W) -> (B, C, rH, rW) with
/// out(c, rh + dy, rw + dx) = in(c r^2 + dy r + dx, h, w).
/// Accepts unbatched (C r^2, H, W) input as well.
torch::Tensor pixel_shuffle(const torch::Tensor& x, int64_t r);

/// Space-to-depth; exact inverse of pixel_shuffle.
torch::Tensor pixel_unshuffle(const torch::Tensor& x, int64_t r);

/// Pre-activation residual block without normalization:
/// x + conv(lrelu(conv(lrelu(x)))), with a 1x1 projection on the skip path
/// when the channel count changes.
struct ResidualBlockImpl : torch::nn::Module {
  ResidualBlockImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv1{nullptr};
  torch::nn::Conv2d conv2{nullptr};
  torch::nn::Conv2d skip{nullptr};
};
TORCH_MODULE(ResidualBlock);

struct GeneratorArch {
  int64_t width = 64;        // channels of every residual group
  int64_t noise_dim = kNoiseDim;
  int64_t hr_side = kHrSide;
  bool operator==(const GeneratorArch&) const = default;
};

/// HR (64x64) + noise -> LR (16x16) encoder-decoder.
///
/// The noise is projected by a fully connected layer to one 64x64 channel and
/// concatenated to the RGB input. Six groups of two residual blocks follow;
/// the first four end with a 2x average pool (64 -> 4), the last two start
/// with a 2x pixel-shuffle up-sampling (4 -> 16). A 3x3 conv + tanh emits RGB.
struct DegraderGeneratorImpl : torch::nn::Module {
  explicit DegraderGeneratorImpl(const GeneratorArch& arch);

  /// (B, 100) -> (B, 1, 64, 64).
  torch::Tensor project_noise(const torch::Tensor& z);

  /// (B, 3, 64, 64) x (B, 100) -> (B, 3, 16, 16) in [-1, 1].
  torch::Tensor forward(const torch::Tensor& hr, const torch::Tensor& z);

  GeneratorArch arch;
  torch::nn::Linear noise_proj{nullptr};
  torch::nn::Conv2d stem{nullptr};
  torch::nn::ModuleList groups{nullptr};  // 6 x Sequential(ResidualBlock, ResidualBlock)
  torch::nn::ModuleList up_convs{nullptr};  // 2 x 3x3 conv width -> 4 width ahead of the shuffle
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(DegraderGenerator);

struct DiscriminatorArch {
  int64_t width = 64;
  int64_t lr_side = kLrSide;
  bool operator==(const DiscriminatorArch&) const = default;
};

/// 16x16 LR image -> unbounded realism score. Six residual blocks with no
/// normalization; the last two are followed by 2x max pooling (16 -> 4);
/// a fully connected head produces the score.
struct DegraderDiscriminatorImpl : torch::nn::Module {
  explicit DegraderDiscriminatorImpl(const DiscriminatorArch& arch);

  /// (B, 3, 16, 16) -> (B).
  torch::Tensor forward(const torch::Tensor& lr);

  DiscriminatorArch arch;
  torch::nn::Conv2d stem{nullptr};
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::Linear fc{nullptr};
};
TORCH_MODULE(DegraderDiscriminator);

/// Image-level API.
torch::Tensor project_noise(DegraderGenerator& g, const NoiseVector& z);  // (1, 64, 64)
ImageTensor degrade(DegraderGenerator& g, const ImageTensor& hr, const NoiseVector& z);
double disc_score(DegraderDiscriminator& d, const ImageTensor& lr);

struct GeneratorLoss {
  torch::Tensor l1;
  torch::Tensor perceptual;
  torch::Tensor gan;
  torch::Tensor pixel;
  torch::Tensor total;
};

/// Generator objective alpha (gamma l1 + delta perceptual) + beta (-mean D(fake))
/// for a batch of HR inputs, their degraded outputs and the critic's scores.
GeneratorLoss generator_loss(const torch::Tensor& hr, const torch::Tensor& lr_fake,
                             const torch::Tensor& fake_scores, const losses::LossWeights& weights,
                             const percept::FeatureExtractor* fx, int64_t upscale_factor);

struct DiscriminatorLoss {
  torch::Tensor hinge;
  torch::Tensor gp;
  torch::Tensor total;
};

/// Hinge loss on (real, fake) plus the gradient penalty. `fake` is detached.
DiscriminatorLoss discriminator_loss(const losses::Critic& critic, const torch::Tensor& real,
                                     const torch::Tensor& fake, double gp_lambda,
                                     torch::Generator& gen);

struct LossRecord;

struct DegraderTrainConfig {
  int64_t iterations = 500000;
  int64_t d_steps_per_g_step = 5;
  double gp_lambda = 10.0;
  int64_t batch_size = 64;
  losses::LossWeights weights;
  AdamSettings adam;
  int64_t upscale_factor = 4;
  GeneratorArch generator;
  DiscriminatorArch discriminator;
  percept::PerceptConfig percept;
  torch::Dtype dtype = torch::kFloat;
  uint64_t seed = 0;       // network init
  uint64_t data_seed = 1;  // batch order, noise, GP interpolation
  std::function<void(const LossRecord&)> on_iteration;

  void validate() const;
};

struct LossRecord {
  int64_t iteration = 0;
  double d_loss = 0;  // hinge loss of the last discriminator step
  double gp = 0;      // gradient penalty of the last discriminator step
  double g_gan = 0;
  double g_l1 = 0;
  double g_vgg = 0;
  double total = 0;
};

struct DegraderModel {
  GeneratorArch generator_arch;
  DiscriminatorArch discriminator_arch;
  DegraderGenerator generator{nullptr};
  DegraderDiscriminator discriminator{nullptr};
};

struct DegraderCheckpoint {
  DegraderTrainConfig config;
  DegraderModel model;
  std::vector<LossRecord> history;
};

/// Builds freshly initialized networks, deterministic in `seed`.
DegraderModel make_model(const GeneratorArch& g, const DiscriminatorArch& d, uint64_t seed,
                         torch::Dtype dtype);

/// Alternating unpaired training: `d_steps_per_g_step` hinge + gradient
/// penalty discriminator updates (real LR vs. degraded HR) before every
/// generator update on alpha * pixel + beta * gan. Throws DivergenceError when
/// any loss turns non-finite.
DegraderCheckpoint train_degrader(const DegraderTrainConfig& config,
                                  const imagedata::Dataset& hr,
                                  const imagedata::Dataset& lr);

/// Writes manifest.json, weights.pt and loss_history.csv into `dir`.
void save_checkpoint(const DegraderCheckpoint& ckpt, const std::filesystem::path& dir);

/// Restores the networks (frozen, eval mode). Throws CheckpointError.
DegraderModel load_model(const std::filesystem::path& dir);

void write_loss_history(const std::vector<LossRecord>& history, const std::filesystem::path& path);

}  // namespace srnam::degrader
