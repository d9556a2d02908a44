#pragma once

#include <functional>
#include <span>

#include <torch/torch.h>

#include "srnam/image_tensor.hpp"
#include "srnam/percept.hpp"

namespace srnam::losses {

/// alpha, beta weight pixel vs adversarial terms; gamma, delta weight the
/// L1 and perceptual parts of the pixel term.
struct LossWeights {
  double alpha = 1.0;
  double beta = 0.05;
  double gamma = 1.0;
  double delta = 1.0;

  /// Throws ValueError when any weight is negative/non-finite or all are zero.
  void validate() const;
};

/// Hinge discriminator loss:
///   -( mean(min(0, -1 + real)) + mean(min(0, -1 - fake)) )
torch::Tensor gan_loss_d(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);
double gan_loss_d(std::span<const double> real_scores, std::span<const double> fake_scores);

/// Generator companion of the hinge loss: -mean(fake).
torch::Tensor gan_loss_g(const torch::Tensor& fake_scores);
double gan_loss_g(std::span<const double> fake_scores);

/// Maps a (B, ...) batch to B scores.
using Critic = std::function<torch::Tensor(const torch::Tensor&)>;

/// lambda * mean_b (||grad_x D(x_b)||_2 - 1)^2 at x_b = eps_b real_b + (1 - eps_b) fake_b,
/// with eps_b ~ U(0, 1) drawn from `gen`. The graph is kept so the result can
/// be back-propagated into the critic's parameters.
torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, double lambda, torch::Generator& gen);

/// Same, with the interpolation coefficients supplied as a (B) tensor.
torch::Tensor gradient_penalty_at(const Critic& critic, const torch::Tensor& real,
                                  const torch::Tensor& fake, const torch::Tensor& eps,
                                  double lambda);

/// Mean absolute difference.
torch::Tensor l1_loss(const torch::Tensor& a, const torch::Tensor& b);
double l1_loss(const ImageTensor& a, const ImageTensor& b);

/// Bilinear up-scaling of a (B, C, H, W) tensor, half-pixel centres
/// (align_corners = false), edge-clamped.
torch::Tensor bilinear_upscale(const torch::Tensor& x, int64_t factor);

/// The F of the pixel loss: 16x16 -> 64x64 bilinear. Only factor 4 is valid.
ImageTensor upscale_F(const ImageTensor& lr, int64_t factor = 4);

struct PixelLossTerms {
  torch::Tensor l1;
  torch::Tensor perceptual;
  torch::Tensor pixel;  // gamma * l1 + delta * perceptual
};

/// Batched pixel loss between HR images and up-scaled fake LR images.
/// `fx` may be null when delta == 0.
PixelLossTerms pixel_loss(const torch::Tensor& hr, const torch::Tensor& lr_fake,
                          const LossWeights& weights, const percept::FeatureExtractor* fx,
                          int64_t factor);

double pixel_loss(const ImageTensor& hr, const ImageTensor& lr_fake, const LossWeights& weights,
                  const percept::FeatureExtractor& fx);

/// alpha * pixel + beta * gan.
torch::Tensor total_loss(const torch::Tensor& pixel, const torch::Tensor& gan,
                         const LossWeights& weights);
double total_loss(double pixel, double gan, const LossWeights& weights);

}  // namespace srnam::losses
