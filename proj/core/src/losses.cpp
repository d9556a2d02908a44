#include "srnam/losses.hpp"

#include <cmath>

#include "srnam/errors.hpp"

namespace srnam::losses {

namespace F = torch::nn::functional;

void LossWeights::validate() const {
  for (double w : {alpha, beta, gamma, delta}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw ValueError("loss weights must be finite and non-negative");
    }
  }
  if (alpha == 0.0 && beta == 0.0 && gamma == 0.0 && delta == 0.0) {
    throw ValueError("loss weights must not all be zero");
  }
}

namespace {

void require_non_empty(const torch::Tensor& t, const char* what) {
  if (!t.defined() || t.numel() == 0) {
    throw ValueError(std::string(what) + " must not be empty");
  }
}

torch::Tensor as_tensor(std::span<const double> values) {
  return torch::tensor(std::vector<double>(values.begin(), values.end()), torch::kDouble);
}

}  // namespace

torch::Tensor gan_loss_d(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
  require_non_empty(real_scores, "real scores");
  require_non_empty(fake_scores, "fake scores");
  const auto real_term = torch::clamp_max(real_scores - 1.0, 0.0).mean();
  const auto fake_term = torch::clamp_max(-fake_scores - 1.0, 0.0).mean();
  return -(real_term + fake_term);
}

double gan_loss_d(std::span<const double> real_scores, std::span<const double> fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) {
    throw ValueError("gan_loss_d needs non-empty score lists");
  }
  return gan_loss_d(as_tensor(real_scores), as_tensor(fake_scores)).item<double>();
}

torch::Tensor gan_loss_g(const torch::Tensor& fake_scores) {
  require_non_empty(fake_scores, "fake scores");
  return -fake_scores.mean();
}

double gan_loss_g(std::span<const double> fake_scores) {
  if (fake_scores.empty()) {
    throw ValueError("gan_loss_g needs a non-empty score list");
  }
  return gan_loss_g(as_tensor(fake_scores)).item<double>();
}

torch::Tensor gradient_penalty_at(const Critic& critic, const torch::Tensor& real,
                                  const torch::Tensor& fake, const torch::Tensor& eps,
                                  double lambda) {
  if (real.sizes() != fake.sizes()) {
    throw ShapeError("gradient penalty batches differ: " + c10::str(real.sizes()) + " vs " +
                     c10::str(fake.sizes()));
  }
  require_non_empty(real, "gradient penalty batch");
  if (eps.dim() != 1 || eps.size(0) != real.size(0)) {
    throw ShapeError("interpolation coefficients must have one entry per sample");
  }
  if (!(lambda >= 0.0)) {
    throw ValueError("gradient penalty lambda must be non-negative");
  }
  std::vector<int64_t> bshape(static_cast<size_t>(real.dim()), 1);
  bshape[0] = real.size(0);
  const auto e = eps.to(real.dtype()).view(bshape);
  auto x = (e * real.detach() + (1.0 - e) * fake.detach()).requires_grad_(true);
  auto scores = critic(x);
  torch::Tensor grads;
  if (scores.requires_grad()) {
    grads = torch::autograd::grad({scores.sum()}, {x}, {}, /*retain_graph=*/true,
                                  /*create_graph=*/true, /*allow_unused=*/true)[0];
  }
  if (!grads.defined()) {
    grads = torch::zeros_like(x);
  }
  // The 1e-30 keeps the backward pass finite for a zero gradient.
  const auto norms = (grads.flatten(1).pow(2).sum(1) + 1e-30).sqrt();
  return lambda * (norms - 1.0).pow(2).mean();
}

torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, double lambda, torch::Generator& gen) {
  if (real.dim() == 0) {
    throw ShapeError("gradient penalty needs batched input");
  }
  const auto eps = torch::rand({real.size(0)}, gen, torch::TensorOptions().dtype(torch::kDouble));
  return gradient_penalty_at(critic, real, fake, eps, lambda);
}

torch::Tensor l1_loss(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) {
    throw ShapeError("l1_loss shape mismatch: " + c10::str(a.sizes()) + " vs " + c10::str(b.sizes()));
  }
  return (a - b).abs().mean();
}

double l1_loss(const ImageTensor& a, const ImageTensor& b) {
  return losses::l1_loss(a.tensor(), b.tensor()).item<double>();
}

torch::Tensor bilinear_upscale(const torch::Tensor& x, int64_t factor) {
  if (factor < 1) {
    throw ValueError("up-scaling factor must be positive");
  }
  if (x.dim() != 4) {
    throw ShapeError("bilinear_upscale expects (B, C, H, W)");
  }
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{x.size(2) * factor, x.size(3) * factor})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

ImageTensor upscale_F(const ImageTensor& lr, int64_t factor) {
  if (factor != kHrSide / kLrSide) {
    throw ValueError("upscale_F supports factor 4 only, got " + std::to_string(factor));
  }
  if (lr.side() != kLrSide) {
    throw ShapeError("upscale_F expects a 16x16 image, got " + std::to_string(lr.side()));
  }
  return ImageTensor::clamped(bilinear_upscale(lr.batched(torch::kDouble), factor).squeeze(0));
}

PixelLossTerms pixel_loss(const torch::Tensor& hr, const torch::Tensor& lr_fake,
                          const LossWeights& weights, const percept::FeatureExtractor* fx,
                          int64_t factor) {
  const auto up = bilinear_upscale(lr_fake, factor);
  if (up.sizes() != hr.sizes()) {
    throw ShapeError("up-scaled LR " + c10::str(up.sizes()) + " does not match HR " + c10::str(hr.sizes()));
  }
  PixelLossTerms terms;
  terms.l1 = losses::l1_loss(up, hr);
  if (weights.delta != 0.0) {
    if (fx == nullptr) {
      throw ValueError("perceptual weight is non-zero but no feature extractor was supplied");
    }
    terms.perceptual = percept::perceptual_distance(*fx, up, hr).to(up.dtype());
  } else {
    terms.perceptual = torch::zeros({}, up.options());
  }
  terms.pixel = weights.gamma * terms.l1 + weights.delta * terms.perceptual;
  return terms;
}

double pixel_loss(const ImageTensor& hr, const ImageTensor& lr_fake, const LossWeights& weights,
                  const percept::FeatureExtractor& fx) {
  if (hr.side() != kHrSide || lr_fake.side() != kLrSide) {
    throw ShapeError("pixel_loss expects a 64x64 HR and a 16x16 LR image");
  }
  torch::NoGradGuard no_grad;
  return pixel_loss(hr.batched(torch::kDouble), lr_fake.batched(torch::kDouble), weights, &fx,
                    kHrSide / kLrSide)
      .pixel.item<double>();
}

torch::Tensor total_loss(const torch::Tensor& pixel, const torch::Tensor& gan,
                         const LossWeights& weights) {
  return weights.alpha * pixel + weights.beta * gan;
}

double total_loss(double pixel, double gan, const LossWeights& weights) {
  return weights.alpha * pixel + weights.beta * gan;
}

}  // namespace srnam::losses
