#include "srnam/naminvert.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include "srnam/checkpoint.hpp"
#include "srnam/rng.hpp"

namespace srnam::naminvert {

namespace F = torch::nn::functional;

void InversionOptions::validate() const {
  if (iterations < 1) throw ValueError("inversion needs at least one iteration");
  if (num_solutions < 1) throw ValueError("inversion needs at least one solution");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw ValueError("init_scale must be finite and >= 0");
  if (latent_shape.empty()) throw ValueError("latent shape must not be empty");
  for (auto d : latent_shape) {
    if (d < 1) throw ValueError("latent dimensions must be positive");
  }
  if (workers < 1) throw ValueError("workers must be >= 1");
  adam.validate();
}

torch::Tensor objective(const torch::Tensor& z, const torch::Tensor& target, const Mapping& g, const Mapping& d) {
  const auto recon = d(g(z));
  if (recon.sizes() != target.sizes()) {
    throw ShapeError("D(G(z)) has shape " + c10::str(recon.sizes()) + " but the target is " +
                     c10::str(target.sizes()));
  }
  return (recon - target.to(recon.dtype())).abs().mean();
}

uint64_t solution_seed(uint64_t seed, int64_t k) {
  return k == 0 ? seed : mix_seed(seed, static_cast<uint64_t>(k));
}

InversionResult invert(const torch::Tensor& target, const Mapping& g, const Mapping& d,
                       const InversionOptions& opts) {
  opts.validate();
  std::vector<int64_t> shape{1};
  shape.insert(shape.end(), opts.latent_shape.begin(), opts.latent_shape.end());

  InversionResult result;
  result.seed = opts.seed;
  auto gen = make_generator(opts.seed);
  result.z_init = (opts.init_scale * torch::randn(shape, gen, torch::kDouble)).to(opts.dtype);
  auto z = result.z_init.clone().requires_grad_(true);
  torch::optim::Adam optimizer({z}, opts.adam.options());
  const auto goal = target.detach();
  const double radius = std::sqrt(static_cast<double>(z.numel()));

  std::vector<double> trace;
  trace.reserve(static_cast<size_t>(opts.iterations) + 1);
  double best = std::numeric_limits<double>::infinity();
  torch::Tensor z_best;
  for (int64_t it = 0;; ++it) {
    const auto obj = objective(z, goal, g, d);
    const double value = obj.item<double>();
    trace.push_back(value);
    if (!std::isfinite(value)) {
      throw InversionDiverged("inversion objective became non-finite at iteration " + std::to_string(it),
                              std::move(trace));
    }
    if (value < best) {
      best = value;
      z_best = z.detach().clone();
    }
    if (it == opts.iterations) break;
    z.mutable_grad() = torch::autograd::grad({obj}, {z})[0];
    optimizer.step();
    if (opts.sphere_projection) {
      torch::NoGradGuard no_grad;
      z.mul_(radius / (z.norm() + 1e-12));
    }
  }

  result.z_star = z_best;
  result.best_objective = best;
  if (opts.record_trace) result.objective_trace = std::move(trace);
  torch::NoGradGuard no_grad;
  result.hr = g(z_best);
  result.lr_recon = d(result.hr);
  return result;
}

std::vector<InversionResult> invert_multi(const torch::Tensor& target, const Mapping& g, const Mapping& d,
                                          const InversionOptions& opts) {
  opts.validate();
  const auto k_total = static_cast<size_t>(opts.num_solutions);
  std::vector<InversionResult> results(k_total);
  auto run = [&](size_t k) {
    InversionOptions single = opts;
    single.num_solutions = 1;
    single.seed = solution_seed(opts.seed, static_cast<int64_t>(k));
    return invert(target, g, d, single);
  };
  if (opts.workers == 1 || k_total == 1) {
    for (size_t k = 0; k < k_total; ++k) results[k] = run(k);
  } else {
    const auto workers = static_cast<size_t>(opts.workers);
    for (size_t start = 0; start < k_total; start += workers) {
      std::vector<std::future<InversionResult>> pending;
      for (size_t k = start; k < std::min(k_total, start + workers); ++k) {
        pending.push_back(std::async(std::launch::async, run, k));
      }
      for (size_t i = 0; i < pending.size(); ++i) results[start + i] = pending[i].get();
    }
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const InversionResult& a, const InversionResult& b) { return a.best_objective < b.best_objective; });
  return results;
}

Mapping SrModels::generator_map() const {
  auto g = generator.generator;
  const int64_t stage = generator.stage;
  const auto dtype = g->parameters().front().scalar_type();
  return [g, stage, dtype](const torch::Tensor& z) {
    auto img = g.ptr()->forward(z.to(dtype), stage, 1.0);
    if (img.size(-1) != kHrSide) {
      img = F::interpolate(img, F::InterpolateFuncOptions()
                                    .size(std::vector<int64_t>{kHrSide, kHrSide})
                                    .mode(torch::kNearest));
    }
    return img;
  };
}

Mapping SrModels::degrader_map() const {
  auto dg = degrader.generator;
  const auto dtype = dg->parameters().front().scalar_type();
  const auto z = noise.to(dtype);
  return [dg, dtype, z](const torch::Tensor& hr) {
    return dg.ptr()->forward(hr.to(dtype), z.expand({hr.size(0), z.size(1)}));
  };
}

SrModels load_models(const std::filesystem::path& generator_dir, const std::filesystem::path& degrader_dir,
                     uint64_t noise_seed) {
  namespace fs = std::filesystem;
  const fs::path stage_dir = fs::exists(generator_dir / checkpoint::kManifestFile)
                                 ? generator_dir
                                 : hrgen::latest_stage_dir(generator_dir);
  SrModels models;
  models.generator = hrgen::load_stage(stage_dir);
  models.degrader = degrader::load_model(degrader_dir);
  const auto& ga = models.degrader.generator_arch;
  if (ga.hr_side != kHrSide || ga.hr_side / 4 != kLrSide) {
    throw CheckpointError("degrader expects " + std::to_string(ga.hr_side) +
                          "px HR input; super-resolution needs 64px -> 16px");
  }
  if (hrgen::stage_resolution(models.generator.stage) > ga.hr_side) {
    throw CheckpointError("generator resolution exceeds the degrader's HR input");
  }
  auto gen = make_generator(noise_seed);
  models.noise = torch::randn({1, ga.noise_dim}, gen, torch::kDouble);
  return models;
}

std::vector<Candidate> super_resolve(const ImageTensor& lr, const SrModels& models, const InversionOptions& opts) {
  if (lr.side() != kLrSide) {
    throw ShapeError("super_resolve expects a 16x16 LR image, got " + std::to_string(lr.side()));
  }
  InversionOptions o = opts;
  o.latent_shape = {models.generator.arch.latent_dim};
  o.dtype = models.degrader.generator->parameters().front().scalar_type();
  const auto results = invert_multi(lr.batched(o.dtype), models.generator_map(), models.degrader_map(), o);
  std::vector<Candidate> out;
  out.reserve(results.size());
  for (const auto& r : results) {
    out.push_back({ImageTensor::clamped(r.hr.squeeze(0)), ImageTensor::clamped(r.lr_recon.squeeze(0)),
                   r.best_objective, r.seed, r.z_star});
  }
  return out;
}

}  // namespace srnam::naminvert
