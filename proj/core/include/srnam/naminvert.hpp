#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <torch/torch.h>

#include "srnam/adam.hpp"
#include "srnam/degrader.hpp"
#include "srnam/errors.hpp"
#include "srnam/hrgen.hpp"
#include "srnam/image_tensor.hpp"

namespace srnam::naminvert {

/// A frozen differentiable map. Must be safe to call from several threads at
/// once and must not accumulate gradients into its own parameters.
using Mapping = std::function<torch::Tensor(const torch::Tensor&)>;

struct InversionOptions {
  int64_t iterations = 400;
  int64_t num_solutions = 1;
  uint64_t seed = 0;
  AdamSettings adam;
  double init_scale = 1.0;
  bool record_trace = true;
  /// Re-project z onto the sphere of radius sqrt(dim) after every step.
  bool sphere_projection = false;
  /// Shape of one latent code, without the batch dimension.
  std::vector<int64_t> latent_shape = {hrgen::kLatentDim};
  torch::Dtype dtype = torch::kFloat;
  /// Parallel inversions in invert_multi; results do not depend on it.
  int64_t workers = 1;

  void validate() const;
};

struct InversionResult {
  uint64_t seed = 0;           // seed of this solution's initialization
  torch::Tensor z_init;
  torch::Tensor z_star;        // best iterate
  torch::Tensor hr;            // G(z_star)
  torch::Tensor lr_recon;      // D(G(z_star))
  std::vector<double> objective_trace;  // objective of z_0 ... z_iterations
  double best_objective = 0;
};

/// Thrown when the objective becomes non-finite; carries the trace so far.
class InversionDiverged : public DivergenceError {
 public:
  InversionDiverged(const std::string& what, std::vector<double> trace)
      : DivergenceError(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

/// Mean absolute difference between D(G(z)) and `target`. No perceptual term.
torch::Tensor objective(const torch::Tensor& z, const torch::Tensor& target, const Mapping& g,
                        const Mapping& d);

/// Seed of solution k. Solution 0 uses `seed` itself.
uint64_t solution_seed(uint64_t seed, int64_t k);

/// Adam on the objective from z ~ init_scale N(0, I) (seeded by opts.seed).
/// Returns the lowest-objective iterate, not the last one.
InversionResult invert(const torch::Tensor& target, const Mapping& g, const Mapping& d,
                       const InversionOptions& opts);

/// opts.num_solutions independent inversions from distinct seeded starts,
/// sorted by best_objective (ties keep solution order).
std::vector<InversionResult> invert_multi(const torch::Tensor& target, const Mapping& g,
                                          const Mapping& d, const InversionOptions& opts);

/// Frozen generator + degradation network pair used for super-resolution.
struct SrModels {
  hrgen::StageCheckpoint generator;
  degrader::DegraderModel degrader;
  /// Noise held fixed while inverting (the degrader is conditioned on it).
  torch::Tensor noise;  // (1, 100)

  /// G(z) up-sampled with nearest neighbour to 64x64 when the generator's
  /// final stage is below 64.
  Mapping generator_map() const;
  /// HR (B, 3, 64, 64) -> LR (B, 3, 16, 16) under the fixed noise.
  Mapping degrader_map() const;
};

/// Loads both checkpoints and checks that they compose (generator output
/// feeds a 64x64 degrader). Throws CheckpointError on any mismatch.
SrModels load_models(const std::filesystem::path& generator_dir,
                     const std::filesystem::path& degrader_dir, uint64_t noise_seed);

struct Candidate {
  ImageTensor hr_image;
  ImageTensor lr_recon;
  double best_objective = 0;
  uint64_t seed = 0;
  torch::Tensor z_star;
};

/// Runs invert_multi against the frozen models and returns the HR candidates
/// with their re-degraded LR images, best first.
std::vector<Candidate> super_resolve(const ImageTensor& lr, const SrModels& models,
                                     const InversionOptions& opts);

}  // namespace srnam::naminvert
