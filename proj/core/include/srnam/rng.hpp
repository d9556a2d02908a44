#pragma once

#include <cstdint>

#include <torch/torch.h>

namespace srnam {

/// SplitMix64 finalizer. Derives independent sub-seeds from a root seed so
/// that, e.g., solution k of an inversion always gets the same stream.
constexpr uint64_t mix_seed(uint64_t seed, uint64_t stream) noexcept {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Private CPU generator; never touches torch's global RNG.
torch::Generator make_generator(uint64_t seed);

/// Deterministic re-initialization of every parameter of `module`:
/// Kaiming-normal (leaky 0.2) for weights with >= 2 dims, zeros for biases.
void init_parameters(torch::nn::Module& module, uint64_t seed);

/// FNV-1a digest over all parameters and buffers, in registration order.
/// Used to prove that frozen networks are never modified.
uint64_t weight_hash(const torch::nn::Module& module);

}  // namespace srnam
