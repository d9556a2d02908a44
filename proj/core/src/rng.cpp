#include "srnam/rng.hpp"

#include <cmath>
#include <cstring>

#include <ATen/CPUGeneratorImpl.h>

namespace srnam {

torch::Generator make_generator(uint64_t seed) {
  return at::make_generator<at::CPUGeneratorImpl>(seed);
}

void init_parameters(torch::nn::Module& module, uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto gen = make_generator(seed);
  for (auto& p : module.parameters()) {
    if (p.dim() >= 2) {
      const int64_t fan_in = p.numel() / p.size(0);
      // Kaiming normal for leaky ReLU with slope 0.2.
      const double gain = std::sqrt(2.0 / (1.0 + 0.2 * 0.2));
      const double std = gain / std::sqrt(static_cast<double>(fan_in));
      p.copy_(torch::randn(p.sizes(), gen, torch::TensorOptions().dtype(torch::kDouble)) * std);
    } else {
      p.zero_();
    }
  }
}

uint64_t weight_hash(const torch::nn::Module& module) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const torch::Tensor& t) {
    auto c = t.detach().contiguous().cpu();
    const auto* bytes = static_cast<const unsigned char*>(c.data_ptr());
    const size_t n = static_cast<size_t>(c.numel()) * c.element_size();
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : module.parameters()) mix(p);
  for (const auto& b : module.buffers()) mix(b);
  return h;
}

}  // namespace srnam
