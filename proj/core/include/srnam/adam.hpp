#pragma once

#include <torch/torch.h>

namespace srnam {

/// Adam hyper-parameters; the defaults are the usual "default settings".
struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  torch::optim::AdamOptions options() const {
    return torch::optim::AdamOptions(learning_rate).betas({beta1, beta2}).eps(epsilon);
  }
  void validate() const;
};

}  // namespace srnam
