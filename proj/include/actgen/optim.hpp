#pragma once

#include <vector>

#include "actgen/tensor.hpp"

namespace actgen {

/// Momentum SGD over a flat list of parameter tensors. Velocity buffers are
/// lazily sized on the first step and belong to the trainer that owns them
/// (they are part of resumable state).
struct SgdMomentum {
  double momentum = 0.9;
  std::vector<Tensor> velocity;

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr);
};

/// Adam with bias correction.
struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  std::vector<Tensor> m, v;

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr);
};

/// Cosine decay from base_lr to 0 over total epochs.
double cosine_lr(double base_lr, int epoch, int total_epochs);

}  // namespace actgen
