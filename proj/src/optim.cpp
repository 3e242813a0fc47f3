#include "actgen/optim.hpp"

#include <cmath>

namespace actgen {

void SgdMomentum::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                       double lr) {
  detail::require(params.size() == grads.size(), "sgd: params/grads count mismatch");
  if (velocity.empty()) {
    velocity.reserve(params.size());
    for (const Tensor* p : params) velocity.push_back(Tensor::zeros(p->shape));
  }
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& vel = velocity[i];
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    detail::require(p.same_shape(g), "sgd: grad shape mismatch");
    for (size_t j = 0; j < p.data.size(); ++j) {
      vel.data[j] = momentum * vel.data[j] + g.data[j];
      p.data[j] -= lr * vel.data[j];
    }
  }
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr) {
  detail::require(params.size() == grads.size(), "adam: params/grads count mismatch");
  if (m.empty()) {
    for (const Tensor* p : params) {
      m.push_back(Tensor::zeros(p->shape));
      v.push_back(Tensor::zeros(p->shape));
    }
  }
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    detail::require(p.same_shape(g), "adam: grad shape mismatch");
    for (size_t j = 0; j < p.data.size(); ++j) {
      m[i].data[j] = beta1 * m[i].data[j] + (1.0 - beta1) * g.data[j];
      v[i].data[j] = beta2 * v[i].data[j] + (1.0 - beta2) * g.data[j] * g.data[j];
      const double mh = m[i].data[j] / bc1;
      const double vh = v[i].data[j] / bc2;
      p.data[j] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
  if (total_epochs <= 0) return base_lr;
  return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * epoch / total_epochs));
}

}  // namespace actgen
