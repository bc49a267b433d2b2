#pragma once

#include <cmath>

#include "charstory/error.hpp"
#include "charstory/nnet/tensor.hpp"

namespace charstory::nnet {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(lr > 0.0)) throw PreconditionError("adam: learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw PreconditionError("adam: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw PreconditionError("adam: eps must be positive");
  }
};

/// One bias-corrected Adam update; the gradient is zeroed afterwards.
template <class T>
void adam_step(Param<T>& p, const AdamConfig& cfg) {
  ++p.step;
  const double t = static_cast<double>(p.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  for (std::size_t i = 0; i < p.value.data.size(); ++i) {
    const T g = p.grad.data[i];
    T& m = p.adam_m.data[i];
    T& v = p.adam_v.data[i];
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g * g;
    const double mhat = static_cast<double>(m) / bc1;
    const double vhat = static_cast<double>(v) / bc2;
    p.value.data[i] -= static_cast<T>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
  }
  p.zero_grad();
}

}  // namespace charstory::nnet
