#pragma once

// Central finite-difference verification of analytic gradients.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "charstory/nnet/tensor.hpp"

namespace charstory::nnet {

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t max_coordinates = 10000;  // random subsample above this
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

template <class T>
T relative_error(T analytic, T numeric) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + T(1e-12));
}

/// `loss()` evaluates the scalar objective. `backward()` evaluates it and
/// accumulates dL/dθ into each Param::grad (grads are zeroed first).
/// Perturbation and differencing happen in T, so a `long double` model gets
/// a correspondingly lower roundoff floor.
template <class T, class Loss, class Backward>
GradCheckResult grad_check(const std::vector<Param<T>*>& params, Loss&& loss, Backward&& backward,
                           const GradCheckOptions& opt = {}) {
  for (auto* p : params) p->zero_grad();
  backward();
  struct Coord {
    Param<T>* p;
    std::size_t i;
  };
  std::vector<Coord> coords;
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->size(); ++i) coords.push_back({p, i});
  }
  if (coords.size() > opt.max_coordinates) {
    Rng rng(opt.seed);
    for (std::size_t i = 0; i < opt.max_coordinates; ++i) {
      std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
    }
    coords.resize(opt.max_coordinates);
  }
  GradCheckResult res;
  res.coordinates = coords.size();
  for (const auto& c : coords) {
    T& w = c.p->value.data[c.i];
    const T saved = w;
    const T step = static_cast<T>(opt.step);
    w = saved + step;
    const T up = static_cast<T>(loss());
    w = saved - step;
    const T down = static_cast<T>(loss());
    w = saved;
    const T numeric_t = (up - down) / (T(2) * step);
    const T analytic_t = c.p->grad.data[c.i];
    const double numeric = static_cast<double>(numeric_t), analytic = static_cast<double>(analytic_t);
    const double err = static_cast<double>(relative_error(analytic_t, numeric_t));
    if (res.worst_param.empty() || err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_param = c.p->name;
      res.worst_index = c.i;
      res.worst_analytic = analytic;
      res.worst_numeric = numeric;
    }
  }
  for (auto* p : params) p->zero_grad();
  return res;
}

}  // namespace charstory::nnet
