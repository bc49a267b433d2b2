#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

#include "charstory/nnet/tensor.hpp"

namespace charstory::nnet {

/// Softmax cross-entropy against `target`. Writes p - onehot(target) into
/// `dlogits` (when non-empty) and returns -log p[target]. Stabilised by
/// subtracting the maximum logit.
template <class T>
T softmax_xent(std::span<const T> logits, std::uint32_t target, std::span<T> dlogits = {}) {
  if (target >= logits.size()) {
    throw IndexError("target " + std::to_string(target) + " outside " + std::to_string(logits.size()) +
                     " logits");
  }
  const T mx = *std::max_element(logits.begin(), logits.end());
  T sum = T(0);
  for (auto l : logits) sum += std::exp(l - mx);
  const T log_z = mx + std::log(sum);
  if (!dlogits.empty()) {
    check_dim(dlogits.size(), logits.size(), "dlogits");
    for (std::size_t i = 0; i < logits.size(); ++i) dlogits[i] = std::exp(logits[i] - log_z);
    dlogits[target] -= T(1);
  }
  return log_z - logits[target];
}

/// log softmax in double precision.
template <class T>
Vector<double> log_softmax(std::span<const T> logits) {
  double mx = static_cast<double>(*std::max_element(logits.begin(), logits.end()));
  double sum = 0.0;
  for (auto l : logits) sum += std::exp(static_cast<double>(l) - mx);
  const double log_z = mx + std::log(sum);
  Vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<double>(logits[i]) - log_z;
  return out;
}

}  // namespace charstory::nnet
