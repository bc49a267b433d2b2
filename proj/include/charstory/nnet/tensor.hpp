#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "charstory/error.hpp"

namespace charstory::nnet {

/// Row-major dense matrix. Vectors are plain std::vector / std::span.
template <class T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::size_t size() const { return data.size(); }
  void zero() { std::fill(data.begin(), data.end(), T(0)); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Matrix&) const = default;
};

template <class T>
using Vector = std::vector<T>;

inline void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(want) + ", got " +
                         std::to_string(got));
  }
}

/// y += A x
template <class T>
void gemv_acc(const Matrix<T>& a, std::span<const T> x, std::span<T> y) {
  check_dim(x.size(), a.cols, "gemv input");
  check_dim(y.size(), a.rows, "gemv output");
  for (std::size_t i = 0; i < a.rows; ++i) {
    const T* row = a.data.data() + i * a.cols;
    T acc = T(0);
    for (std::size_t j = 0; j < a.cols; ++j) acc += row[j] * x[j];
    y[i] += acc;
  }
}

/// x += Aᵀ y
template <class T>
void gemv_t_acc(const Matrix<T>& a, std::span<const T> y, std::span<T> x) {
  check_dim(y.size(), a.rows, "gemvT input");
  check_dim(x.size(), a.cols, "gemvT output");
  for (std::size_t i = 0; i < a.rows; ++i) {
    const T* row = a.data.data() + i * a.cols;
    const T yi = y[i];
    if (yi == T(0)) continue;
    for (std::size_t j = 0; j < a.cols; ++j) x[j] += row[j] * yi;
  }
}

/// G += u vᵀ
template <class T>
void ger_acc(Matrix<T>& g, std::span<const T> u, std::span<const T> v) {
  check_dim(u.size(), g.rows, "outer rows");
  check_dim(v.size(), g.cols, "outer cols");
  for (std::size_t i = 0; i < g.rows; ++i) {
    const T ui = u[i];
    if (ui == T(0)) continue;
    T* row = g.data.data() + i * g.cols;
    for (std::size_t j = 0; j < g.cols; ++j) row[j] += ui * v[j];
  }
}

template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  check_dim(b.rows, a.cols, "matmul inner");
  Matrix<T> c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const T aik = a(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

template <class T>
T sigmoid(T x) {
  if (x >= T(0)) {
    T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

/// Seeded generator. Uniform draws are built from raw 64-bit output so
/// sequences do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t next() { return gen_(); }
  /// Index in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  double normal() {
    // Box-Muller
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 gen_;
};

/// Trainable tensor with its gradient and Adam moments.
template <class T>
struct Param {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  Matrix<T> adam_m;
  Matrix<T> adam_v;
  std::uint64_t step = 0;

  Param() = default;
  Param(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols), adam_m(rows, cols), adam_v(rows, cols) {}

  std::size_t rows() const { return value.rows; }
  std::size_t cols() const { return value.cols; }
  std::size_t size() const { return value.size(); }
  void zero_grad() { grad.zero(); }

  /// uniform(-k, k) with k = 1/sqrt(fan_in)
  void init_uniform(Rng& rng, std::size_t fan_in) {
    const double k = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
    for (auto& x : value.data) x = static_cast<T>(rng.uniform(-k, k));
  }
  void fill(T v) { std::fill(value.data.begin(), value.data.end(), v); }

  std::span<const T> vec() const { return value.data; }
};

}  // namespace charstory::nnet
