#pragma once

// Linear maps used inside the recurrent cells. Both share one interface so
// a cell can be instantiated over either:
//
//   begin(seq, s)                    once per sequence, given semantics s
//   forward(seq, x, y, cache)        y += M(s) x
//   backward(seq, x, cache, dy, dx)  dx += M(s)ᵀ dy, parameter grads += ...
//   end(seq, s)                      flush per-sequence gradient terms
//
// FactoredLinear realises the semantically composed matrix
// M(s) = A · diag(B s) · C without ever forming it.

#include <string>
#include <vector>

#include "charstory/nnet/tensor.hpp"

namespace charstory::nnet {

template <class T>
class DenseLinear {
 public:
  struct Sequence {};
  struct Cache {};

  DenseLinear() = default;
  DenseLinear(const std::string& name, std::size_t out, std::size_t in) : w_(name + ".W", out, in) {}

  std::size_t out_dim() const { return w_.rows(); }
  std::size_t in_dim() const { return w_.cols(); }

  void begin(Sequence&, std::span<const T>) const {}
  void end(Sequence&, std::span<const T>) {}

  void forward(const Sequence&, std::span<const T> x, std::span<T> y, Cache&) const {
    gemv_acc(w_.value, x, y);
  }

  void backward(Sequence&, std::span<const T> x, const Cache&, std::span<const T> dy, std::span<T> dx) {
    ger_acc(w_.grad, dy, x);
    gemv_t_acc(w_.value, dy, dx);
  }

  Matrix<T> compose(std::span<const T>) const { return w_.value; }

  void init(Rng& rng) { w_.init_uniform(rng, in_dim()); }
  void collect(std::vector<Param<T>*>& out) { out.push_back(&w_); }

  Param<T>& weight() { return w_; }
  const Param<T>& weight() const { return w_; }

 private:
  Param<T> w_;
};

template <class T>
class FactoredLinear {
 public:
  struct Sequence {
    Vector<T> scale;      // B s
    Vector<T> scale_grad; // accumulated d(B s)
  };
  struct Cache {
    Vector<T> projected;  // C x
  };

  FactoredLinear() = default;
  FactoredLinear(const std::string& name, std::size_t out, std::size_t in, std::size_t semantic,
                 std::size_t rank)
      : a_(name + ".Wa", out, rank), b_(name + ".Wb", rank, semantic), c_(name + ".Wc", rank, in) {}

  std::size_t out_dim() const { return a_.rows(); }
  std::size_t in_dim() const { return c_.cols(); }
  std::size_t semantic_dim() const { return b_.cols(); }
  std::size_t rank() const { return a_.cols(); }

  void begin(Sequence& seq, std::span<const T> s) const {
    check_dim(s.size(), semantic_dim(), "semantic vector");
    seq.scale.assign(rank(), T(0));
    seq.scale_grad.assign(rank(), T(0));
    gemv_acc(b_.value, s, std::span<T>(seq.scale));
  }

  void end(Sequence& seq, std::span<const T> s) {
    ger_acc(b_.grad, std::span<const T>(seq.scale_grad), s);
    std::fill(seq.scale_grad.begin(), seq.scale_grad.end(), T(0));
  }

  void forward(const Sequence& seq, std::span<const T> x, std::span<T> y, Cache& cache) const {
    check_dim(x.size(), in_dim(), "factored input");
    cache.projected.assign(rank(), T(0));
    gemv_acc(c_.value, x, std::span<T>(cache.projected));
    Vector<T> mid(rank());
    for (std::size_t k = 0; k < rank(); ++k) mid[k] = seq.scale[k] * cache.projected[k];
    gemv_acc(a_.value, std::span<const T>(mid), y);
  }

  void backward(Sequence& seq, std::span<const T> x, const Cache& cache, std::span<const T> dy,
                std::span<T> dx) {
    const auto r = rank();
    Vector<T> mid(r);
    for (std::size_t k = 0; k < r; ++k) mid[k] = seq.scale[k] * cache.projected[k];
    ger_acc(a_.grad, dy, std::span<const T>(mid));
    Vector<T> dmid(r, T(0));
    gemv_t_acc(a_.value, dy, std::span<T>(dmid));
    Vector<T> dproj(r);
    for (std::size_t k = 0; k < r; ++k) {
      seq.scale_grad[k] += dmid[k] * cache.projected[k];
      dproj[k] = dmid[k] * seq.scale[k];
    }
    ger_acc(c_.grad, std::span<const T>(dproj), x);
    gemv_t_acc(c_.value, std::span<const T>(dproj), dx);
  }

  /// Explicit A · diag(B s) · C.
  Matrix<T> compose(std::span<const T> s) const {
    Sequence seq;
    begin(seq, s);
    Matrix<T> scaled(rank(), in_dim());
    for (std::size_t k = 0; k < rank(); ++k) {
      for (std::size_t j = 0; j < in_dim(); ++j) scaled(k, j) = seq.scale[k] * c_.value(k, j);
    }
    return matmul(a_.value, scaled);
  }

  void init(Rng& rng) {
    a_.init_uniform(rng, rank());
    b_.init_uniform(rng, semantic_dim());
    c_.init_uniform(rng, in_dim());
  }
  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&a_);
    out.push_back(&b_);
    out.push_back(&c_);
  }

  Param<T>& wa() { return a_; }
  Param<T>& wb() { return b_; }
  Param<T>& wc() { return c_; }
  const Param<T>& wa() const { return a_; }
  const Param<T>& wb() const { return b_; }
  const Param<T>& wc() const { return c_; }

 private:
  Param<T> a_;  // out x rank
  Param<T> b_;  // rank x semantic
  Param<T> c_;  // rank x in
};

}  // namespace charstory::nnet
