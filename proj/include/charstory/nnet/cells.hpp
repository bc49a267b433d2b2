#pragma once

// GRU and LSTM cells with hand-written backward passes, generic over the
// linear map used for input and recurrent weights. Instantiated with
// FactoredLinear they are the semantically composed SCN cells; with
// DenseLinear they are the conventional cells used by the RT2 decoder.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "charstory/nnet/linear.hpp"
#include "charstory/nnet/tensor.hpp"

namespace charstory::nnet {

template <class T>
struct CellState {
  Vector<T> h;
  Vector<T> c;  // LSTM only
};

/// One gate: pre-activation = W x + U h + b.
template <class T, class Map>
struct Gate {
  Map input;
  Map recurrent;
  Param<T> bias;
};

template <class T, class Map, std::size_t N>
class GateBank {
 public:
  static constexpr std::size_t kGates = N;

  struct Sequence {
    std::array<typename Map::Sequence, N> input;
    std::array<typename Map::Sequence, N> recurrent;
  };

  template <class MakeMap>
  GateBank(const std::string& name, const std::array<const char*, N>& gate_names, std::size_t input_dim,
           std::size_t hidden, MakeMap&& make)
      : input_dim_(input_dim), hidden_(hidden) {
    for (std::size_t g = 0; g < N; ++g) {
      auto prefix = name + "." + gate_names[g];
      gates_[g].input = make(prefix + ".in", hidden, input_dim);
      gates_[g].recurrent = make(prefix + ".rec", hidden, hidden);
      gates_[g].bias = Param<T>(prefix + ".b", hidden, 1);
    }
  }
  GateBank() = default;

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }
  Gate<T, Map>& gate(std::size_t g) { return gates_[g]; }
  const Gate<T, Map>& gate(std::size_t g) const { return gates_[g]; }

  void begin(Sequence& seq, std::span<const T> s) const {
    for (std::size_t g = 0; g < N; ++g) {
      gates_[g].input.begin(seq.input[g], s);
      gates_[g].recurrent.begin(seq.recurrent[g], s);
    }
  }
  void end(Sequence& seq, std::span<const T> s) {
    for (std::size_t g = 0; g < N; ++g) {
      gates_[g].input.end(seq.input[g], s);
      gates_[g].recurrent.end(seq.recurrent[g], s);
    }
  }

  void init(Rng& rng) {
    for (auto& g : gates_) {
      g.input.init(rng);
      g.recurrent.init(rng);
      g.bias.init_uniform(rng, hidden_);
    }
  }

  void collect(std::vector<Param<T>*>& out) {
    for (auto& g : gates_) {
      g.input.collect(out);
      g.recurrent.collect(out);
      out.push_back(&g.bias);
    }
  }

 protected:
  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
  std::array<Gate<T, Map>, N> gates_;
};

/// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
/// n = tanh(W_n x + U_n (r ⊙ h) + b_n), h' = (1 - z) ⊙ h + z ⊙ n.
template <class T, class Map>
class GruCell : public GateBank<T, Map, 3> {
  using Base = GateBank<T, Map, 3>;

 public:
  enum : std::size_t { kUpdate = 0, kReset = 1, kCandidate = 2 };
  static constexpr bool kHasCell = false;
  using Sequence = typename Base::Sequence;

  struct Cache {
    Vector<T> x, h_prev, z, r, n, rh;
    std::array<typename Map::Cache, 3> in, rec;
  };

  GruCell() = default;
  template <class MakeMap>
  GruCell(const std::string& name, std::size_t input_dim, std::size_t hidden, MakeMap&& make)
      : Base(name, {"z", "r", "n"}, input_dim, hidden, make) {}

  CellState<T> zero_state() const { return {Vector<T>(this->hidden_, T(0)), {}}; }

  void forward(const Sequence& seq, std::span<const T> x, const CellState<T>& prev, CellState<T>& next,
               Cache& cache) const {
    const auto h = this->hidden_;
    check_dim(x.size(), this->input_dim_, "gru input");
    check_dim(prev.h.size(), h, "gru state");
    cache.x.assign(x.begin(), x.end());
    cache.h_prev = prev.h;
    auto preact = [&](std::size_t g, std::span<const T> rec_in) {
      const auto& gate = this->gates_[g];
      Vector<T> a(gate.bias.value.data);
      gate.input.forward(seq.input[g], x, std::span<T>(a), cache.in[g]);
      gate.recurrent.forward(seq.recurrent[g], rec_in, std::span<T>(a), cache.rec[g]);
      return a;
    };
    std::span<const T> hp(prev.h);
    cache.z = preact(kUpdate, hp);
    cache.r = preact(kReset, hp);
    for (auto& v : cache.z) v = sigmoid(v);
    for (auto& v : cache.r) v = sigmoid(v);
    cache.rh.resize(h);
    for (std::size_t i = 0; i < h; ++i) cache.rh[i] = cache.r[i] * prev.h[i];
    cache.n = preact(kCandidate, std::span<const T>(cache.rh));
    for (auto& v : cache.n) v = std::tanh(v);
    next.h.resize(h);
    next.c.clear();
    for (std::size_t i = 0; i < h; ++i) {
      next.h[i] = (T(1) - cache.z[i]) * prev.h[i] + cache.z[i] * cache.n[i];
    }
  }

  /// `dnext.h` is dL/dh'. Adds dL/dh to `dprev.h` and dL/dx to `dx`.
  void backward(Sequence& seq, const Cache& cache, const CellState<T>& dnext, CellState<T>& dprev,
                std::span<T> dx) {
    const auto h = this->hidden_;
    dprev.h.resize(h, T(0));
    Vector<T> dz(h), dn(h), drh(h, T(0)), dr(h);
    for (std::size_t i = 0; i < h; ++i) {
      const T g = dnext.h[i];
      dprev.h[i] += g * (T(1) - cache.z[i]);
      dz[i] = g * (cache.n[i] - cache.h_prev[i]) * cache.z[i] * (T(1) - cache.z[i]);
      dn[i] = g * cache.z[i] * (T(1) - cache.n[i] * cache.n[i]);
    }
    auto& gn = this->gates_[kCandidate];
    add_bias_grad(gn.bias, dn);
    gn.input.backward(seq.input[kCandidate], cache.x, cache.in[kCandidate], dn, dx);
    gn.recurrent.backward(seq.recurrent[kCandidate], cache.rh, cache.rec[kCandidate], dn, std::span<T>(drh));
    for (std::size_t i = 0; i < h; ++i) {
      dprev.h[i] += drh[i] * cache.r[i];
      dr[i] = drh[i] * cache.h_prev[i] * cache.r[i] * (T(1) - cache.r[i]);
    }
    backward_gate(seq, kReset, cache, dr, dprev, dx);
    backward_gate(seq, kUpdate, cache, dz, dprev, dx);
  }

 private:
  static void add_bias_grad(Param<T>& b, const Vector<T>& d) {
    for (std::size_t i = 0; i < d.size(); ++i) b.grad.data[i] += d[i];
  }
  void backward_gate(Sequence& seq, std::size_t g, const Cache& cache, const Vector<T>& dpre,
                     CellState<T>& dprev, std::span<T> dx) {
    auto& gate = this->gates_[g];
    add_bias_grad(gate.bias, dpre);
    gate.input.backward(seq.input[g], cache.x, cache.in[g], dpre, dx);
    gate.recurrent.backward(seq.recurrent[g], cache.h_prev, cache.rec[g], dpre, std::span<T>(dprev.h));
  }
};

/// i, f, o = σ(·), g = tanh(·), c' = f ⊙ c + i ⊙ g, h' = o ⊙ tanh(c').
template <class T, class Map>
class LstmCell : public GateBank<T, Map, 4> {
  using Base = GateBank<T, Map, 4>;

 public:
  enum : std::size_t { kInput = 0, kForget = 1, kOutput = 2, kCandidate = 3 };
  static constexpr bool kHasCell = true;
  using Sequence = typename Base::Sequence;

  struct Cache {
    Vector<T> x, h_prev, c_prev, i, f, o, g, c, tanh_c;
    std::array<typename Map::Cache, 4> in, rec;
  };

  LstmCell() = default;
  template <class MakeMap>
  LstmCell(const std::string& name, std::size_t input_dim, std::size_t hidden, MakeMap&& make)
      : Base(name, {"i", "f", "o", "c"}, input_dim, hidden, make) {}

  CellState<T> zero_state() const {
    return {Vector<T>(this->hidden_, T(0)), Vector<T>(this->hidden_, T(0))};
  }

  /// Standard init plus forget-gate bias 1.
  void init(Rng& rng) {
    Base::init(rng);
    this->gates_[kForget].bias.fill(T(1));
  }

  void forward(const Sequence& seq, std::span<const T> x, const CellState<T>& prev, CellState<T>& next,
               Cache& cache) const {
    const auto h = this->hidden_;
    check_dim(x.size(), this->input_dim_, "lstm input");
    check_dim(prev.h.size(), h, "lstm state");
    check_dim(prev.c.size(), h, "lstm cell");
    cache.x.assign(x.begin(), x.end());
    cache.h_prev = prev.h;
    cache.c_prev = prev.c;
    std::span<const T> hp(prev.h);
    auto preact = [&](std::size_t g) {
      const auto& gate = this->gates_[g];
      Vector<T> a(gate.bias.value.data);
      gate.input.forward(seq.input[g], x, std::span<T>(a), cache.in[g]);
      gate.recurrent.forward(seq.recurrent[g], hp, std::span<T>(a), cache.rec[g]);
      return a;
    };
    cache.i = preact(kInput);
    cache.f = preact(kForget);
    cache.o = preact(kOutput);
    cache.g = preact(kCandidate);
    for (std::size_t k = 0; k < h; ++k) {
      cache.i[k] = sigmoid(cache.i[k]);
      cache.f[k] = sigmoid(cache.f[k]);
      cache.o[k] = sigmoid(cache.o[k]);
      cache.g[k] = std::tanh(cache.g[k]);
    }
    cache.c.resize(h);
    cache.tanh_c.resize(h);
    next.h.resize(h);
    next.c.resize(h);
    for (std::size_t k = 0; k < h; ++k) {
      cache.c[k] = cache.f[k] * prev.c[k] + cache.i[k] * cache.g[k];
      cache.tanh_c[k] = std::tanh(cache.c[k]);
      next.c[k] = cache.c[k];
      next.h[k] = cache.o[k] * cache.tanh_c[k];
    }
  }

  void backward(Sequence& seq, const Cache& cache, const CellState<T>& dnext, CellState<T>& dprev,
                std::span<T> dx) {
    const auto h = this->hidden_;
    dprev.h.resize(h, T(0));
    dprev.c.resize(h, T(0));
    std::array<Vector<T>, 4> d;
    for (auto& v : d) v.resize(h);
    for (std::size_t k = 0; k < h; ++k) {
      const T dh = dnext.h[k];
      const T dc_in = dnext.c.empty() ? T(0) : dnext.c[k];
      const T dc = dc_in + dh * cache.o[k] * (T(1) - cache.tanh_c[k] * cache.tanh_c[k]);
      d[kOutput][k] = dh * cache.tanh_c[k] * cache.o[k] * (T(1) - cache.o[k]);
      d[kInput][k] = dc * cache.g[k] * cache.i[k] * (T(1) - cache.i[k]);
      d[kForget][k] = dc * cache.c_prev[k] * cache.f[k] * (T(1) - cache.f[k]);
      d[kCandidate][k] = dc * cache.i[k] * (T(1) - cache.g[k] * cache.g[k]);
      dprev.c[k] += dc * cache.f[k];
    }
    for (std::size_t g = 0; g < 4; ++g) {
      auto& gate = this->gates_[g];
      for (std::size_t k = 0; k < h; ++k) gate.bias.grad.data[k] += d[g][k];
      gate.input.backward(seq.input[g], cache.x, cache.in[g], d[g], dx);
      gate.recurrent.backward(seq.recurrent[g], cache.h_prev, cache.rec[g], d[g], std::span<T>(dprev.h));
    }
  }
};

template <class T>
auto factored_maker(std::size_t semantic_dim, std::size_t rank) {
  return [=](const std::string& name, std::size_t out, std::size_t in) {
    return FactoredLinear<T>(name, out, in, semantic_dim, rank);
  };
}

template <class T>
auto dense_maker() {
  return [](const std::string& name, std::size_t out, std::size_t in) { return DenseLinear<T>(name, out, in); };
}

template <class T>
using ScnGruCell = GruCell<T, FactoredLinear<T>>;
template <class T>
using ScnLstmCell = LstmCell<T, FactoredLinear<T>>;
template <class T>
using PlainLstmCell = LstmCell<T, DenseLinear<T>>;
template <class T>
using PlainGruCell = GruCell<T, DenseLinear<T>>;

template <class T>
ScnGruCell<T> make_scn_gru(const std::string& name, std::size_t input_dim, std::size_t hidden,
                           std::size_t semantic_dim, std::size_t rank) {
  return ScnGruCell<T>(name, input_dim, hidden, factored_maker<T>(semantic_dim, rank));
}

template <class T>
ScnLstmCell<T> make_scn_lstm(const std::string& name, std::size_t input_dim, std::size_t hidden,
                             std::size_t semantic_dim, std::size_t rank) {
  return ScnLstmCell<T>(name, input_dim, hidden, factored_maker<T>(semantic_dim, rank));
}

template <class T>
PlainLstmCell<T> make_lstm(const std::string& name, std::size_t input_dim, std::size_t hidden) {
  return PlainLstmCell<T>(name, input_dim, hidden, dense_maker<T>());
}

/// Effective per-gate matrices of an SCN cell for semantics s.
template <class T>
struct ComposedGates {
  std::vector<Matrix<T>> input;      // h x d_in per gate
  std::vector<Matrix<T>> recurrent;  // h x h per gate
};

template <class T, class Cell>
ComposedGates<T> scn_compose(const Cell& cell, std::span<const T> s) {
  ComposedGates<T> out;
  for (std::size_t g = 0; g < Cell::kGates; ++g) {
    out.input.push_back(cell.gate(g).input.compose(s));
    out.recurrent.push_back(cell.gate(g).recurrent.compose(s));
  }
  return out;
}

/// Inverted dropout: zeroes with probability p and scales survivors by
/// 1/(1-p). An empty mask is the identity.
template <class T>
Vector<T> dropout_mask(std::size_t n, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw PreconditionError("dropout probability must be in [0, 1)");
  Vector<T> mask(n);
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (auto& m : mask) m = rng.uniform() < p ? T(0) : keep;
  return mask;
}

template <class T>
void apply_mask(std::span<T> v, const Vector<T>& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mask[i];
}

/// Training-time dropout settings for the single-step helpers; `rng ==
/// nullptr` means inference.
struct DropoutState {
  double p = 0.0;
  Rng* rng = nullptr;
};

/// One SCN-GRU step; returns h_t (dropped out when training).
template <class T>
Vector<T> scn_gru_step(const ScnGruCell<T>& cell, std::span<const T> s, std::span<const T> x,
                       std::span<const T> h_prev, DropoutState dropout = {}) {
  typename ScnGruCell<T>::Sequence seq;
  cell.begin(seq, s);
  CellState<T> prev{Vector<T>(h_prev.begin(), h_prev.end()), {}};
  CellState<T> next;
  typename ScnGruCell<T>::Cache cache;
  cell.forward(seq, x, prev, next, cache);
  if (dropout.rng && dropout.p > 0.0) apply_mask(std::span<T>(next.h), dropout_mask<T>(next.h.size(), dropout.p, *dropout.rng));
  return next.h;
}

/// One SCN-LSTM step; returns (h_t, c_t).
template <class T>
CellState<T> scn_lstm_step(const ScnLstmCell<T>& cell, std::span<const T> s, std::span<const T> x,
                           std::span<const T> h_prev, std::span<const T> c_prev, DropoutState dropout = {}) {
  typename ScnLstmCell<T>::Sequence seq;
  cell.begin(seq, s);
  CellState<T> prev{Vector<T>(h_prev.begin(), h_prev.end()), Vector<T>(c_prev.begin(), c_prev.end())};
  CellState<T> next;
  typename ScnLstmCell<T>::Cache cache;
  cell.forward(seq, x, prev, next, cache);
  if (dropout.rng && dropout.p > 0.0) apply_mask(std::span<T>(next.h), dropout_mask<T>(next.h.size(), dropout.p, *dropout.rng));
  return next;
}

/// Conventional LSTM step over the concatenated input [x ; s_proj].
template <class T>
CellState<T> rt2_lstm_step(const PlainLstmCell<T>& cell, std::span<const T> s_proj, std::span<const T> x,
                           std::span<const T> h_prev, std::span<const T> c_prev, DropoutState dropout = {}) {
  check_dim(x.size() + s_proj.size(), cell.input_dim(), "rt2 input [x; s_proj]");
  Vector<T> joined(x.begin(), x.end());
  joined.insert(joined.end(), s_proj.begin(), s_proj.end());
  typename PlainLstmCell<T>::Sequence seq;
  CellState<T> prev{Vector<T>(h_prev.begin(), h_prev.end()), Vector<T>(c_prev.begin(), c_prev.end())};
  CellState<T> next;
  typename PlainLstmCell<T>::Cache cache;
  cell.forward(seq, joined, prev, next, cache);
  if (dropout.rng && dropout.p > 0.0) apply_mask(std::span<T>(next.h), dropout_mask<T>(next.h.size(), dropout.p, *dropout.rng));
  return next;
}

}  // namespace charstory::nnet
