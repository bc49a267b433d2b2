#pragma once

// Encoder / semantic decoder story model.
//
// Encoder: each of the 5 photo features is projected F -> embed and read by
// a single-layer tanh RNN; its final state is the subject vector. The 5F
// concatenation is separately projected to embed (seq_embed).
//
// Decoder: stacked recurrent cells whose every layer starts from the subject
// vector. Step 0 reads seq_embed and its prediction is discarded; then
// <bos> w1 .. wn are read and w1 .. wn <eos> are predicted. Dropout acts on
// each layer's upward output, never on the recurrent state.

#include <cmath>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "charstory/corpus.hpp"
#include "charstory/model/config.hpp"
#include "charstory/nnet/cells.hpp"
#include "charstory/nnet/loss.hpp"
#include "charstory/nnet/tensor.hpp"

namespace charstory::model {

using nnet::CellState;
using nnet::Matrix;
using nnet::Param;
using nnet::Rng;
using nnet::Vector;

template <class T>
struct EncoderOutput {
  Vector<T> subject;    // hidden
  Vector<T> seq_embed;  // embed
};

template <class T>
class Encoder {
 public:
  struct Trace {
    Vector<T> features;              // 5F
    std::vector<Vector<T>> embedded;  // per photo, embed
    std::vector<Vector<T>> states;    // h_0 .. h_5
  };

  Encoder() = default;
  Encoder(std::size_t feature_dim, std::size_t embed_dim, std::size_t hidden)
      : feature_dim_(feature_dim),
        proj_w_("encoder.proj.W", embed_dim, feature_dim),
        proj_b_("encoder.proj.b", embed_dim, 1),
        rnn_wx_("encoder.rnn.Wx", hidden, embed_dim),
        rnn_wh_("encoder.rnn.Wh", hidden, hidden),
        rnn_b_("encoder.rnn.b", hidden, 1),
        seq_w_("encoder.seq.W", embed_dim, corpus::kStoryLength * feature_dim),
        seq_b_("encoder.seq.b", embed_dim, 1) {}

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t embed_dim() const { return proj_w_.rows(); }
  std::size_t hidden() const { return rnn_wh_.rows(); }

  void init(Rng& rng) {
    proj_w_.init_uniform(rng, feature_dim_);
    proj_b_.init_uniform(rng, feature_dim_);
    rnn_wx_.init_uniform(rng, embed_dim());
    rnn_wh_.init_uniform(rng, hidden());
    rnn_b_.init_uniform(rng, hidden());
    seq_w_.init_uniform(rng, seq_w_.cols());
    seq_b_.init_uniform(rng, seq_w_.cols());
  }

  void collect(std::vector<Param<T>*>& out) {
    for (auto* p : {&proj_w_, &proj_b_, &rnn_wx_, &rnn_wh_, &rnn_b_, &seq_w_, &seq_b_}) out.push_back(p);
  }

  /// `features` is the 5F concatenation in photo order.
  EncoderOutput<T> forward(std::span<const T> features, Trace* trace = nullptr) const {
    nnet::check_dim(features.size(), corpus::kStoryLength * feature_dim_, "encoder features (5 x F)");
    const auto e = embed_dim();
    const auto h = hidden();
    Trace local;
    Trace& tr = trace ? *trace : local;
    tr.features.assign(features.begin(), features.end());
    tr.embedded.assign(corpus::kStoryLength, Vector<T>());
    tr.states.assign(corpus::kStoryLength + 1, Vector<T>(h, T(0)));
    for (std::size_t k = 0; k < corpus::kStoryLength; ++k) {
      auto f = features.subspan(k * feature_dim_, feature_dim_);
      auto& emb = tr.embedded[k];
      emb = proj_b_.value.data;
      nnet::gemv_acc(proj_w_.value, f, std::span<T>(emb));
      auto& next = tr.states[k + 1];
      next = rnn_b_.value.data;
      nnet::gemv_acc(rnn_wx_.value, std::span<const T>(emb), std::span<T>(next));
      nnet::gemv_acc(rnn_wh_.value, std::span<const T>(tr.states[k]), std::span<T>(next));
      for (auto& v : next) v = std::tanh(v);
    }
    EncoderOutput<T> out;
    out.subject = tr.states.back();
    out.seq_embed = seq_b_.value.data;
    nnet::gemv_acc(seq_w_.value, features, std::span<T>(out.seq_embed));
    (void)e;
    return out;
  }

  void backward(const Trace& tr, std::span<const T> d_subject, std::span<const T> d_seq_embed) {
    const auto h = hidden();
    const auto e = embed_dim();
    std::span<const T> features(tr.features);
    nnet::ger_acc(seq_w_.grad, d_seq_embed, features);
    for (std::size_t i = 0; i < e; ++i) seq_b_.grad.data[i] += d_seq_embed[i];
    Vector<T> dh(d_subject.begin(), d_subject.end());
    for (std::size_t k = corpus::kStoryLength; k-- > 0;) {
      const auto& out = tr.states[k + 1];
      Vector<T> dpre(h);
      for (std::size_t i = 0; i < h; ++i) dpre[i] = dh[i] * (T(1) - out[i] * out[i]);
      for (std::size_t i = 0; i < h; ++i) rnn_b_.grad.data[i] += dpre[i];
      nnet::ger_acc(rnn_wx_.grad, std::span<const T>(dpre), std::span<const T>(tr.embedded[k]));
      nnet::ger_acc(rnn_wh_.grad, std::span<const T>(dpre), std::span<const T>(tr.states[k]));
      Vector<T> demb(e, T(0));
      nnet::gemv_t_acc(rnn_wx_.value, std::span<const T>(dpre), std::span<T>(demb));
      Vector<T> dprev(h, T(0));
      nnet::gemv_t_acc(rnn_wh_.value, std::span<const T>(dpre), std::span<T>(dprev));
      for (std::size_t i = 0; i < e; ++i) proj_b_.grad.data[i] += demb[i];
      nnet::ger_acc(proj_w_.grad, std::span<const T>(demb), features.subspan(k * feature_dim_, feature_dim_));
      dh = std::move(dprev);
    }
  }

 private:
  std::size_t feature_dim_ = 0;
  Param<T> proj_w_, proj_b_, rnn_wx_, rnn_wh_, rnn_b_, seq_w_, seq_b_;
};

/// Concatenates the five per-photo vectors after checking count and size.
template <class T>
Vector<T> concat_features(std::span<const Vector<T>> photos, std::size_t feature_dim) {
  if (photos.size() != corpus::kStoryLength) {
    throw DimensionError("expected 5 feature vectors, got " + std::to_string(photos.size()));
  }
  Vector<T> flat;
  flat.reserve(corpus::kStoryLength * feature_dim);
  for (const auto& p : photos) {
    nnet::check_dim(p.size(), feature_dim, "photo feature");
    flat.insert(flat.end(), p.begin(), p.end());
  }
  return flat;
}

/// (subject vector, seq_embed) for five photo features.
template <class T>
EncoderOutput<T> encode_sequence(const Encoder<T>& encoder, std::span<const Vector<T>> photos) {
  auto flat = concat_features<T>(photos, encoder.feature_dim());
  return encoder.forward(flat);
}

/// Stack of recurrent layers sharing one semantic vector. With
/// `kConcatSemantics` every layer reads [input ; P s + p] (RT2); otherwise
/// the cells consume s through their factored weights (SCN).
template <class T, class Cell, bool kConcatSemantics>
class Decoder {
 public:
  struct Context {
    Vector<T> s;
    Vector<T> s_proj;
    Vector<T> s_proj_grad;
    std::vector<typename Cell::Sequence> seqs;
  };
  using States = std::vector<CellState<T>>;
  struct StepTrace {
    std::vector<typename Cell::Cache> caches;
    std::vector<Vector<T>> masks;  // per layer output
  };

  Decoder() = default;
  template <class Make>
  Decoder(const ModelConfig& cfg, Make&& make_cell) {
    const std::size_t extra = kConcatSemantics ? cfg.embed_dim : 0;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      auto in = (l == 0 ? cfg.embed_dim : cfg.hidden) + extra;
      layers_.push_back(make_cell("decoder.l" + std::to_string(l), in, cfg.hidden));
    }
    if constexpr (kConcatSemantics) {
      sem_w_ = Param<T>("decoder.sem.W", cfg.embed_dim, cfg.semantic_dim);
      sem_b_ = Param<T>("decoder.sem.b", cfg.embed_dim, 1);
    }
  }

  std::size_t layers() const { return layers_.size(); }
  std::size_t hidden() const { return layers_.front().hidden(); }
  Cell& layer(std::size_t l) { return layers_[l]; }

  void init(Rng& rng) {
    for (auto& l : layers_) l.init(rng);
    if constexpr (kConcatSemantics) {
      sem_w_.init_uniform(rng, sem_w_.cols());
      sem_b_.init_uniform(rng, sem_w_.cols());
    }
  }

  void collect(std::vector<Param<T>*>& out) {
    for (auto& l : layers_) l.collect(out);
    if constexpr (kConcatSemantics) {
      out.push_back(&sem_w_);
      out.push_back(&sem_b_);
    }
  }

  void begin(Context& ctx, std::span<const T> s) const {
    ctx.s.assign(s.begin(), s.end());
    ctx.seqs.resize(layers_.size());
    if constexpr (kConcatSemantics) {
      nnet::check_dim(s.size(), sem_w_.cols(), "semantic vector");
      ctx.s_proj = sem_b_.value.data;
      nnet::gemv_acc(sem_w_.value, s, std::span<T>(ctx.s_proj));
      ctx.s_proj_grad.assign(ctx.s_proj.size(), T(0));
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) layers_[l].begin(ctx.seqs[l], s);
  }

  void end(Context& ctx) {
    for (std::size_t l = 0; l < layers_.size(); ++l) layers_[l].end(ctx.seqs[l], ctx.s);
    if constexpr (kConcatSemantics) {
      nnet::ger_acc(sem_w_.grad, std::span<const T>(ctx.s_proj_grad), std::span<const T>(ctx.s));
      for (std::size_t i = 0; i < ctx.s_proj_grad.size(); ++i) sem_b_.grad.data[i] += ctx.s_proj_grad[i];
    }
  }

  States initial_states(std::span<const T> subject) const {
    States st;
    for (const auto& l : layers_) {
      auto s = l.zero_state();
      s.h.assign(subject.begin(), subject.end());
      st.push_back(std::move(s));
    }
    return st;
  }

  /// Runs every layer once. Returns the (dropped-out) top output.
  Vector<T> step(const Context& ctx, std::span<const T> x, const States& prev, States& next, StepTrace& trace,
                 double dropout, Rng* rng) const {
    next.resize(layers_.size());
    trace.caches.resize(layers_.size());
    trace.masks.assign(layers_.size(), Vector<T>());
    Vector<T> input(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if constexpr (kConcatSemantics) input.insert(input.end(), ctx.s_proj.begin(), ctx.s_proj.end());
      layers_[l].forward(ctx.seqs[l], std::span<const T>(input), prev[l], next[l], trace.caches[l]);
      input = next[l].h;
      if (rng && dropout > 0.0) {
        trace.masks[l] = nnet::dropout_mask<T>(input.size(), dropout, *rng);
        nnet::apply_mask(std::span<T>(input), trace.masks[l]);
      }
    }
    return input;
  }

  /// `d_top` is dL/d(top output); `dnext` carries dL/d(state) from the
  /// following step and is replaced by dL/d(previous state). Returns dL/dx.
  Vector<T> backward_step(Context& ctx, const StepTrace& trace, std::span<const T> d_top, States& dnext,
                          std::size_t input_dim) {
    Vector<T> d_out(d_top.begin(), d_top.end());
    States dprev(layers_.size());
    Vector<T> dx;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      nnet::apply_mask(std::span<T>(d_out), trace.masks[l]);
      CellState<T> dstate = dnext[l];
      for (std::size_t i = 0; i < d_out.size(); ++i) dstate.h[i] += d_out[i];
      auto& cell = layers_[l];
      Vector<T> din(cell.input_dim(), T(0));
      CellState<T> dp;
      dp.h.assign(cell.hidden(), T(0));
      if (Cell::kHasCell) dp.c.assign(cell.hidden(), T(0));
      cell.backward(ctx.seqs[l], trace.caches[l], dstate, dp, std::span<T>(din));
      dprev[l] = std::move(dp);
      std::size_t own = din.size();
      if constexpr (kConcatSemantics) {
        own = din.size() - ctx.s_proj.size();
        for (std::size_t i = 0; i < ctx.s_proj.size(); ++i) ctx.s_proj_grad[i] += din[own + i];
      }
      d_out.assign(din.begin(), din.begin() + static_cast<std::ptrdiff_t>(own));
    }
    dnext = std::move(dprev);
    dx = std::move(d_out);
    nnet::check_dim(dx.size(), input_dim, "decoder input gradient");
    return dx;
  }

  States zero_grads(std::size_t hidden) const {
    States st(layers_.size());
    for (auto& s : st) {
      s.h.assign(hidden, T(0));
      if (Cell::kHasCell) s.c.assign(hidden, T(0));
    }
    return st;
  }

 private:
  std::vector<Cell> layers_;
  Param<T> sem_w_, sem_b_;
};

template <class T>
using ScnGruDecoder = Decoder<T, nnet::ScnGruCell<T>, false>;
template <class T>
using ScnLstmDecoder = Decoder<T, nnet::ScnLstmCell<T>, false>;
template <class T>
using Rt2Decoder = Decoder<T, nnet::PlainLstmCell<T>, true>;

/// Accumulates in at least double; a long double model keeps its precision.
template <class T>
struct SequenceLoss {
  std::common_type_t<T, double> loss_sum = 0;  // summed token cross-entropy
  std::size_t tokens = 0;    // number of predicted tokens
};

/// Full model: encoder, embedding, semantic decoder and output layer.
template <class T>
class StoryModel {
 public:
  using DecoderVariant = std::variant<ScnGruDecoder<T>, ScnLstmDecoder<T>, Rt2Decoder<T>>;

  StoryModel(const ModelConfig& cfg, std::size_t vocab_size, std::uint64_t seed = 0)
      : cfg_(cfg),
        vocab_size_(vocab_size),
        encoder_(cfg.feature_dim, cfg.embed_dim, cfg.hidden),
        embedding_("embedding", vocab_size, cfg.embed_dim),
        out_w_("output.W", vocab_size, cfg.hidden),
        out_b_("output.b", vocab_size, 1) {
    cfg.validate();
    if (vocab_size <= corpus::Vocabulary::kSpecials) throw PreconditionError("vocabulary has no ordinary tokens");
    switch (cfg.variant) {
      case Variant::ScnGru:
        decoder_ = ScnGruDecoder<T>(cfg, [&](const std::string& n, std::size_t in, std::size_t h) {
          return nnet::make_scn_gru<T>(n, in, h, cfg.semantic_dim, cfg.rank);
        });
        break;
      case Variant::ScnLstm:
        decoder_ = ScnLstmDecoder<T>(cfg, [&](const std::string& n, std::size_t in, std::size_t h) {
          return nnet::make_scn_lstm<T>(n, in, h, cfg.semantic_dim, cfg.rank);
        });
        break;
      case Variant::Rt2Lstm:
        decoder_ = Rt2Decoder<T>(cfg, [&](const std::string& n, std::size_t in, std::size_t h) {
          return nnet::make_lstm<T>(n, in, h);
        });
        break;
    }
    Rng rng(seed);
    encoder_.init(rng);
    embedding_.init_uniform(rng, vocab_size);
    std::visit([&](auto& d) { d.init(rng); }, decoder_);
    out_w_.init_uniform(rng, cfg.hidden);
    out_b_.init_uniform(rng, cfg.hidden);
  }

  const ModelConfig& config() const { return cfg_; }
  std::size_t vocab_size() const { return vocab_size_; }
  Encoder<T>& encoder() { return encoder_; }
  const Encoder<T>& encoder() const { return encoder_; }

  /// Every trainable tensor, in a fixed order with unique names.
  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    encoder_.collect(out);
    out.push_back(&embedding_);
    std::visit([&](auto& d) { d.collect(out); }, decoder_);
    out.push_back(&out_w_);
    out.push_back(&out_b_);
    return out;
  }

  /// Teacher-forced loss of one story (tokens without BOS/EOS). When
  /// `grad_scale` is non-zero, dL/dθ · grad_scale is accumulated into the
  /// parameter gradients. `dropout_rng == nullptr` disables dropout.
  SequenceLoss<T> forward_backward(std::span<const T> features, std::span<const T> semantics,
                                std::span<const std::uint32_t> story, T grad_scale, Rng* dropout_rng) {
    return std::visit(
        [&](auto& dec) { return run_sequence(dec, features, semantics, story, grad_scale, dropout_rng); },
        decoder_);
  }

  SequenceLoss<T> loss(std::span<const T> features, std::span<const T> semantics,
                    std::span<const std::uint32_t> story) {
    return forward_backward(features, semantics, story, T(0), nullptr);
  }

  /// Incremental decoding state.
  struct Session {
    std::variant<typename ScnGruDecoder<T>::Context, typename ScnLstmDecoder<T>::Context,
                 typename Rt2Decoder<T>::Context>
        context;
    std::vector<CellState<T>> states;
    Vector<T> logits;  // prediction after the last consumed input
  };

  /// Encodes the photos, feeds seq_embed and returns the session whose
  /// `logits` are the step-0 decoder logits.
  Session start(std::span<const T> features, std::span<const T> semantics) const {
    return std::visit(
        [&](const auto& dec) {
          using Dec = std::decay_t<decltype(dec)>;
          Session session;
          auto enc = encoder_.forward(features);
          typename Dec::Context ctx;
          dec.begin(ctx, semantics);
          auto states = dec.initial_states(std::span<const T>(enc.subject));
          typename Dec::States next;
          typename Dec::StepTrace trace;
          auto top = dec.step(ctx, std::span<const T>(enc.seq_embed), states, next, trace, 0.0, nullptr);
          session.logits = project(top);
          session.states = std::move(next);
          session.context = std::move(ctx);
          return session;
        },
        decoder_);
  }

  /// Feeds one token and updates the session logits.
  void advance(Session& session, std::uint32_t token) const {
    if (token >= vocab_size_) throw IndexError("token id out of range");
    std::visit(
        [&](const auto& dec) {
          using Dec = std::decay_t<decltype(dec)>;
          const auto& ctx = std::get<typename Dec::Context>(session.context);
          typename Dec::States next;
          typename Dec::StepTrace trace;
          auto top = dec.step(ctx, embedding_.value.row(token), session.states, next, trace, 0.0, nullptr);
          session.logits = project(top);
          session.states = std::move(next);
        },
        decoder_);
  }

 private:
  Vector<T> project(const Vector<T>& top) const {
    Vector<T> logits = out_b_.value.data;
    nnet::gemv_acc(out_w_.value, std::span<const T>(top), std::span<T>(logits));
    return logits;
  }

  template <class Dec>
  SequenceLoss<T> run_sequence(Dec& dec, std::span<const T> features, std::span<const T> semantics,
                            std::span<const std::uint32_t> story, T grad_scale, Rng* rng) {
    const bool backward = grad_scale != T(0);
    const double p = rng ? cfg_.dropout : 0.0;
    for (auto t : story) {
      if (t >= vocab_size_) throw IndexError("story token id out of range");
    }
    typename Encoder<T>::Trace enc_trace;
    auto enc = encoder_.forward(features, &enc_trace);
    typename Dec::Context ctx;
    dec.begin(ctx, semantics);

    // inputs: seq_embed, <bos>, w1..wn ; targets for steps 1..n+1: w1..wn, <eos>
    const std::size_t steps = story.size() + 2;
    std::vector<typename Dec::States> states(steps + 1);
    std::vector<typename Dec::StepTrace> traces(steps);
    std::vector<Vector<T>> tops(steps);
    std::vector<Vector<T>> dlogits(steps);
    states[0] = dec.initial_states(std::span<const T>(enc.subject));
    SequenceLoss<T> result;
    for (std::size_t t = 0; t < steps; ++t) {
      std::span<const T> x;
      if (t == 0) {
        x = std::span<const T>(enc.seq_embed);
      } else {
        auto tok = t == 1 ? corpus::Vocabulary::kBos : story[t - 2];
        x = embedding_.value.row(tok);
      }
      tops[t] = dec.step(ctx, x, states[t], states[t + 1], traces[t], p, rng);
      if (t == 0) continue;
      auto target = t - 1 < story.size() ? story[t - 1] : corpus::Vocabulary::kEos;
      auto logits = project(tops[t]);
      if (backward) dlogits[t].assign(logits.size(), T(0));
      auto l = nnet::softmax_xent<T>(std::span<const T>(logits), target,
                                     backward ? std::span<T>(dlogits[t]) : std::span<T>());
      result.loss_sum += l;
      ++result.tokens;
    }
    if (!backward) return result;

    auto dstate = dec.zero_grads(cfg_.hidden);
    Vector<T> d_seq_embed;
    for (std::size_t t = steps; t-- > 0;) {
      Vector<T> d_top(cfg_.hidden, T(0));
      if (t > 0) {
        for (auto& g : dlogits[t]) g *= grad_scale;
        nnet::ger_acc(out_w_.grad, std::span<const T>(dlogits[t]), std::span<const T>(tops[t]));
        for (std::size_t i = 0; i < dlogits[t].size(); ++i) out_b_.grad.data[i] += dlogits[t][i];
        nnet::gemv_t_acc(out_w_.value, std::span<const T>(dlogits[t]), std::span<T>(d_top));
      }
      auto dx = dec.backward_step(ctx, traces[t], std::span<const T>(d_top), dstate, cfg_.embed_dim);
      if (t == 0) {
        d_seq_embed = std::move(dx);
      } else {
        auto tok = t == 1 ? corpus::Vocabulary::kBos : story[t - 2];
        auto row = embedding_.grad.row(tok);
        for (std::size_t i = 0; i < row.size(); ++i) row[i] += dx[i];
      }
    }
    Vector<T> d_subject(cfg_.hidden, T(0));
    for (const auto& s : dstate) {
      for (std::size_t i = 0; i < d_subject.size(); ++i) d_subject[i] += s.h[i];
    }
    dec.end(ctx);
    encoder_.backward(enc_trace, std::span<const T>(d_subject), std::span<const T>(d_seq_embed));
    return result;
  }

  ModelConfig cfg_;
  std::size_t vocab_size_;
  Encoder<T> encoder_;
  Param<T> embedding_;
  DecoderVariant decoder_;
  Param<T> out_w_, out_b_;
};

}  // namespace charstory::model
