#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "charstory/error.hpp"
#include "charstory/text.hpp"

namespace charstory::model {

enum class Variant { ScnGru, ScnLstm, Rt2Lstm };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::ScnGru: return "scn-gru";
    case Variant::ScnLstm: return "scn-lstm";
    case Variant::Rt2Lstm: return "rt2-lstm";
  }
  return "scn-gru";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "scn-gru") return Variant::ScnGru;
  if (s == "scn-lstm") return Variant::ScnLstm;
  if (s == "rt2-lstm") return Variant::Rt2Lstm;
  throw FormatError("unknown model variant '" + std::string(s) + "'");
}

enum class PassiveMethod { M1, M2 };

namespace detail {

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    auto out = std::stoull(v, &pos);
    if (pos != v.size() || (!v.empty() && v[0] == '-')) throw std::invalid_argument(v);
    return out;
  } catch (const std::logic_error&) {
    throw FormatError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    auto out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::logic_error&) {
    throw FormatError("'" + key + "' expects a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw FormatError("'" + key + "' expects true/false, got '" + v + "'");
}

}  // namespace detail

/// Architecture. Defaults are the full-scale settings.
struct ModelConfig {
  std::size_t feature_dim = 2048;
  std::size_t embed_dim = 250;
  std::size_t hidden = 1000;
  std::size_t layers = 2;
  std::size_t semantic_dim = 1470;
  std::size_t rank = 128;
  Variant variant = Variant::ScnGru;
  double dropout = 0.5;
  std::size_t max_decode_len = 100;

  void validate() const {
    if (feature_dim == 0 || embed_dim == 0 || hidden == 0 || layers == 0 || semantic_dim == 0 || rank == 0) {
      throw PreconditionError("model dimensions must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw PreconditionError("dropout must be in [0, 1)");
  }

  bool operator==(const ModelConfig&) const = default;

  /// Applies `model.*` keys; returns false when the key is not a model key.
  bool set(const std::string& key, const std::string& value) {
    if (key == "model.feature_dim") feature_dim = detail::parse_u64(key, value);
    else if (key == "model.embed_dim") embed_dim = detail::parse_u64(key, value);
    else if (key == "model.hidden") hidden = detail::parse_u64(key, value);
    else if (key == "model.layers") layers = detail::parse_u64(key, value);
    else if (key == "model.semantic_dim") semantic_dim = detail::parse_u64(key, value);
    else if (key == "model.rank") rank = detail::parse_u64(key, value);
    else if (key == "model.variant") variant = parse_variant(value);
    else if (key == "model.dropout") dropout = detail::parse_double(key, value);
    else if (key == "model.max_decode_len") max_decode_len = detail::parse_u64(key, value);
    else return false;
    return true;
  }

  void write(KeyValues& kv) const {
    kv["model.feature_dim"] = std::to_string(feature_dim);
    kv["model.embed_dim"] = std::to_string(embed_dim);
    kv["model.hidden"] = std::to_string(hidden);
    kv["model.layers"] = std::to_string(layers);
    kv["model.semantic_dim"] = std::to_string(semantic_dim);
    kv["model.rank"] = std::to_string(rank);
    kv["model.variant"] = to_string(variant);
    kv["model.dropout"] = format_number(dropout);
    kv["model.max_decode_len"] = std::to_string(max_decode_len);
  }
};

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch = 64;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  bool deterministic = true;
  PassiveMethod passive = PassiveMethod::M1;
  std::optional<std::size_t> passive_k;  // Method 2 only; empty = unbounded
  std::size_t vocab_threshold = 3;

  void validate() const {
    if (batch < 1) throw PreconditionError("batch size must be >= 1");
    if (epochs < 1) throw PreconditionError("epochs must be >= 1");
    if (!(lr > 0.0)) throw PreconditionError("learning rate must be positive");
    if (vocab_threshold < 1) throw PreconditionError("vocabulary threshold must be >= 1");
  }

  bool set(const std::string& key, const std::string& value) {
    if (key == "train.lr") lr = detail::parse_double(key, value);
    else if (key == "train.beta1") beta1 = detail::parse_double(key, value);
    else if (key == "train.beta2") beta2 = detail::parse_double(key, value);
    else if (key == "train.eps") eps = detail::parse_double(key, value);
    else if (key == "train.batch") batch = detail::parse_u64(key, value);
    else if (key == "train.epochs") epochs = detail::parse_u64(key, value);
    else if (key == "train.seed") seed = detail::parse_u64(key, value);
    else if (key == "train.deterministic") deterministic = detail::parse_bool(key, value);
    else if (key == "train.passive") {
      if (value == "m1") passive = PassiveMethod::M1;
      else if (value == "m2") passive = PassiveMethod::M2;
      else throw FormatError("train.passive must be m1 or m2");
    } else if (key == "train.passive_k") {
      if (value == "inf") passive_k.reset();
      else passive_k = detail::parse_u64(key, value);
    } else if (key == "train.vocab_threshold") vocab_threshold = detail::parse_u64(key, value);
    else return false;
    return true;
  }

  void write(KeyValues& kv) const {
    kv["train.lr"] = format_number(lr);
    kv["train.beta1"] = format_number(beta1);
    kv["train.beta2"] = format_number(beta2);
    kv["train.eps"] = format_number(eps);
    kv["train.batch"] = std::to_string(batch);
    kv["train.epochs"] = std::to_string(epochs);
    kv["train.seed"] = std::to_string(seed);
    kv["train.deterministic"] = deterministic ? "true" : "false";
    kv["train.passive"] = passive == PassiveMethod::M1 ? "m1" : "m2";
    kv["train.passive_k"] = passive_k ? std::to_string(*passive_k) : "inf";
    kv["train.vocab_threshold"] = std::to_string(vocab_threshold);
  }
};

}  // namespace charstory::model
