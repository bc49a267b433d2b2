#pragma once

// CSCK container:
//   "CSCK", u32 version, u32 config length, config text (key=value lines),
//   then per tensor: u16 name length, name, u8 rank, u32 dims, float32 data.
// The config block records the tensor count and an FNV-1a checksum over
// the tensor section, so any truncation or corrupted byte is detected.

#include <filesystem>
#include <string>
#include <vector>

#include "charstory/corpus.hpp"
#include "charstory/error.hpp"
#include "charstory/model/config.hpp"
#include "charstory/model/story_model.hpp"
#include "charstory/text.hpp"

namespace charstory::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
  bool operator==(const NamedTensor&) const = default;
};

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  std::size_t vocab_size = 0;
  std::uint64_t epoch = 0;
  std::uint64_t vocab_fingerprint = 0;
  std::uint64_t characters_fingerprint = 0;
  std::map<std::string, std::uint64_t> adam_steps;  // per parameter
  std::vector<NamedTensor> tensors;                 // values, then adam_m/, adam_v/

  const NamedTensor* find(std::string_view name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }
};

namespace detail {

template <class T>
NamedTensor to_named(const std::string& name, const nnet::Matrix<T>& m) {
  NamedTensor t;
  t.name = name;
  t.dims = {static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols)};
  t.data.assign(m.data.begin(), m.data.end());
  return t;
}

template <class T>
void from_named(const NamedTensor& t, nnet::Matrix<T>& m) {
  if (t.dims.size() != 2 || t.dims[0] != m.rows || t.dims[1] != m.cols) {
    throw IncompatibleCheckpoint("tensor '" + t.name + "' has a different shape than the model expects");
  }
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<T>(t.data[i]);
}

inline std::uint64_t parse_hex(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    auto out = std::stoull(v, &pos, 16);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::logic_error&) {
    throw FormatError("'" + key + "' expects a hex value, got '" + v + "'");
  }
}

}  // namespace detail

/// Snapshot of model parameters and Adam state.
template <class T>
Checkpoint make_checkpoint(StoryModel<T>& model, const TrainConfig& train, std::uint64_t epoch,
                           std::uint64_t vocab_fingerprint, std::uint64_t characters_fingerprint) {
  Checkpoint ck;
  ck.model = model.config();
  ck.train = train;
  ck.vocab_size = model.vocab_size();
  ck.epoch = epoch;
  ck.vocab_fingerprint = vocab_fingerprint;
  ck.characters_fingerprint = characters_fingerprint;
  auto params = model.parameters();
  for (auto* p : params) ck.tensors.push_back(detail::to_named(p->name, p->value));
  for (auto* p : params) ck.tensors.push_back(detail::to_named("adam_m/" + p->name, p->adam_m));
  for (auto* p : params) ck.tensors.push_back(detail::to_named("adam_v/" + p->name, p->adam_v));
  for (auto* p : params) ck.adam_steps[p->name] = p->step;
  return ck;
}

/// Copies every tensor into `model`, which must have been built from
/// `ck.model` and `ck.vocab_size`.
template <class T>
void restore(const Checkpoint& ck, StoryModel<T>& model) {
  if (!(ck.model == model.config()) || ck.vocab_size != model.vocab_size()) {
    throw IncompatibleCheckpoint("checkpoint configuration differs from the model");
  }
  for (auto* p : model.parameters()) {
    const auto* v = ck.find(p->name);
    const auto* m = ck.find("adam_m/" + p->name);
    const auto* s = ck.find("adam_v/" + p->name);
    if (!v || !m || !s) throw IncompatibleCheckpoint("checkpoint lacks tensor '" + p->name + "'");
    detail::from_named(*v, p->value);
    detail::from_named(*m, p->adam_m);
    detail::from_named(*s, p->adam_v);
    auto it = ck.adam_steps.find(p->name);
    p->step = it == ck.adam_steps.end() ? 0 : it->second;
    p->zero_grad();
  }
}

inline std::string encode_checkpoint(const Checkpoint& ck) {
  std::string payload;
  for (const auto& t : ck.tensors) {
    if (t.name.size() > 0xffff) throw FormatError("tensor name too long");
    corpus::detail::put_u16(payload, static_cast<std::uint16_t>(t.name.size()));
    payload += t.name;
    payload.push_back(static_cast<char>(t.dims.size()));
    std::size_t n = 1;
    for (auto d : t.dims) {
      corpus::detail::put_u32(payload, d);
      n *= d;
    }
    if (n != t.data.size()) throw DimensionError("tensor '" + t.name + "' data does not match its dims");
    for (float f : t.data) corpus::detail::put_f32(payload, f);
  }
  KeyValues kv;
  ck.model.write(kv);
  ck.train.write(kv);
  kv["vocab_size"] = std::to_string(ck.vocab_size);
  kv["epoch"] = std::to_string(ck.epoch);
  kv["fingerprint.vocab"] = hex64(ck.vocab_fingerprint);
  kv["fingerprint.characters"] = hex64(ck.characters_fingerprint);
  kv["tensors"] = std::to_string(ck.tensors.size());
  kv["checksum"] = hex64(fnv1a64(payload));
  for (const auto& [name, step] : ck.adam_steps) kv["adam.step." + name] = std::to_string(step);
  auto config = format_key_values(kv);
  std::string out = "CSCK";
  corpus::detail::put_u32(out, kCheckpointVersion);
  corpus::detail::put_u32(out, static_cast<std::uint32_t>(config.size()));
  out += config;
  out += payload;
  return out;
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  corpus::detail::ByteReader r(bytes);
  if (bytes.size() < 4 || bytes.substr(0, 4) != "CSCK") throw FormatError("bad CSCK magic");
  r.take(4, "magic");
  auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw IncompatibleCheckpoint("unsupported checkpoint version " + std::to_string(version));
  }
  auto config_len = r.u32("config length");
  auto kv = parse_key_values(r.take(config_len, "config block"));
  auto payload = bytes.substr(r.position());

  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("checkpoint config lacks '" + key + "'");
    return it->second;
  };
  if (detail::parse_hex("checksum", need("checksum")) != fnv1a64(payload)) {
    throw FormatError("checkpoint checksum mismatch (truncated or corrupted tensor data)");
  }
  Checkpoint ck;
  for (const auto& [key, value] : kv) {
    if (ck.model.set(key, value) || ck.train.set(key, value)) continue;
    if (key.rfind("adam.step.", 0) == 0) {
      ck.adam_steps[key.substr(10)] = detail::parse_u64(key, value);
    }
  }
  ck.model.validate();
  ck.vocab_size = detail::parse_u64("vocab_size", need("vocab_size"));
  ck.epoch = detail::parse_u64("epoch", need("epoch"));
  ck.vocab_fingerprint = detail::parse_hex("fingerprint.vocab", need("fingerprint.vocab"));
  ck.characters_fingerprint = detail::parse_hex("fingerprint.characters", need("fingerprint.characters"));
  auto count = detail::parse_u64("tensors", need("tensors"));
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    auto len = r.u16("tensor name length");
    t.name = std::string(r.take(len, "tensor name"));
    auto rank = r.u8("tensor rank");
    std::size_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      t.dims.push_back(r.u32("tensor dims"));
      n *= t.dims.back();
    }
    if (n > (bytes.size() - r.position()) / 4) throw FormatError("truncated tensor '" + t.name + "'");
    t.data.resize(n);
    for (auto& f : t.data) f = r.f32("tensor data");
    ck.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint tensors");
  return ck;
}

inline void checkpoint_save(const std::filesystem::path& path, const Checkpoint& ck) {
  write_file(path, encode_checkpoint(ck));
}

/// Reads a checkpoint and verifies it was trained against the given
/// vocabulary and character lexicon.
inline Checkpoint checkpoint_load(const std::filesystem::path& path, std::uint64_t vocab_fingerprint,
                                  std::uint64_t characters_fingerprint) {
  Checkpoint ck;
  try {
    ck = decode_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail());
  }
  if (ck.vocab_fingerprint != vocab_fingerprint) {
    throw IncompatibleCheckpoint(path.string() + ": vocabulary fingerprint " + hex64(ck.vocab_fingerprint) +
                                 " does not match " + hex64(vocab_fingerprint));
  }
  if (ck.characters_fingerprint != characters_fingerprint) {
    throw IncompatibleCheckpoint(path.string() + ": character lexicon fingerprint " +
                                 hex64(ck.characters_fingerprint) + " does not match " +
                                 hex64(characters_fingerprint));
  }
  return ck;
}

}  // namespace charstory::model
