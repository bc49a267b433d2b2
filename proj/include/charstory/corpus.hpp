#pragma once

// Story annotations (VIST SIS json), the model vocabulary and per-photo
// feature vectors stored in the CFV1 binary format.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "charstory/error.hpp"
#include "charstory/text.hpp"
#include "charstory/tokenize.hpp"

namespace charstory::corpus {

inline constexpr std::size_t kStoryLength = 5;

enum class Split { Train, Val, Test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

struct StorySample {
  std::string story_id;
  std::array<std::string, kStoryLength> photo_ids;
  std::array<std::string, kStoryLength> texts;                     // as annotated
  std::array<std::vector<std::string>, kStoryLength> sentences;    // tokenize(texts[i])
  Split split = Split::Train;

  /// All tokens of the story, segment after segment.
  std::vector<std::string> tokens() const {
    std::vector<std::string> out;
    for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
    return out;
  }
};

struct SisLoadResult {
  std::vector<StorySample> stories;            // first-appearance order
  std::vector<std::string> unusable_story_ids; // groups with != 5 segments
  std::size_t annotation_count = 0;

  /// Structured summary lines (key=value).
  KeyValues summary() const {
    KeyValues kv;
    kv["annotations"] = std::to_string(annotation_count);
    kv["usable_stories"] = std::to_string(stories.size());
    kv["unusable_stories"] = std::to_string(unusable_story_ids.size());
    kv["usable_rule"] = "exactly 5 segments with orders 0-4";
    return kv;
  }
};

namespace detail {

inline std::string json_string(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(std::string("annotation missing '") + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw FormatError(std::string("annotation field '") + key + "' has the wrong type");
}

inline int json_order(const nlohmann::json& obj) {
  auto it = obj.find("worker_arranged_photo_order");
  if (it == obj.end()) throw FormatError("annotation missing 'worker_arranged_photo_order'");
  long long v;
  if (it->is_number_integer()) {
    v = it->get<long long>();
  } else if (it->is_string()) {
    try {
      v = std::stoll(it->get<std::string>());
    } catch (const std::logic_error&) {
      throw FormatError("bad worker_arranged_photo_order");
    }
  } else {
    throw FormatError("bad worker_arranged_photo_order");
  }
  return static_cast<int>(v);
}

}  // namespace detail

/// Parses SIS annotations: a top-level "annotations" array whose elements
/// are annotation objects (or single-element arrays wrapping one, as in the
/// VIST release). Segments are grouped by story_id and ordered by
/// worker_arranged_photo_order; groups that are not exactly orders 0..4
/// are dropped and listed as unusable.
inline SisLoadResult parse_sis(std::string_view text, Split split = Split::Train) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid SIS json: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("annotations") || !doc["annotations"].is_array()) {
    throw FormatError("SIS file has no top-level 'annotations' array");
  }
  struct Group {
    std::map<int, std::pair<std::string, std::string>> segments;  // order -> (photo, text)
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Group> groups;
  SisLoadResult result;
  for (const auto& entry : doc["annotations"]) {
    const nlohmann::json* obj = &entry;
    if (entry.is_array()) {
      if (entry.size() != 1) throw FormatError("annotation wrapper must hold one object");
      obj = &entry[0];
    }
    if (!obj->is_object()) throw FormatError("annotation is not an object");
    ++result.annotation_count;
    auto story_id = detail::json_string(*obj, "story_id");
    auto photo = detail::json_string(*obj, "photo_flickr_id");
    auto text_field = detail::json_string(*obj, "text");
    auto ord = detail::json_order(*obj);
    auto [it, fresh] = groups.try_emplace(story_id);
    if (fresh) order.push_back(story_id);
    if (!it->second.segments.emplace(ord, std::make_pair(photo, text_field)).second) {
      throw FormatError("duplicate segment order " + std::to_string(ord) + " in story '" + story_id + "'");
    }
  }
  for (const auto& id : order) {
    const auto& g = groups.at(id);
    bool usable = g.segments.size() == kStoryLength;
    for (const auto& [ord, seg] : g.segments) {
      if (ord < 0 || ord >= static_cast<int>(kStoryLength) || seg.first.empty()) usable = false;
    }
    if (!usable) {
      result.unusable_story_ids.push_back(id);
      continue;
    }
    StorySample s;
    s.story_id = id;
    s.split = split;
    std::size_t i = 0;
    for (const auto& [ord, seg] : g.segments) {
      s.photo_ids[i] = seg.first;
      s.texts[i] = seg.second;
      s.sentences[i] = tokenize(seg.second);
      ++i;
    }
    result.stories.push_back(std::move(s));
  }
  return result;
}

inline SisLoadResult load_sis(const std::filesystem::path& path, Split split = Split::Train) {
  auto text = read_file(path);
  try {
    return parse_sis(text, split);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.line());
  }
}

/// Writes stories back as SIS json (used for fixtures and the toy bundle).
inline std::string to_sis_json(std::span<const StorySample> stories) {
  nlohmann::json annotations = nlohmann::json::array();
  for (const auto& s : stories) {
    for (std::size_t i = 0; i < kStoryLength; ++i) {
      nlohmann::json a;
      a["story_id"] = s.story_id;
      a["storylet_id"] = s.story_id + "_" + std::to_string(i);
      a["photo_flickr_id"] = s.photo_ids[i];
      a["worker_arranged_photo_order"] = static_cast<int>(i);
      a["text"] = s.texts[i];
      annotations.push_back(nlohmann::json::array({a}));
    }
  }
  nlohmann::json doc;
  doc["annotations"] = annotations;
  return doc.dump(1) + "\n";
}

/// Token/id mapping with PAD, BOS, EOS and UNK at ids 0-3.
class Vocabulary {
 public:
  static constexpr std::uint32_t kPad = 0;
  static constexpr std::uint32_t kBos = 1;
  static constexpr std::uint32_t kEos = 2;
  static constexpr std::uint32_t kUnk = 3;
  static constexpr std::size_t kSpecials = 4;

  Vocabulary() : tokens_{"<pad>", "<bos>", "<eos>", "<unk>"} {
    for (std::uint32_t i = 0; i < kSpecials; ++i) ids_[tokens_[i]] = i;
  }

  /// Rebuilds from an id-ordered token list whose first four entries are
  /// the specials.
  static Vocabulary from_tokens(std::vector<std::string> tokens, std::size_t threshold = 1) {
    Vocabulary v;
    if (tokens.size() < kSpecials) throw FormatError("vocabulary shorter than its special tokens");
    for (std::size_t i = 0; i < kSpecials; ++i) {
      if (tokens[i] != v.tokens_[i]) throw FormatError("vocabulary specials out of place");
    }
    v.tokens_ = std::move(tokens);
    v.ids_.clear();
    for (std::uint32_t i = 0; i < v.tokens_.size(); ++i) {
      if (!v.ids_.emplace(v.tokens_[i], i).second) {
        throw FormatError("duplicate vocabulary token '" + v.tokens_[i] + "'");
      }
    }
    v.threshold_ = threshold;
    return v;
  }

  std::size_t size() const { return tokens_.size(); }
  std::size_t threshold() const { return threshold_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::uint32_t id(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kUnk : it->second;
  }
  const std::string& token(std::uint32_t id) const {
    if (id >= tokens_.size()) throw IndexError("token id " + std::to_string(id) + " out of range");
    return tokens_[id];
  }
  bool contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }

  std::vector<std::uint32_t> encode(std::span<const std::string> tokens) const {
    std::vector<std::uint32_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }
  std::vector<std::string> decode(std::span<const std::uint32_t> ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (auto i : ids) out.push_back(token(i));
    return out;
  }

  std::uint64_t fingerprint() const {
    std::string bytes;
    for (const auto& t : tokens_) {
      bytes += t;
      bytes += '\n';
    }
    return fnv1a64(bytes);
  }

  /// One token per line in id order.
  std::string to_text() const {
    std::string out;
    for (const auto& t : tokens_) {
      out += t;
      out += '\n';
    }
    return out;
  }

  static Vocabulary parse(std::string_view text) {
    std::vector<std::string> tokens;
    for (auto line : lines_of(text)) tokens.emplace_back(line);
    return from_tokens(std::move(tokens));
  }

 private:
  friend Vocabulary build_vocabulary(std::span<const std::vector<std::string>>, std::size_t);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::size_t threshold_ = 1;
};

/// Tokens seen at least `threshold` times, ordered by descending frequency
/// then lexicographically, after the four specials.
inline Vocabulary build_vocabulary(std::span<const std::vector<std::string>> streams, std::size_t threshold) {
  if (threshold < 1) throw PreconditionError("vocabulary threshold must be >= 1");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& s : streams) {
    for (const auto& t : s) ++freq[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  Vocabulary v;
  for (auto& [tok, n] : freq) {
    if (n >= threshold && !v.contains(tok)) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (auto& [tok, n] : kept) {
    v.ids_.emplace(tok, static_cast<std::uint32_t>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  v.threshold_ = threshold;
  return v;
}

/// Distinct token types over the given streams; the normalisation constant
/// for character probabilities.
inline std::size_t count_token_types(std::span<const std::vector<std::string>> streams) {
  std::unordered_map<std::string, char> seen;
  for (const auto& s : streams) {
    for (const auto& t : s) seen.emplace(t, 0);
  }
  return seen.size();
}

/// Per-photo feature vectors of one common dimension.
class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  const std::map<std::string, std::vector<float>>& vectors() const { return vectors_; }

  void insert(const std::string& photo_id, std::vector<float> v) {
    if (v.size() != dim_) {
      throw DimensionError("feature for '" + photo_id + "' has dim " + std::to_string(v.size()) +
                           ", store dim is " + std::to_string(dim_));
    }
    vectors_[photo_id] = std::move(v);
  }

  const std::vector<float>* find(const std::string& photo_id) const {
    auto it = vectors_.find(photo_id);
    return it == vectors_.end() ? nullptr : &it->second;
  }

  bool operator==(const FeatureStore&) const = default;

 private:
  std::size_t dim_ = 0;
  std::map<std::string, std::vector<float>> vectors_;
};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

/// Bounds-checked little-endian reader; running past the end is a FormatError.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated ") + what);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(take(1, what)[0]); }
  std::uint16_t u16(const char* what) {
    auto b = take(2, what);
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[0]) |
                                      (static_cast<unsigned char>(b[1]) << 8));
  }
  std::uint32_t u32(const char* what) {
    auto b = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t position() const { return pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// CFV1: "CFV1", u32 count, u32 dim, then per record u16 id length, id
/// bytes and dim little-endian float32 values. Records in id order.
inline std::string encode_features(const FeatureStore& store) {
  std::string out = "CFV1";
  detail::put_u32(out, static_cast<std::uint32_t>(store.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(store.dim()));
  for (const auto& [id, v] : store.vectors()) {
    if (id.size() > 0xffff) throw FormatError("photo id longer than 65535 bytes");
    if (v.size() != store.dim()) throw DimensionError("feature '" + id + "' does not match store dim");
    detail::put_u16(out, static_cast<std::uint16_t>(id.size()));
    out += id;
    for (float f : v) detail::put_f32(out, f);
  }
  return out;
}

inline FeatureStore decode_features(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < 4 || bytes.substr(0, 4) != "CFV1") throw FormatError("bad CFV1 magic");
  r.take(4, "magic");
  auto count = r.u32("record count");
  auto dim = r.u32("dimension");
  FeatureStore store(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto len = r.u16("id length");
    std::string id(r.take(len, "photo id"));
    std::vector<float> v(dim);
    for (auto& f : v) f = r.f32("feature values");
    store.insert(id, std::move(v));
  }
  if (!r.done()) throw FormatError("trailing bytes after CFV1 records");
  if (store.size() != count) throw FormatError("duplicate photo ids in CFV1 file");
  return store;
}

inline void feature_store_write(const std::filesystem::path& path, const FeatureStore& store) {
  write_file(path, encode_features(store));
}

inline FeatureStore feature_store_read(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  try {
    return decode_features(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail());
  }
}

/// Standard-normal features for every photo of `stories`, seeded per photo
/// id so the vectors do not depend on story order. Stand-in for CNN
/// features in desk-scale runs.
inline FeatureStore synthetic_features(std::span<const StorySample> stories, std::size_t dim,
                                       std::uint64_t seed) {
  FeatureStore store(dim);
  for (const auto& s : stories) {
    for (const auto& photo : s.photo_ids) {
      if (store.find(photo)) continue;
      std::mt19937_64 rng(seed ^ fnv1a64(photo));
      std::normal_distribution<float> normal(0.0f, 1.0f);
      std::vector<float> v(dim);
      for (auto& f : v) f = normal(rng);
      store.insert(photo, std::move(v));
    }
  }
  return store;
}

}  // namespace charstory::corpus
