#pragma once

// Character extraction and corpus-level character statistics: frequency,
// pairwise story co-occurrence, frequency tiers, passive-character
// selection and per-story semantic probability vectors.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "charstory/error.hpp"
#include "charstory/postag.hpp"
#include "charstory/text.hpp"
#include "charstory/tokenize.hpp"
#include "charstory/wordnet.hpp"

namespace charstory::charex {

using wordnet::CharacterKind;
using CharacterId = std::uint32_t;

/// How a recognised character is named.
enum class CharacterKey {
  Surface,  // lowercased token as written ("friends" and "friend" differ)
  Lemma,    // morphy base form
};

struct Character {
  std::string name;
  CharacterKind kind = CharacterKind::Person;
  bool operator==(const Character&) const = default;
};

struct StoryCharacters {
  std::vector<Character> characters;         // distinct names, text order
  std::vector<std::string> not_in_lexicon;   // every failing noun occurrence

  bool contains(std::string_view name) const {
    return std::any_of(characters.begin(), characters.end(),
                       [&](const Character& c) { return c.name == name; });
  }

  std::set<std::string> names() const {
    std::set<std::string> out;
    for (const auto& c : characters) out.insert(c.name);
    return out;
  }
};

struct ExtractOptions {
  wordnet::SensePolicy policy = wordnet::SensePolicy::FirstSense;
  CharacterKey key = CharacterKey::Surface;
};

/// Nouns of the tagged story are classified against WordNet; persons and
/// animals are collected once each, words without a base form are reported.
inline StoryCharacters extract_story_characters(const wordnet::Lexicon& lex,
                                                const std::vector<postag::TaggedSentence>& sentences,
                                                const ExtractOptions& options = {}) {
  StoryCharacters out;
  for (const auto& sentence : sentences) {
    for (const auto& tok : postag::extract_nouns(sentence)) {
      auto c = wordnet::try_classify(lex, tok.norm, options.policy);
      if (!c) {
        out.not_in_lexicon.push_back(tok.norm);
        continue;
      }
      if (c->kind == CharacterKind::NotACharacter) continue;
      auto name = options.key == CharacterKey::Surface ? tok.norm : c->base;
      if (!out.contains(name)) out.characters.push_back({std::move(name), c->kind});
    }
  }
  return out;
}

/// Tags token segments (one per story photo) with the baseline tagger,
/// splitting each segment into sentences first.
inline std::vector<postag::TaggedSentence> tag_segments(const wordnet::Lexicon& lex,
                                                        std::span<const std::vector<std::string>> segments,
                                                        const postag::Stoplist& stoplist) {
  std::vector<postag::TaggedSentence> out;
  for (const auto& seg : segments) {
    for (const auto& sentence : corpus::split_sentences(seg)) out.push_back(postag::tag_sentence(lex, sentence, stoplist));
  }
  return out;
}

inline StoryCharacters extract_from_segments(const wordnet::Lexicon& lex,
                                             std::span<const std::vector<std::string>> segments,
                                             const postag::Stoplist& stoplist, const ExtractOptions& options = {}) {
  return extract_story_characters(lex, tag_segments(lex, segments, stoplist), options);
}

/// Distinct characters in first-appearance order.
class CharacterLexicon {
 public:
  CharacterId add(const std::string& name, CharacterKind kind) {
    if (kind == CharacterKind::NotACharacter) {
      throw PreconditionError("'" + name + "' is not a character");
    }
    auto [it, inserted] = index_.emplace(name, static_cast<CharacterId>(names_.size()));
    if (inserted) {
      names_.push_back(name);
      kinds_.push_back(kind);
    }
    return it->second;
  }

  std::optional<CharacterId> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& name(CharacterId id) const {
    check(id);
    return names_[id];
  }
  CharacterKind kind(CharacterId id) const {
    check(id);
    return kinds_[id];
  }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  void check(CharacterId id) const {
    if (id >= names_.size()) {
      throw IndexError("character id " + std::to_string(id) + " out of range (size " +
                       std::to_string(names_.size()) + ")");
    }
  }

  /// Content hash over names and kinds in id order.
  std::uint64_t fingerprint() const {
    std::string bytes;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      bytes += names_[i];
      bytes += '\t';
      bytes += wordnet::to_string(kinds_[i]);
      bytes += '\n';
    }
    return fnv1a64(bytes);
  }

 private:
  std::vector<std::string> names_;
  std::vector<CharacterKind> kinds_;
  std::unordered_map<std::string, CharacterId> index_;
};

struct FrequencyTable {
  std::vector<std::uint64_t> counts;  // stories containing each character
  std::uint64_t total_stories = 0;
  std::uint64_t vocab_size = 1;       // normalisation constant |V|
};

/// Dense symmetric story co-occurrence counts with a zero diagonal.
class CooccurrenceMatrix {
 public:
  CooccurrenceMatrix() = default;
  explicit CooccurrenceMatrix(std::size_t n) : n_(n), data_(n * n, 0) {}

  std::size_t size() const { return n_; }
  std::uint32_t operator()(CharacterId i, CharacterId j) const {
    check(i);
    check(j);
    return data_[i * n_ + j];
  }
  void add_pair(CharacterId i, CharacterId j) {
    check(i);
    check(j);
    if (i == j) return;
    ++data_[i * n_ + j];
    ++data_[j * n_ + i];
  }
  void resize(std::size_t n) {
    if (n == n_) return;
    std::vector<std::uint32_t> next(n * n, 0);
    auto keep = std::min(n, n_);
    for (std::size_t i = 0; i < keep; ++i) {
      for (std::size_t j = 0; j < keep; ++j) next[i * n + j] = data_[i * n_ + j];
    }
    n_ = n;
    data_ = std::move(next);
  }

 private:
  void check(CharacterId id) const {
    if (id >= n_) throw IndexError("character id " + std::to_string(id) + " out of range");
  }
  std::size_t n_ = 0;
  std::vector<std::uint32_t> data_;
};

struct Statistics {
  CharacterLexicon lexicon;
  FrequencyTable frequency;
  CooccurrenceMatrix cooccurrence;
  double coverage = 0.0;  // fraction of stories with at least one character
};

/// Counts, per character, the stories mentioning it and, per unordered pair,
/// the stories mentioning both. Characters of `universe` keep their ids;
/// unseen ones are appended in corpus order.
inline Statistics build_statistics(std::span<const StoryCharacters> corpus, std::uint64_t vocab_size,
                                   const CharacterLexicon* universe = nullptr) {
  if (corpus.empty()) throw PreconditionError("build_statistics: empty corpus");
  if (vocab_size == 0) throw PreconditionError("build_statistics: vocab_size must be positive");
  Statistics st;
  if (universe) st.lexicon = *universe;
  for (const auto& story : corpus) {
    for (const auto& c : story.characters) st.lexicon.add(c.name, c.kind);
  }
  const auto n = st.lexicon.size();
  st.frequency.counts.assign(n, 0);
  st.frequency.total_stories = corpus.size();
  st.frequency.vocab_size = vocab_size;
  st.cooccurrence = CooccurrenceMatrix(n);
  std::size_t covered = 0;
  std::vector<CharacterId> ids;
  for (const auto& story : corpus) {
    ids.clear();
    for (const auto& c : story.characters) ids.push_back(*st.lexicon.find(c.name));
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (!ids.empty()) ++covered;
    for (std::size_t a = 0; a < ids.size(); ++a) {
      ++st.frequency.counts[ids[a]];
      for (std::size_t b = a + 1; b < ids.size(); ++b) st.cooccurrence.add_pair(ids[a], ids[b]);
    }
  }
  st.coverage = static_cast<double>(covered) / static_cast<double>(corpus.size());
  return st;
}

struct NameCount {
  std::string name;
  std::uint64_t count = 0;
  bool operator==(const NameCount&) const = default;
};

struct PairCount {
  std::string first;   // lexicographically smaller name
  std::string second;
  std::uint64_t count = 0;
  bool operator==(const PairCount&) const = default;
};

/// Descending by count, ties by name.
inline std::vector<NameCount> top_frequent(const CharacterLexicon& lexicon, const FrequencyTable& table,
                                           std::size_t n) {
  std::vector<NameCount> all;
  all.reserve(table.counts.size());
  for (CharacterId i = 0; i < table.counts.size(); ++i) all.push_back({lexicon.name(i), table.counts[i]});
  std::sort(all.begin(), all.end(), [](const NameCount& a, const NameCount& b) {
    return a.count != b.count ? a.count > b.count : a.name < b.name;
  });
  if (all.size() > n) all.resize(n);
  return all;
}

/// Unordered pairs with a positive count, descending, ties by (first, second).
inline std::vector<PairCount> top_pairs(const CharacterLexicon& lexicon, const CooccurrenceMatrix& matrix,
                                        std::size_t n) {
  std::vector<PairCount> all;
  for (CharacterId i = 0; i < matrix.size(); ++i) {
    for (CharacterId j = i + 1; j < matrix.size(); ++j) {
      auto c = matrix(i, j);
      if (c == 0) continue;
      auto a = lexicon.name(i);
      auto b = lexicon.name(j);
      if (b < a) std::swap(a, b);
      all.push_back({std::move(a), std::move(b), c});
    }
  }
  std::sort(all.begin(), all.end(), [](const PairCount& a, const PairCount& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  if (all.size() > n) all.resize(n);
  return all;
}

using ActiveSet = std::set<CharacterId>;
using PassiveMap = std::map<CharacterId, double>;

namespace detail {

inline std::map<CharacterId, std::uint64_t> collective_scores(const ActiveSet& active,
                                                              const CooccurrenceMatrix& matrix) {
  for (auto a : active) {
    if (a >= matrix.size()) throw IndexError("active id " + std::to_string(a) + " out of range");
  }
  std::map<CharacterId, std::uint64_t> scores;
  for (CharacterId c = 0; c < matrix.size(); ++c) {
    if (active.count(c)) continue;
    std::uint64_t s = 0;
    for (auto a : active) s += matrix(a, c);
    if (s > 0) scores[c] = s;
  }
  return scores;
}

}  // namespace detail

/// Method 1: every non-active character co-occurring with an active one,
/// weighted by its summed co-occurrence count over |V|.
inline PassiveMap select_passive_m1(const ActiveSet& active, const CooccurrenceMatrix& matrix,
                                    const FrequencyTable& table) {
  PassiveMap out;
  for (auto [c, s] : detail::collective_scores(active, matrix)) {
    out[c] = static_cast<double>(s) / static_cast<double>(table.vocab_size);
  }
  return out;
}

/// Method 2: the K candidates with the largest collective co-occurrence
/// (ties by name). `k == nullopt` keeps every positive candidate.
inline PassiveMap select_passive_m2(const ActiveSet& active, const CharacterLexicon& lexicon,
                                    const CooccurrenceMatrix& matrix, const FrequencyTable& table,
                                    std::optional<std::size_t> k) {
  auto scores = detail::collective_scores(active, matrix);
  std::vector<std::pair<CharacterId, std::uint64_t>> ranked(scores.begin(), scores.end());
  std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : lexicon.name(a.first) < lexicon.name(b.first);
  });
  if (k && ranked.size() > *k) ranked.resize(*k);
  PassiveMap out;
  for (auto [c, s] : ranked) out[c] = static_cast<double>(s) / static_cast<double>(table.vocab_size);
  return out;
}

struct SemanticVector {
  std::vector<float> probs;
  ActiveSet active_ids;
  std::set<CharacterId> passive_ids;
};

/// Active characters contribute freq/|V|, passive ones their selection
/// probability; every other entry is zero.
inline SemanticVector build_semantic_vector(const ActiveSet& active, const PassiveMap& passive,
                                            const FrequencyTable& table, const CharacterLexicon& lexicon) {
  SemanticVector v;
  v.probs.assign(lexicon.size(), 0.0f);
  for (auto a : active) {
    lexicon.check(a);
    if (passive.count(a)) {
      throw PreconditionError("character '" + lexicon.name(a) + "' is both active and passive");
    }
    auto freq = a < table.counts.size() ? table.counts[a] : 0;
    v.probs[a] = static_cast<float>(static_cast<double>(freq) / static_cast<double>(table.vocab_size));
    v.active_ids.insert(a);
  }
  for (auto [p, prob] : passive) {
    lexicon.check(p);
    v.probs[p] = static_cast<float>(prob);
    v.passive_ids.insert(p);
  }
  return v;
}

inline constexpr std::uint64_t kHighTierAbove = 100;
inline constexpr std::uint64_t kLowTierBelow = 5;

struct Tiers {
  std::set<CharacterId> high;  // freq > 100
  std::set<CharacterId> mid;   // 5 <= freq <= 100
  std::set<CharacterId> low;   // freq < 5
};

enum class Tier { High = 1, Mid = 2, Low = 3 };

inline Tier tier_of(std::uint64_t count) {
  if (count > kHighTierAbove) return Tier::High;
  if (count < kLowTierBelow) return Tier::Low;
  return Tier::Mid;
}

inline Tiers tier_segmentation(const FrequencyTable& table) {
  Tiers t;
  for (CharacterId i = 0; i < table.counts.size(); ++i) {
    switch (tier_of(table.counts[i])) {
      case Tier::High: t.high.insert(i); break;
      case Tier::Mid: t.mid.insert(i); break;
      case Tier::Low: t.low.insert(i); break;
    }
  }
  return t;
}

// ---- TSV output ----

inline std::string frequency_tsv(const std::vector<NameCount>& rows) {
  std::string out = "character\tcount\n";
  for (const auto& r : rows) out += r.name + '\t' + std::to_string(r.count) + '\n';
  return out;
}

inline std::string pairs_tsv(const std::vector<PairCount>& rows) {
  std::string out = "character_i\tcharacter_j\tcount\n";
  for (const auto& r : rows) {
    out += r.first + '\t' + r.second + '\t' + std::to_string(r.count) + '\n';
  }
  return out;
}

inline std::string tiers_tsv(const CharacterLexicon& lexicon, const FrequencyTable& table) {
  std::string out = "character\tcount\ttier\n";
  for (const auto& r : top_frequent(lexicon, table, lexicon.size())) {
    out += r.name + '\t' + std::to_string(r.count) + '\t' +
           std::to_string(static_cast<int>(tier_of(r.count))) + '\n';
  }
  return out;
}

inline std::vector<NameCount> parse_frequency_tsv(std::string_view text) {
  std::vector<NameCount> rows;
  std::size_t lineno = 0;
  for (auto line : lines_of(text)) {
    ++lineno;
    if (lineno == 1) continue;
    if (line.empty()) continue;
    auto f = split_char(line, '\t');
    if (f.size() != 2) throw FormatError("expected character<TAB>count", lineno);
    try {
      rows.push_back({std::string(f[0]), std::stoull(std::string(f[1]))});
    } catch (const std::logic_error&) {
      throw FormatError("bad count '" + std::string(f[1]) + "'", lineno);
    }
  }
  return rows;
}

inline std::vector<PairCount> parse_pairs_tsv(std::string_view text) {
  std::vector<PairCount> rows;
  std::size_t lineno = 0;
  for (auto line : lines_of(text)) {
    ++lineno;
    if (lineno == 1) continue;
    if (line.empty()) continue;
    auto f = split_char(line, '\t');
    if (f.size() != 3) throw FormatError("expected character_i<TAB>character_j<TAB>count", lineno);
    try {
      rows.push_back({std::string(f[0]), std::string(f[1]), std::stoull(std::string(f[2]))});
    } catch (const std::logic_error&) {
      throw FormatError("bad count '" + std::string(f[2]) + "'", lineno);
    }
  }
  return rows;
}

}  // namespace charstory::charex
