#pragma once

// Ground-truth vs generated character distributions, split into the
// frequency tiers used for the distribution plots.

#include <algorithm>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "charstory/charex.hpp"
#include "charstory/model/generate.hpp"
#include "charstory/model/train.hpp"

namespace charstory::model {

struct TierComparison {
  std::string character;
  std::uint64_t true_count = 0;
  std::uint64_t generated_count = 0;
  charex::Tier tier = charex::Tier::Low;  // from the true count
  bool operator==(const TierComparison&) const = default;
};

/// Stories mentioning each character name.
inline std::map<std::string, std::uint64_t> story_counts(std::span<const charex::StoryCharacters> stories) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& s : stories) {
    for (const auto& name : s.names()) ++out[name];
  }
  return out;
}

/// One row per character seen in either distribution, ordered by tier,
/// then true count descending, then generated count descending, then name.
inline std::vector<TierComparison> compare_distributions(std::span<const charex::StoryCharacters> truth,
                                                         std::span<const charex::StoryCharacters> generated) {
  auto t = story_counts(truth);
  auto g = story_counts(generated);
  std::map<std::string, TierComparison> rows;
  for (auto& [name, n] : t) rows[name].true_count = n;
  for (auto& [name, n] : g) rows[name].generated_count = n;
  std::vector<TierComparison> out;
  for (auto& [name, r] : rows) {
    r.character = name;
    r.tier = charex::tier_of(r.true_count);
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const TierComparison& a, const TierComparison& b) {
    if (a.tier != b.tier) return a.tier < b.tier;
    if (a.true_count != b.true_count) return a.true_count > b.true_count;
    if (a.generated_count != b.generated_count) return a.generated_count > b.generated_count;
    return a.character < b.character;
  });
  return out;
}

inline std::string tier_comparison_tsv(std::span<const TierComparison> rows) {
  std::string out = "character\ttrue_count\tgenerated_count\ttier\n";
  for (const auto& r : rows) {
    out += r.character + '\t' + std::to_string(r.true_count) + '\t' + std::to_string(r.generated_count) + '\t' +
           std::to_string(static_cast<int>(r.tier)) + '\n';
  }
  return out;
}

/// Generated token strings (no <eos>) for one example.
using StoryGenerator = std::function<std::vector<std::string>(const Example&)>;

struct DistributionReport {
  std::vector<std::vector<std::string>> generated;     // per example
  std::vector<charex::StoryCharacters> generated_characters;
  std::vector<TierComparison> rows;
};

/// Generates a story per example, runs extraction on the generated text
/// and compares it with the ground-truth characters (same order as
/// `examples`).
inline DistributionReport evaluate_distribution(std::span<const Example> examples,
                                                std::span<const charex::StoryCharacters> truth,
                                                const StoryGenerator& generate_story,
                                                const wordnet::Lexicon& lex, const postag::Stoplist& stoplist,
                                                const charex::ExtractOptions& options = {}) {
  if (truth.size() != examples.size()) {
    throw PreconditionError("evaluate_distribution: " + std::to_string(truth.size()) +
                            " ground-truth entries for " + std::to_string(examples.size()) + " examples");
  }
  DistributionReport rep;
  for (const auto& ex : examples) {
    auto toks = generate_story(ex);
    std::vector<std::vector<std::string>> segs{toks};
    rep.generated_characters.push_back(charex::extract_from_segments(lex, segs, stoplist, options));
    rep.generated.push_back(std::move(toks));
  }
  rep.rows = compare_distributions(truth, rep.generated_characters);
  return rep;
}

/// Greedy/beam generator over a trained model.
template <class T>
StoryGenerator model_generator(const StoryModel<T>& model, const corpus::Vocabulary& vocab,
                               DecodeMode mode = DecodeMode::greedy()) {
  return [&model, &vocab, mode](const Example& ex) {
    auto f = cast_vector<T>(ex.features);
    auto s = cast_vector<T>(ex.semantics);
    auto ids = generate<T>(model, vocab, f, s, mode);
    return story_tokens(vocab, ids);
  };
}

}  // namespace charstory::model
