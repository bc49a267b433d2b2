#pragma once

// Penn Treebank noun tagging: ingestion of externally tagged text and a
// rule-based baseline tagger backed by the WordNet noun index.

#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "charstory/error.hpp"
#include "charstory/text.hpp"
#include "charstory/wordnet.hpp"

namespace charstory::postag {

struct TaggedToken {
  std::string surface;
  std::string norm;  // lowercase(surface)
  std::string tag;   // PTB tag, or "XX" for baseline non-nouns

  bool operator==(const TaggedToken&) const = default;
};

using TaggedSentence = std::vector<TaggedToken>;

inline TaggedToken make_token(std::string surface, std::string tag) {
  TaggedToken t;
  t.norm = to_lower(surface);
  t.surface = std::move(surface);
  t.tag = std::move(tag);
  return t;
}

inline bool is_noun_tag(std::string_view tag) {
  return tag == "NN" || tag == "NNS" || tag == "NNP" || tag == "NNPS";
}

/// Reads vertical `token<TAB>tag` text. Blank lines end sentences.
inline std::vector<TaggedSentence> load_pretagged(std::istream& in) {
  std::vector<TaggedSentence> sentences;
  TaggedSentence cur;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto line = strip_cr(raw);
    if (trim(line).empty()) {
      if (!cur.empty()) sentences.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    auto fields = split_char(line, '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw FormatError("expected token<TAB>tag", lineno);
    }
    cur.push_back(make_token(std::string(fields[0]), std::string(fields[1])));
  }
  if (!cur.empty()) sentences.push_back(std::move(cur));
  return sentences;
}

inline std::vector<TaggedSentence> load_pretagged(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load_pretagged(in);
}

/// Closed-class words that WordNet would otherwise accept as nouns
/// ("can", "will", "us" -> "u", "was" -> "wa").
class Stoplist {
 public:
  Stoplist() = default;
  explicit Stoplist(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  /// Word-per-line text; '#' comments and blank lines ignored.
  static Stoplist parse(std::string_view text) {
    std::unordered_set<std::string> words;
    for (auto line : lines_of(text)) {
      auto w = trim(line);
      if (w.empty() || w.front() == '#') continue;
      words.insert(to_lower(w));
    }
    return Stoplist(std::move(words));
  }

  static Stoplist load(const std::filesystem::path& path) { return parse(read_file(path)); }

  /// Same list as data/stoplist.txt.
  static const Stoplist& builtin() {
    static const Stoplist list(std::unordered_set<std::string>{
        "a", "an", "the", "this", "that", "these", "those", "my", "your", "his", "her",
        "its", "our", "their", "some", "any", "every", "each", "no", "all", "both",
        "either", "neither", "another", "such", "what", "which", "whose", "i", "me", "you",
        "he", "him", "she", "it", "we", "us", "they", "them", "myself", "yourself",
        "himself", "herself", "itself", "ourselves", "yourselves", "themselves", "mine",
        "yours", "hers", "ours", "theirs", "who", "whom", "someone", "something", "anyone",
        "anything", "everyone", "everything", "nobody", "nothing", "one", "about", "above",
        "across", "after", "against", "along", "among", "around", "at", "before", "behind",
        "below", "beside", "between", "beyond", "by", "down", "during", "for", "from",
        "in", "inside", "into", "near", "of", "off", "on", "onto", "out", "over", "past",
        "through", "to", "toward", "towards", "under", "until", "up", "upon", "with",
        "within", "without", "am", "is", "are", "was", "were", "be", "been", "being",
        "have", "has", "had", "do", "does", "did", "can", "could", "will", "would",
        "shall", "should", "may", "might", "must", "and", "or", "but", "nor", "so", "yet",
        "if", "because", "while", "although", "though", "than", "as", "not", "n't", "'s",
        "'m", "'re", "'ll", "'ve", "'d", "there", "here",
    });
    return list;
  }

  bool contains(std::string_view lower) const { return words_.count(std::string(lower)) != 0; }
  std::size_t size() const { return words_.size(); }
  const std::unordered_set<std::string>& words() const { return words_; }

 private:
  std::unordered_set<std::string> words_;
};

namespace detail {
inline bool is_capitalized(std::string_view s) { return !s.empty() && s[0] >= 'A' && s[0] <= 'Z'; }
}  // namespace detail

/// Baseline tagger. The first token of `tokens` is sentence-initial. Rules,
/// first match wins: stoplist -> XX; capitalised non-initial -> NNP/NNPS;
/// morphy base differs from the token -> NNS; token is itself a noun -> NN;
/// otherwise XX.
inline TaggedSentence tag_sentence(const wordnet::Lexicon& lex, const std::vector<std::string>& tokens,
                                   const Stoplist& stoplist = Stoplist::builtin()) {
  if (tokens.empty()) throw PreconditionError("tag_sentence: empty token list");
  TaggedSentence out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& surface = tokens[i];
    auto lower = to_lower(surface);
    std::string tag = "XX";
    if (!stoplist.contains(lower)) {
      auto bases = wordnet::morphy(lex, lower);
      bool plural = !bases.empty() && bases.front() != wordnet::index_key(lower);
      if (i > 0 && detail::is_capitalized(surface)) {
        tag = plural ? "NNPS" : "NNP";
      } else if (plural) {
        tag = "NNS";
      } else if (!bases.empty()) {
        tag = "NN";
      }
    }
    out.push_back(make_token(surface, std::move(tag)));
  }
  return out;
}

/// Order-preserving filter keeping NN, NNS, NNP and NNPS.
inline TaggedSentence extract_nouns(const TaggedSentence& sentence) {
  TaggedSentence out;
  for (const auto& t : sentence) {
    if (is_noun_tag(t.tag)) out.push_back(t);
  }
  return out;
}

}  // namespace charstory::postag
