#pragma once

// Reader for the WordNet 3.x noun database (index.noun, data.noun, noun.exc)
// with lemmatisation, hypernym closure and person/animal classification.
//
// File layout reference: wndb(5WN). Only the fields the toolkit needs are
// kept; pointer types other than hypernym (`@`) and instance hypernym (`@i`)
// are skipped.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "charstory/error.hpp"
#include "charstory/text.hpp"

namespace charstory::wordnet {

using SynsetOffset = std::uint32_t;

struct Synset {
  SynsetOffset offset = 0;
  int lex_filenum = 0;
  std::vector<std::string> lemmas;         // lowercase, underscores kept
  std::vector<SynsetOffset> hypernyms;     // `@` and `@i`, file order
  std::string gloss;
};

enum class CharacterKind { Person, Animal, NotACharacter };

inline const char* to_string(CharacterKind k) {
  switch (k) {
    case CharacterKind::Person: return "person";
    case CharacterKind::Animal: return "animal";
    case CharacterKind::NotACharacter: return "none";
  }
  return "none";
}

/// Which noun senses of a word are inspected by classify_character.
enum class SensePolicy {
  FirstSense,  // most frequent sense only
  AnySense,    // first sense, in order, whose closure reaches a root
};

/// Normalises a lemma or surface form to index-key form.
inline std::string index_key(std::string_view word) {
  auto key = to_lower(trim(word));
  for (auto& ch : key) {
    if (ch == ' ') ch = '_';
  }
  return key;
}

class LexiconBuilder;

/// Parsed noun database. Immutable once built; safe to share across threads.
class Lexicon {
 public:
  const std::unordered_map<SynsetOffset, Synset>& synsets() const { return synsets_; }
  const std::map<std::string, std::vector<SynsetOffset>>& index() const { return index_; }
  const std::map<std::string, std::vector<std::string>>& exceptions() const {
    return exceptions_;
  }
  SynsetOffset person_root() const { return person_root_; }
  SynsetOffset animal_root() const { return animal_root_; }

  const Synset* find(SynsetOffset offset) const {
    auto it = synsets_.find(offset);
    return it == synsets_.end() ? nullptr : &it->second;
  }

  const Synset& at(SynsetOffset offset) const {
    if (const auto* s = find(offset)) return *s;
    throw UnknownSynset("unknown synset offset " + std::to_string(offset));
  }

  /// Senses of a lemma in index order; empty when absent. Case-insensitive.
  const std::vector<SynsetOffset>& senses(std::string_view lemma) const {
    static const std::vector<SynsetOffset> kNone;
    auto it = index_.find(index_key(lemma));
    return it == index_.end() ? kNone : it->second;
  }

  bool contains(std::string_view lemma) const {
    return index_.count(index_key(lemma)) != 0;
  }

 private:
  friend class LexiconBuilder;
  std::unordered_map<SynsetOffset, Synset> synsets_;
  std::map<std::string, std::vector<SynsetOffset>> index_;
  std::map<std::string, std::vector<std::string>> exceptions_;
  SynsetOffset person_root_ = 0;
  SynsetOffset animal_root_ = 0;
};

/// Accumulates records and validates the whole graph in build().
/// Line numbers passed to the add_* calls are reported in errors.
class LexiconBuilder {
 public:
  void add_synset(Synset synset, std::size_t line = 0) {
    if (synset.lemmas.empty()) throw ParseError("synset without lemmas", line);
    auto offset = synset.offset;
    if (!lex_.synsets_.emplace(offset, std::move(synset)).second) {
      throw ParseError("duplicate synset offset " + std::to_string(offset), line);
    }
    synset_lines_[offset] = line;
  }

  void add_index(std::string lemma, std::vector<SynsetOffset> senses, std::size_t line = 0) {
    auto key = index_key(lemma);
    if (senses.empty()) throw ParseError("index entry '" + key + "' without senses", line);
    index_lines_[key] = line;
    lex_.index_[std::move(key)] = std::move(senses);
  }

  void add_exception(std::string inflected, std::vector<std::string> bases) {
    auto& dst = lex_.exceptions_[index_key(inflected)];
    for (auto& b : bases) dst.push_back(index_key(b));
  }

  Lexicon build() && {
    for (const auto& [offset, synset] : lex_.synsets_) {
      for (auto target : synset.hypernyms) {
        if (!lex_.synsets_.count(target)) {
          throw ParseError("synset " + std::to_string(offset) +
                               " has hypernym pointer to missing offset " +
                               std::to_string(target),
                           synset_lines_[offset]);
        }
      }
    }
    for (const auto& [lemma, senses] : lex_.index_) {
      for (auto s : senses) {
        if (!lex_.synsets_.count(s)) {
          throw ParseError("index entry '" + lemma + "' points to missing offset " +
                               std::to_string(s),
                           index_lines_[lemma]);
        }
      }
    }
    check_acyclic();
    auto root = [&](const char* lemma) {
      auto it = lex_.index_.find(lemma);
      if (it == lex_.index_.end()) {
        throw LexiconIncomplete(std::string("lemma '") + lemma + "' missing from index");
      }
      return it->second.front();
    };
    lex_.person_root_ = root("person");
    lex_.animal_root_ = root("animal");
    if (lex_.person_root_ == lex_.animal_root_) {
      throw LexiconIncomplete("person and animal resolve to the same synset");
    }
    return std::move(lex_);
  }

 private:
  void check_acyclic() const {
    // 0 = unvisited, 1 = on stack, 2 = done
    std::unordered_map<SynsetOffset, char> state;
    state.reserve(lex_.synsets_.size());
    struct Frame {
      SynsetOffset node;
      std::size_t next;
    };
    std::vector<Frame> stack;
    for (const auto& [start, unused] : lex_.synsets_) {
      if (state[start] != 0) continue;
      stack.push_back({start, 0});
      state[start] = 1;
      while (!stack.empty()) {
        auto& top = stack.back();
        const auto& hyp = lex_.synsets_.at(top.node).hypernyms;
        if (top.next == hyp.size()) {
          state[top.node] = 2;
          stack.pop_back();
          continue;
        }
        auto child = hyp[top.next++];
        auto& st = state[child];
        if (st == 1) {
          auto it = synset_lines_.find(child);
          throw ParseError("hypernym cycle through synset " + std::to_string(child),
                           it == synset_lines_.end() ? 0 : it->second);
        }
        if (st == 0) {
          st = 1;
          stack.push_back({child, 0});
        }
      }
    }
  }

  Lexicon lex_;
  std::unordered_map<SynsetOffset, std::size_t> synset_lines_;
  std::map<std::string, std::size_t> index_lines_;
};

namespace detail {

inline bool is_license_line(std::string_view line) {
  return line.size() >= 2 && line[0] == ' ' && line[1] == ' ';
}

inline unsigned long parse_unsigned(std::string_view field, int base, std::size_t line,
                                    const char* what) {
  if (field.empty()) throw ParseError(std::string("empty ") + what, line);
  unsigned long value = 0;
  for (char ch : field) {
    int digit;
    if (ch >= '0' && ch <= '9') {
      digit = ch - '0';
    } else if (base == 16 && ch >= 'a' && ch <= 'f') {
      digit = ch - 'a' + 10;
    } else if (base == 16 && ch >= 'A' && ch <= 'F') {
      digit = ch - 'A' + 10;
    } else {
      throw ParseError(std::string("bad ") + what + " '" + std::string(field) + "'", line);
    }
    value = value * static_cast<unsigned long>(base) + static_cast<unsigned long>(digit);
    if (value > 0xffffffffUL) throw ParseError(std::string(what) + " out of range", line);
  }
  return value;
}

inline Synset parse_data_line(std::string_view line, std::size_t lineno) {
  auto bar = line.find(" | ");
  std::string_view head = line;
  std::string gloss;
  if (bar != std::string_view::npos) {
    head = line.substr(0, bar);
    gloss = std::string(trim(line.substr(bar + 3)));
  } else if (auto b = line.find('|'); b != std::string_view::npos) {
    head = line.substr(0, b);
    gloss = std::string(trim(line.substr(b + 1)));
  }
  auto f = split_ws(head);
  auto need = [&](std::size_t n) {
    if (f.size() < n) throw ParseError("truncated data record", lineno);
  };
  need(4);
  Synset s;
  s.offset = static_cast<SynsetOffset>(parse_unsigned(f[0], 10, lineno, "synset offset"));
  s.lex_filenum = static_cast<int>(parse_unsigned(f[1], 10, lineno, "lex_filenum"));
  if (f[2] != "n") throw ParseError("not a noun record (ss_type '" + std::string(f[2]) + "')", lineno);
  auto w_cnt = parse_unsigned(f[3], 16, lineno, "w_cnt");
  if (w_cnt == 0) throw ParseError("synset without lemmas", lineno);
  std::size_t pos = 4;
  need(pos + 2 * w_cnt + 1);
  for (std::size_t i = 0; i < w_cnt; ++i) {
    s.lemmas.push_back(to_lower(f[pos]));
    parse_unsigned(f[pos + 1], 16, lineno, "lex_id");
    pos += 2;
  }
  auto p_cnt = parse_unsigned(f[pos], 10, lineno, "p_cnt");
  ++pos;
  need(pos + 4 * p_cnt);
  for (std::size_t i = 0; i < p_cnt; ++i) {
    auto symbol = f[pos];
    auto target = static_cast<SynsetOffset>(parse_unsigned(f[pos + 1], 10, lineno, "pointer offset"));
    auto target_pos = f[pos + 2];
    if (f[pos + 3].size() != 4) throw ParseError("bad pointer source/target field", lineno);
    parse_unsigned(f[pos + 3], 16, lineno, "pointer source/target");
    if ((symbol == "@" || symbol == "@i") && target_pos == "n") s.hypernyms.push_back(target);
    pos += 4;
  }
  s.gloss = std::move(gloss);
  return s;
}

}  // namespace detail

inline void load_index(LexiconBuilder& b, std::string_view text) {
  std::size_t lineno = 0;
  for (auto line : lines_of(text)) {
    ++lineno;
    if (detail::is_license_line(line) || trim(line).empty()) continue;
    auto f = split_ws(line);
    if (f.size() < 6) throw ParseError("truncated index record", lineno);
    if (f[1] != "n") throw ParseError("index record is not a noun", lineno);
    auto synset_cnt = detail::parse_unsigned(f[2], 10, lineno, "synset_cnt");
    auto p_cnt = detail::parse_unsigned(f[3], 10, lineno, "p_cnt");
    std::size_t expected = 4 + p_cnt + 2 + synset_cnt;
    if (f.size() != expected) {
      throw ParseError("index record has " + std::to_string(f.size()) + " fields, expected " +
                           std::to_string(expected),
                       lineno);
    }
    std::vector<SynsetOffset> senses;
    for (std::size_t i = f.size() - synset_cnt; i < f.size(); ++i) {
      senses.push_back(static_cast<SynsetOffset>(
          detail::parse_unsigned(f[i], 10, lineno, "synset offset")));
    }
    b.add_index(std::string(f[0]), std::move(senses), lineno);
  }
}

inline void load_data(LexiconBuilder& b, std::string_view text) {
  std::size_t lineno = 0;
  for (auto line : lines_of(text)) {
    ++lineno;
    if (detail::is_license_line(line) || trim(line).empty()) continue;
    b.add_synset(detail::parse_data_line(line, lineno), lineno);
  }
}

inline void load_exceptions(LexiconBuilder& b, std::string_view text) {
  std::size_t lineno = 0;
  for (auto line : lines_of(text)) {
    ++lineno;
    auto f = split_ws(line);
    if (f.empty()) continue;
    if (f.size() < 2) throw ParseError("exception entry without base form", lineno);
    std::vector<std::string> bases(f.begin() + 1, f.end());
    b.add_exception(std::string(f[0]), std::move(bases));
  }
}

/// Loads the three noun files. Missing files raise IoError, malformed
/// records ParseError with the line number, absent person/animal lemmas
/// LexiconIncomplete.
inline Lexicon parse_database(const std::filesystem::path& index_noun,
                              const std::filesystem::path& data_noun,
                              const std::filesystem::path& noun_exc) {
  LexiconBuilder b;
  auto load = [&b](const std::filesystem::path& p, void (*fn)(LexiconBuilder&, std::string_view)) {
    auto text = read_file(p);
    try {
      fn(b, text);
    } catch (const ParseError& e) {
      throw ParseError(p.string() + ": " + e.detail(), e.line());
    }
  };
  load(data_noun, &load_data);
  load(index_noun, &load_index);
  load(noun_exc, &load_exceptions);
  return std::move(b).build();
}

/// Loads index.noun, data.noun and noun.exc from one directory.
inline Lexicon parse_database(const std::filesystem::path& dir) {
  return parse_database(dir / "index.noun", dir / "data.noun", dir / "noun.exc");
}

/// Writes the lexicon back in database form: one data record per synset
/// with its hypernym edges, one index record per lemma, and the exception
/// list. Other pointer types are not preserved.
inline void write_database(const Lexicon& lex, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::map<SynsetOffset, const Synset*> ordered;
  for (const auto& [off, s] : lex.synsets()) ordered.emplace(off, &s);

  std::string data;
  char buf[64];
  for (const auto& [off, s] : ordered) {
    std::snprintf(buf, sizeof buf, "%08u %02d n %02zx", off, s->lex_filenum, s->lemmas.size());
    data += buf;
    for (const auto& l : s->lemmas) {
      data += ' ';
      data += l;
      data += " 0";
    }
    std::snprintf(buf, sizeof buf, " %03zu", s->hypernyms.size());
    data += buf;
    for (auto h : s->hypernyms) {
      std::snprintf(buf, sizeof buf, " @ %08u n 0000", h);
      data += buf;
    }
    data += " | ";
    data += s->gloss;
    data += "  \n";
  }
  std::string index;
  for (const auto& [lemma, senses] : lex.index()) {
    index += lemma;
    std::snprintf(buf, sizeof buf, " n %zu 1 @ %zu 0", senses.size(), senses.size());
    index += buf;
    for (auto s : senses) {
      std::snprintf(buf, sizeof buf, " %08u", s);
      index += buf;
    }
    index += "  \n";
  }
  std::string exc;
  for (const auto& [form, bases] : lex.exceptions()) {
    exc += form;
    for (const auto& b : bases) {
      exc += ' ';
      exc += b;
    }
    exc += '\n';
  }
  write_file(dir / "data.noun", data);
  write_file(dir / "index.noun", index);
  write_file(dir / "noun.exc", exc);
}

/// Candidate noun base forms for a surface token: exception-list matches,
/// then the token itself, then detachment-rule results. Only forms present
/// in the index are returned, without duplicates.
inline std::vector<std::string> morphy(const Lexicon& lex, std::string_view surface) {
  static constexpr std::pair<std::string_view, std::string_view> kRules[] = {
      {"ses", "s"}, {"xes", "x"}, {"zes", "z"}, {"ches", "ch"},
      {"shes", "sh"}, {"men", "man"}, {"ies", "y"}, {"s", ""},
  };
  auto word = index_key(surface);
  std::vector<std::string> out;
  auto push = [&](std::string cand) {
    if (cand.empty() || !lex.contains(cand)) return;
    for (const auto& o : out) {
      if (o == cand) return;
    }
    out.push_back(std::move(cand));
  };
  if (auto it = lex.exceptions().find(word); it != lex.exceptions().end()) {
    for (const auto& base : it->second) push(base);
  }
  push(word);
  for (auto [suffix, repl] : kRules) {
    if (word.size() > suffix.size() && word.ends_with(suffix)) {
      push(word.substr(0, word.size() - suffix.size()) + std::string(repl));
    }
  }
  return out;
}

/// Every synset reachable through hypernym edges, excluding `start`.
inline std::set<SynsetOffset> hypernym_closure(const Lexicon& lex, SynsetOffset start) {
  std::set<SynsetOffset> seen;
  std::vector<SynsetOffset> stack(lex.at(start).hypernyms);
  while (!stack.empty()) {
    auto off = stack.back();
    stack.pop_back();
    if (!seen.insert(off).second) continue;
    const auto& next = lex.at(off).hypernyms;
    stack.insert(stack.end(), next.begin(), next.end());
  }
  return seen;
}

/// Kind of a single sense: person wins over animal when both roots are reachable.
inline CharacterKind classify_sense(const Lexicon& lex, SynsetOffset sense) {
  auto closure = hypernym_closure(lex, sense);
  closure.insert(sense);
  if (closure.count(lex.person_root())) return CharacterKind::Person;
  if (closure.count(lex.animal_root())) return CharacterKind::Animal;
  return CharacterKind::NotACharacter;
}

struct Classification {
  CharacterKind kind = CharacterKind::NotACharacter;
  std::string base;            // base form the senses were taken from
  SynsetOffset sense = 0;      // deciding sense (first sense when none decides)
};

/// Classifies without throwing; nullopt when the word has no base form.
inline std::optional<Classification> try_classify(const Lexicon& lex, std::string_view word,
                                                  SensePolicy policy = SensePolicy::FirstSense) {
  auto bases = morphy(lex, word);
  if (bases.empty()) return std::nullopt;
  Classification c;
  c.base = bases.front();
  const auto& senses = lex.senses(c.base);
  c.sense = senses.front();
  if (policy == SensePolicy::FirstSense) {
    c.kind = classify_sense(lex, c.sense);
    return c;
  }
  for (auto s : senses) {
    auto k = classify_sense(lex, s);
    if (k != CharacterKind::NotACharacter) {
      c.kind = k;
      c.sense = s;
      return c;
    }
  }
  return c;
}

/// Person, Animal or NotACharacter; throws NotInLexicon when morphy finds
/// no base form.
inline CharacterKind classify_character(const Lexicon& lex, std::string_view word,
                                        SensePolicy policy = SensePolicy::FirstSense) {
  if (trim(word).empty()) throw PreconditionError("classify_character: empty word");
  auto c = try_classify(lex, word, policy);
  if (!c) throw NotInLexicon(std::string(word));
  return c->kind;
}

}  // namespace charstory::wordnet
