#pragma once

// Command-line pipeline. Each subcommand reads inputs and earlier
// artifacts, writes files into --out and reports a few lines on stdout.
// Exit codes: 0 ok, 2 path, 3 format, 4 missing prerequisite, 1 other.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "charstory/charex.hpp"
#include "charstory/corpus.hpp"
#include "charstory/error.hpp"
#include "charstory/model/checkpoint.hpp"
#include "charstory/model/config.hpp"
#include "charstory/model/evaluate.hpp"
#include "charstory/model/generate.hpp"
#include "charstory/model/story_model.hpp"
#include "charstory/model/toy.hpp"
#include "charstory/model/train.hpp"
#include "charstory/postag.hpp"
#include "charstory/text.hpp"
#include "charstory/wordnet.hpp"

namespace charstory::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kOther = 1, kPath = 2, kFormat = 3, kMissing = 4 };

/// An input file or directory does not exist.
class PathError : public Error {
 public:
  using Error::Error;
};

/// An artifact of an earlier subcommand is absent.
class MissingPrerequisite : public Error {
 public:
  MissingPrerequisite(const fs::path& file, const std::string& producer)
      : Error("missing " + file.string() + " (run '" + producer + "' first)"), producer_(producer) {}
  const std::string& producer() const { return producer_; }

 private:
  std::string producer_;
};

enum class SemanticsSource { Annotation, Zero };

struct RunConfig {
  std::string command;
  std::optional<fs::path> wordnet;
  std::map<corpus::Split, fs::path> sis;
  std::map<corpus::Split, fs::path> pretagged;  // external tagger output per split
  std::optional<fs::path> features;
  std::optional<fs::path> stoplist;
  fs::path out = ".";
  bool deterministic = true;
  bool timestamp = true;

  model::ModelConfig model;
  model::TrainConfig train;
  charex::ExtractOptions extract;
  std::size_t top = 30;
  std::size_t beam = 0;
  SemanticsSource semantics = SemanticsSource::Annotation;
  std::size_t features_dim = 16;
  std::uint64_t features_seed = 0;
  std::size_t toy_train = 50;
  std::size_t toy_test = 10;
  std::uint64_t toy_seed = 7;

  /// Applies one key=value setting. `base` resolves relative paths (config
  /// files resolve against their own directory). Unknown keys throw.
  void set(const std::string& key, const std::string& value, const fs::path& base = {}) {
    auto path = [&] { return base.empty() ? fs::path(value) : base / value; };
    using model::detail::parse_u64;
    if (model.set(key, value) || train.set(key, value)) return;
    if (key == "wordnet") wordnet = path();
    else if (key == "features") features = path();
    else if (key == "stoplist") stoplist = path();
    else if (key == "out") out = path();
    else if (key.rfind("sis.", 0) == 0) sis[corpus::parse_split(key.substr(4))] = path();
    else if (key.rfind("pretagged.", 0) == 0) pretagged[corpus::parse_split(key.substr(10))] = path();
    else if (key == "extract.policy") {
      if (value == "first") extract.policy = wordnet::SensePolicy::FirstSense;
      else if (value == "any") extract.policy = wordnet::SensePolicy::AnySense;
      else throw FormatError("extract.policy must be first or any");
    } else if (key == "extract.key") {
      if (value == "surface") extract.key = charex::CharacterKey::Surface;
      else if (value == "lemma") extract.key = charex::CharacterKey::Lemma;
      else throw FormatError("extract.key must be surface or lemma");
    } else if (key == "stats.top") top = parse_u64(key, value);
    else if (key == "generate.beam") beam = parse_u64(key, value);
    else if (key == "generate.semantics") {
      if (value == "annotation") semantics = SemanticsSource::Annotation;
      else if (value == "zero") semantics = SemanticsSource::Zero;
      else throw FormatError("generate.semantics must be annotation or zero");
    } else if (key == "features.dim") features_dim = parse_u64(key, value);
    else if (key == "features.seed") features_seed = parse_u64(key, value);
    else if (key == "toy.train") toy_train = parse_u64(key, value);
    else if (key == "toy.test") toy_test = parse_u64(key, value);
    else if (key == "toy.seed") toy_seed = parse_u64(key, value);
    else throw FormatError("unknown configuration key '" + key + "'");
  }
};

// ---- artifact files ----

inline constexpr const char* kStoryCharactersFile = "story_characters.tsv";
inline constexpr const char* kCharactersFile = "characters.tsv";
inline constexpr const char* kNotInLexiconFile = "not_in_lexicon.tsv";
inline constexpr const char* kExtractSummaryFile = "extract_summary.txt";
inline constexpr const char* kCheckpointFile = "model.csck";
inline constexpr const char* kVocabFile = "vocab.tsv";
inline constexpr const char* kLossFile = "loss.tsv";
inline constexpr const char* kGeneratedFile = "generated.tsv";
inline constexpr const char* kTierComparisonFile = "tiers_comparison.tsv";

struct StoryRow {
  std::string story_id;
  corpus::Split split = corpus::Split::Train;
  charex::StoryCharacters characters;
};

inline std::string story_characters_tsv(std::span<const StoryRow> rows) {
  std::string out = "story_id\tsplit\tcharacters\n";
  for (const auto& r : rows) {
    out += r.story_id + '\t' + corpus::to_string(r.split) + '\t';
    for (std::size_t i = 0; i < r.characters.characters.size(); ++i) {
      const auto& c = r.characters.characters[i];
      if (i) out += ',';
      out += c.name + ':' + wordnet::to_string(c.kind);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<StoryRow> parse_story_characters_tsv(std::string_view text) {
  std::vector<StoryRow> rows;
  std::size_t lineno = 0;
  for (auto line : lines_of(text)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    auto f = split_char(line, '\t');
    if (f.size() != 3) throw FormatError("expected story_id<TAB>split<TAB>characters", lineno);
    StoryRow r;
    r.story_id = std::string(f[0]);
    r.split = corpus::parse_split(f[1]);
    if (!f[2].empty()) {
      for (auto item : split_char(f[2], ',')) {
        auto colon = item.rfind(':');
        if (colon == std::string_view::npos) throw FormatError("character entry without kind", lineno);
        auto kind = item.substr(colon + 1);
        charex::Character c{std::string(item.substr(0, colon)), wordnet::CharacterKind::Person};
        if (kind == "person") c.kind = wordnet::CharacterKind::Person;
        else if (kind == "animal") c.kind = wordnet::CharacterKind::Animal;
        else throw FormatError("unknown character kind '" + std::string(kind) + "'", lineno);
        r.characters.characters.push_back(std::move(c));
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

/// All characters in first-appearance order (splits in train, val, test
/// order as written by extract).
inline charex::CharacterLexicon universe_of(std::span<const StoryRow> rows) {
  charex::CharacterLexicon lex;
  for (const auto& r : rows) {
    for (const auto& c : r.characters.characters) lex.add(c.name, c.kind);
  }
  return lex;
}

namespace detail {

inline std::string timestamp_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_summary(const RunConfig& cfg, const fs::path& path, KeyValues kv) {
  if (cfg.timestamp) kv["generated_at"] = timestamp_now();
  write_file(path, format_key_values(kv));
}

inline fs::path require(const RunConfig& cfg, const char* file, const std::string& producer) {
  auto p = cfg.out / file;
  if (!fs::exists(p)) throw MissingPrerequisite(p, producer);
  return p;
}

inline void check_input(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw PathError(std::string(what) + " not found: " + p.string());
}

inline fs::path need_path(const std::optional<fs::path>& p, const char* flag) {
  if (!p) throw PathError(std::string("missing required ") + flag);
  return *p;
}

inline wordnet::Lexicon load_wordnet(const RunConfig& cfg) {
  auto dir = need_path(cfg.wordnet, "--wordnet (or WNHOME)");
  check_input(dir, "WordNet directory");
  for (const char* f : {"index.noun", "data.noun"}) check_input(dir / f, "WordNet file");
  return wordnet::parse_database(dir);
}

inline postag::Stoplist load_stoplist(const RunConfig& cfg) {
  if (!cfg.stoplist) return postag::Stoplist::builtin();
  check_input(*cfg.stoplist, "stoplist");
  return postag::Stoplist::load(*cfg.stoplist);
}

inline std::vector<corpus::StorySample> load_split(const RunConfig& cfg, corpus::Split split) {
  auto it = cfg.sis.find(split);
  if (it == cfg.sis.end()) return {};
  return corpus::load_sis(it->second, split).stories;
}

inline corpus::FeatureStore load_features(const RunConfig& cfg) {
  auto p = need_path(cfg.features, "--features");
  check_input(p, "feature file");
  return corpus::feature_store_read(p);
}

inline std::vector<std::vector<std::string>> token_streams(std::span<const corpus::StorySample> stories) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : stories) out.push_back(s.tokens());
  return out;
}

/// State shared by train and generate: extraction rows, the full character
/// universe and training-split statistics over it.
struct CharacterContext {
  std::vector<StoryRow> rows;
  charex::CharacterLexicon universe;
  charex::Statistics stats;
  std::map<std::string, const StoryRow*> by_id;
};

inline CharacterContext character_context(const RunConfig& cfg) {
  CharacterContext ctx;
  ctx.rows = parse_story_characters_tsv(read_file(require(cfg, kStoryCharactersFile, "extract")));
  auto summary = parse_key_values(read_file(require(cfg, kExtractSummaryFile, "extract")));
  auto vocab_size = model::detail::parse_u64("vocab_size", summary["vocab_size"]);
  ctx.universe = universe_of(ctx.rows);
  std::vector<charex::StoryCharacters> train;
  for (const auto& r : ctx.rows) {
    if (r.split == corpus::Split::Train) train.push_back(r.characters);
    ctx.by_id[r.story_id] = &r;
  }
  if (train.empty()) throw PreconditionError("no training stories in " + std::string(kStoryCharactersFile));
  ctx.stats = charex::build_statistics(train, vocab_size, &ctx.universe);
  return ctx;
}

inline model::SemanticTable semantic_table(const RunConfig& cfg, const CharacterContext& ctx,
                                           std::span<const corpus::StorySample> stories,
                                           SemanticsSource source = SemanticsSource::Annotation) {
  model::SemanticTable table;
  for (const auto& s : stories) {
    if (source == SemanticsSource::Zero) {
      table[s.story_id] = std::vector<float>(ctx.stats.lexicon.size(), 0.0f);
      continue;
    }
    auto it = ctx.by_id.find(s.story_id);
    if (it == ctx.by_id.end()) throw DataJoinError(s.story_id, "not present in " + std::string(kStoryCharactersFile));
    table[s.story_id] =
        model::semantic_vector_for(it->second->characters, ctx.stats, cfg.train.passive, cfg.train.passive_k).probs;
  }
  return table;
}

}  // namespace detail

// ---- subcommands ----

inline int cmd_extract(const RunConfig& cfg, std::ostream& out) {
  auto lex = detail::load_wordnet(cfg);
  auto stop = detail::load_stoplist(cfg);
  if (cfg.sis.empty()) throw PathError("missing required --sis");
  for (const auto& [split, p] : cfg.sis) detail::check_input(p, "SIS file");
  fs::create_directories(cfg.out);

  std::vector<StoryRow> rows;
  std::map<std::string, std::uint64_t> failures;
  KeyValues summary;
  std::vector<std::vector<std::string>> train_tokens;
  for (auto split : {corpus::Split::Train, corpus::Split::Val, corpus::Split::Test}) {
    auto it = cfg.sis.find(split);
    if (it == cfg.sis.end()) continue;
    auto loaded = corpus::load_sis(it->second, split);
    const std::string name = corpus::to_string(split);
    std::size_t covered = 0;
    charex::CharacterLexicon split_chars;
    std::vector<postag::TaggedSentence> tagged;
    if (auto pt = cfg.pretagged.find(split); pt != cfg.pretagged.end()) {
      detail::check_input(pt->second, "pretagged file");
      tagged = postag::load_pretagged(read_file(pt->second));
      if (tagged.size() != corpus::kStoryLength * loaded.stories.size()) {
        throw FormatError(pt->second.string() + ": " + std::to_string(tagged.size()) + " segments for " +
                          std::to_string(loaded.stories.size()) + " stories (expected 5 per story)");
      }
    }
    for (std::size_t si = 0; si < loaded.stories.size(); ++si) {
      const auto& story = loaded.stories[si];
      StoryRow r{story.story_id, split, {}};
      if (tagged.empty()) {
        r.characters = charex::extract_from_segments(lex, story.sentences, stop, cfg.extract);
      } else {
        std::vector<postag::TaggedSentence> segs(tagged.begin() + static_cast<std::ptrdiff_t>(si * corpus::kStoryLength),
                                                 tagged.begin() + static_cast<std::ptrdiff_t>((si + 1) * corpus::kStoryLength));
        r.characters = charex::extract_story_characters(lex, segs, cfg.extract);
      }
      for (const auto& w : r.characters.not_in_lexicon) ++failures[w];
      for (const auto& c : r.characters.characters) split_chars.add(c.name, c.kind);
      if (!r.characters.characters.empty()) ++covered;
      if (split == corpus::Split::Train) train_tokens.push_back(story.tokens());
      rows.push_back(std::move(r));
    }
    summary["annotations." + name] = std::to_string(loaded.annotation_count);
    summary["usable_stories." + name] = std::to_string(loaded.stories.size());
    summary["unusable_stories." + name] = std::to_string(loaded.unusable_story_ids.size());
    summary["stories_with_characters." + name] = std::to_string(covered);
    summary["coverage." + name] =
        loaded.stories.empty() ? "0" : format_number(static_cast<double>(covered) / static_cast<double>(loaded.stories.size()));
    summary["distinct_characters." + name] = std::to_string(split_chars.size());
  }
  auto universe = universe_of(rows);
  std::map<std::string, std::uint64_t> story_count;
  for (const auto& r : rows) {
    for (const auto& c : r.characters.characters) ++story_count[c.name];
  }
  std::size_t covered = 0;
  for (const auto& r : rows) covered += r.characters.characters.empty() ? 0 : 1;
  summary["stories"] = std::to_string(rows.size());
  summary["stories_with_characters"] = std::to_string(covered);
  summary["coverage"] =
      rows.empty() ? "0" : format_number(static_cast<double>(covered) / static_cast<double>(rows.size()));
  summary["distinct_characters"] = std::to_string(universe.size());
  summary["not_in_lexicon_distinct"] = std::to_string(failures.size());
  summary["vocab_size"] = std::to_string(corpus::count_token_types(train_tokens));
  summary["policy"] = cfg.extract.policy == wordnet::SensePolicy::FirstSense ? "first" : "any";
  summary["key"] = cfg.extract.key == charex::CharacterKey::Surface ? "surface" : "lemma";

  write_file(cfg.out / kStoryCharactersFile, story_characters_tsv(rows));
  std::string chars = "character\tkind\tstories\n";
  for (charex::CharacterId i = 0; i < universe.size(); ++i) {
    const auto& n = universe.name(i);
    chars += n + '\t' + wordnet::to_string(universe.kind(i)) + '\t' + std::to_string(story_count[n]) + '\n';
  }
  write_file(cfg.out / kCharactersFile, chars);
  std::vector<std::pair<std::string, std::uint64_t>> fails(failures.begin(), failures.end());
  std::stable_sort(fails.begin(), fails.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::string nil = "word\tcount\n";
  for (const auto& [w, n] : fails) nil += w + '\t' + std::to_string(n) + '\n';
  write_file(cfg.out / kNotInLexiconFile, nil);
  detail::write_summary(cfg, cfg.out / kExtractSummaryFile, summary);
  out << "extract: " << rows.size() << " stories, " << universe.size() << " distinct characters, "
      << failures.size() << " words not in WordNet\n";
  return kOk;
}

inline int cmd_stats(const RunConfig& cfg, std::ostream& out) {
  auto rows = parse_story_characters_tsv(read_file(detail::require(cfg, kStoryCharactersFile, "extract")));
  auto summary = parse_key_values(read_file(detail::require(cfg, kExtractSummaryFile, "extract")));
  auto vocab_size = model::detail::parse_u64("vocab_size", summary["vocab_size"]);
  std::vector<charex::StoryCharacters> train;
  for (const auto& r : rows) {
    if (r.split == corpus::Split::Train) train.push_back(r.characters);
  }
  if (train.empty()) throw PreconditionError("stats: no training stories in " + std::string(kStoryCharactersFile));
  auto st = charex::build_statistics(train, vocab_size);
  const auto n = st.lexicon.size();
  write_file(cfg.out / "frequency.tsv", charex::frequency_tsv(charex::top_frequent(st.lexicon, st.frequency, n)));
  write_file(cfg.out / "cooccurrence.tsv",
             charex::pairs_tsv(charex::top_pairs(st.lexicon, st.cooccurrence, n * n)));
  write_file(cfg.out / "top_frequency.tsv",
             charex::frequency_tsv(charex::top_frequent(st.lexicon, st.frequency, cfg.top)));
  write_file(cfg.out / "top_pairs.tsv", charex::pairs_tsv(charex::top_pairs(st.lexicon, st.cooccurrence, cfg.top)));
  write_file(cfg.out / "tiers.tsv", charex::tiers_tsv(st.lexicon, st.frequency));
  auto tiers = charex::tier_segmentation(st.frequency);
  KeyValues kv;
  kv["stories"] = std::to_string(train.size());
  kv["distinct_characters"] = std::to_string(n);
  kv["coverage"] = format_number(st.coverage);
  kv["vocab_size"] = std::to_string(vocab_size);
  kv["tier.high"] = std::to_string(tiers.high.size());
  kv["tier.mid"] = std::to_string(tiers.mid.size());
  kv["tier.low"] = std::to_string(tiers.low.size());
  kv["top"] = std::to_string(cfg.top);
  detail::write_summary(cfg, cfg.out / "stats_summary.txt", kv);
  out << "stats: " << train.size() << " training stories, " << n << " distinct characters, coverage "
      << format_number(st.coverage) << "\n";
  return kOk;
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out) {
  auto ctx = detail::character_context(cfg);
  if (!cfg.sis.count(corpus::Split::Train)) throw PathError("train needs --sis train=PATH");
  detail::check_input(cfg.sis.at(corpus::Split::Train), "SIS file");
  auto features = detail::load_features(cfg);
  auto stories = detail::load_split(cfg, corpus::Split::Train);
  if (stories.empty()) throw PreconditionError("train: no usable training stories");
  auto streams = detail::token_streams(stories);
  auto vocab = corpus::build_vocabulary(streams, cfg.train.vocab_threshold);
  auto table = detail::semantic_table(cfg, ctx, stories);
  auto examples = model::build_examples(stories, features, table, vocab);

  auto mc = cfg.model;
  mc.feature_dim = features.dim();
  mc.semantic_dim = ctx.stats.lexicon.size();
  if (mc.semantic_dim == 0) throw PreconditionError("train: the corpus has no characters");
  model::StoryModel<float> net(mc, vocab.size(), cfg.train.seed);
  auto history = model::train<float>(net, examples, cfg.train, [&](std::size_t epoch, double loss) {
    out << "epoch " << epoch << " loss " << format_number(loss) << "\n";
  });
  auto ck = model::make_checkpoint(net, cfg.train, history.size(), vocab.fingerprint(), ctx.universe.fingerprint());
  model::checkpoint_save(cfg.out / kCheckpointFile, ck);
  write_file(cfg.out / kVocabFile, vocab.to_text());
  write_file(cfg.out / kLossFile, model::loss_tsv(history));
  KeyValues kv;
  mc.write(kv);
  cfg.train.write(kv);
  kv["vocab_size"] = std::to_string(vocab.size());
  kv["examples"] = std::to_string(examples.size());
  kv["loss.first"] = format_number(history.front());
  kv["loss.last"] = format_number(history.back());
  detail::write_summary(cfg, cfg.out / "train_summary.txt", kv);
  return kOk;
}

inline int cmd_generate(const RunConfig& cfg, std::ostream& out) {
  auto ctx = detail::character_context(cfg);
  auto ck_path = detail::require(cfg, kCheckpointFile, "train");
  auto vocab = corpus::Vocabulary::parse(read_file(detail::require(cfg, kVocabFile, "train")));
  if (cfg.sis.empty()) throw PathError("missing required --sis");
  for (const auto& [split, p] : cfg.sis) detail::check_input(p, "SIS file");
  auto features = detail::load_features(cfg);
  auto ck = model::checkpoint_load(ck_path, vocab.fingerprint(), ctx.universe.fingerprint());
  // decode length is an inference setting, not part of the trained weights
  ck.model.max_decode_len = cfg.model.max_decode_len;
  model::StoryModel<float> decoder(ck.model, ck.vocab_size);
  model::restore(ck, decoder);
  auto split = cfg.sis.count(corpus::Split::Test) ? corpus::Split::Test : cfg.sis.begin()->first;
  auto stories = detail::load_split(cfg, split);
  auto table = detail::semantic_table(cfg, ctx, stories, cfg.semantics);
  auto examples = model::build_examples(stories, features, table, vocab);
  auto mode = cfg.beam == 0 ? model::DecodeMode::greedy() : model::DecodeMode::beam(cfg.beam);
  std::string tsv = "story_id\ttext\n";
  for (const auto& ex : examples) {
    auto f = model::cast_vector<float>(ex.features);
    auto s = model::cast_vector<float>(ex.semantics);
    auto ids = model::generate<float>(decoder, vocab, f, s, mode);
    tsv += ex.story_id + '\t' + model::story_text(vocab, ids) + '\n';
  }
  write_file(cfg.out / kGeneratedFile, tsv);
  out << "generate: " << examples.size() << " stories (" << corpus::to_string(split) << ")\n";
  return kOk;
}

inline int cmd_evaldist(const RunConfig& cfg, std::ostream& out) {
  auto gen_path = detail::require(cfg, kGeneratedFile, "generate");
  auto rows = parse_story_characters_tsv(read_file(detail::require(cfg, kStoryCharactersFile, "extract")));
  auto lex = detail::load_wordnet(cfg);
  auto stop = detail::load_stoplist(cfg);
  std::map<std::string, const StoryRow*> by_id;
  for (const auto& r : rows) by_id[r.story_id] = &r;

  std::vector<model::Example> examples;
  std::vector<charex::StoryCharacters> truth;
  std::map<std::string, std::vector<std::string>> generated;
  std::size_t lineno = 0;
  const auto gen_text = read_file(gen_path);
  for (auto line : lines_of(gen_text)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw FormatError(gen_path.string() + ": expected story_id<TAB>text", lineno);
    std::string id(line.substr(0, tab));
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataJoinError(id, "generated story has no ground-truth row");
    generated[id] = corpus::tokenize(line.substr(tab + 1));
    model::Example ex;
    ex.story_id = id;
    examples.push_back(std::move(ex));
    truth.push_back(it->second->characters);
  }
  auto report = model::evaluate_distribution(
      examples, truth, [&](const model::Example& ex) { return generated.at(ex.story_id); }, lex, stop, cfg.extract);
  write_file(cfg.out / kTierComparisonFile, model::tier_comparison_tsv(report.rows));
  KeyValues kv;
  kv["stories"] = std::to_string(examples.size());
  kv["characters"] = std::to_string(report.rows.size());
  std::size_t with = 0;
  for (const auto& c : report.generated_characters) with += c.characters.empty() ? 0 : 1;
  kv["generated_stories_with_characters"] = std::to_string(with);
  detail::write_summary(cfg, cfg.out / "evaldist_summary.txt", kv);
  out << "evaldist: " << examples.size() << " stories, " << report.rows.size() << " characters compared\n";
  return kOk;
}

inline int cmd_synth_features(const RunConfig& cfg, std::ostream& out) {
  if (cfg.sis.empty()) throw PathError("missing required --sis");
  auto dest = detail::need_path(cfg.features, "--features (output path)");
  std::vector<corpus::StorySample> all;
  for (const auto& [split, p] : cfg.sis) {
    detail::check_input(p, "SIS file");
    auto s = corpus::load_sis(p, split).stories;
    all.insert(all.end(), s.begin(), s.end());
  }
  auto store = corpus::synthetic_features(all, cfg.features_dim, cfg.features_seed);
  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  corpus::feature_store_write(dest, store);
  out << "synth-features: " << store.size() << " photos, dim " << store.dim() << "\n";
  return kOk;
}

/// Toy bundle configuration written next to the data.
inline std::string toy_config_text() {
  return "# Toy bundle: 50 templated training stories, 10 test stories, synthetic\n"
         "# photo features. Paths are relative to this file.\n"
         "wordnet = ../wordnet-mini\n"
         "sis.train = train.json\n"
         "sis.test = test.json\n"
         "features = features.cfv\n"
         "model.embed_dim = 16\n"
         "model.hidden = 32\n"
         "model.layers = 2\n"
         "model.rank = 4\n"
         "model.dropout = 0.5\n"
         "model.max_decode_len = 60\n"
         "train.lr = 0.01\n"
         "train.batch = 10\n"
         "train.epochs = 100\n"
         "train.seed = 1\n"
         "train.vocab_threshold = 1\n";
}

inline int cmd_synth_toy(const RunConfig& cfg, std::ostream& out) {
  auto toy = model::make_toy_corpus(cfg.toy_train, cfg.toy_test, cfg.toy_seed);
  fs::create_directories(cfg.out);
  write_file(cfg.out / "train.json", corpus::to_sis_json(toy.train));
  write_file(cfg.out / "test.json", corpus::to_sis_json(toy.test));
  std::vector<corpus::StorySample> all = toy.train;
  all.insert(all.end(), toy.test.begin(), toy.test.end());
  corpus::feature_store_write(cfg.out / "features.cfv",
                              corpus::synthetic_features(all, cfg.features_dim, cfg.features_seed));
  write_file(cfg.out / "toy.conf", toy_config_text());
  out << "synth-toy: " << toy.train.size() << " train / " << toy.test.size() << " test stories in "
      << cfg.out.string() << "\n";
  return kOk;
}

// ---- entry point ----

inline int dispatch(const RunConfig& cfg, std::ostream& out) {
  if (cfg.command == "extract") return cmd_extract(cfg, out);
  if (cfg.command == "stats") return cmd_stats(cfg, out);
  if (cfg.command == "train") return cmd_train(cfg, out);
  if (cfg.command == "generate") return cmd_generate(cfg, out);
  if (cfg.command == "evaldist") return cmd_evaldist(cfg, out);
  if (cfg.command == "synth-features") return cmd_synth_features(cfg, out);
  if (cfg.command == "synth-toy") return cmd_synth_toy(cfg, out);
  throw PreconditionError("no subcommand given");
}

/// Maps an exception from a subcommand to its exit code.
inline int exit_code_for(const std::exception_ptr& e, std::ostream& err) {
  try {
    std::rethrow_exception(e);
  } catch (const MissingPrerequisite& x) {
    err << "error: " << x.what() << "\n";
    return kMissing;
  } catch (const PathError& x) {
    err << "error: " << x.what() << "\n";
    return kPath;
  } catch (const IoError& x) {
    err << "error: " << x.what() << "\n";
    return kPath;
  } catch (const FormatError& x) {
    err << "error: " << x.what() << "\n";
    return kFormat;
  } catch (const IncompatibleCheckpoint& x) {
    err << "error: " << x.what() << "\n";
    return kFormat;
  } catch (const std::exception& x) {
    err << "error: " << x.what() << "\n";
    return kOther;
  }
}

/// Parses arguments (without the program name handled by the caller) and
/// runs the subcommand.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"charstory: character-centric visual storytelling pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string wordnet_dir, features_path, out_dir, config_path, stoplist_path;
  std::vector<std::string> sis_specs, pretagged_specs, sets;
  std::optional<std::uint64_t> seed;
  bool deterministic = false, no_timestamp = false;
  std::optional<std::size_t> top;
  app.add_option("--wordnet", wordnet_dir, "WordNet dict directory (default: $WNHOME)");
  app.add_option("--sis", sis_specs, "SIS json, as split=PATH or PATH for train");
  app.add_option("--pretagged", pretagged_specs,
                 "token<TAB>tag file per split (split=PATH): one block per story segment, stories in SIS order");
  app.add_option("--features", features_path, "CFV1 feature file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--stoplist", stoplist_path, "stopword list (default: built-in)");
  app.add_option("--set", sets, "key=value override (repeatable)");
  app.add_option("--seed", seed, "training / generation seed");
  app.add_option("--top", top, "size of the top-N tables (stats)");
  app.add_flag("--deterministic", deterministic, "fixed-order reductions (always on; accepted for scripts)");
  app.add_flag("--no-timestamp", no_timestamp, "omit the generated_at line from summaries");

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"extract", "extract characters per story and the WordNet failure inventory"},
      {"stats", "frequency, co-occurrence and tier tables"},
      {"train", "train the story model"},
      {"generate", "generate stories for the test split"},
      {"evaldist", "compare generated and ground-truth character distributions"},
      {"synth-features", "write synthetic CFV1 features for the given stories"},
      {"synth-toy", "write the toy bundle (stories, features, config)"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kOther;
  }

  RunConfig cfg;
  try {
    cfg.command = app.get_subcommands().front()->get_name();
    if (!config_path.empty()) {
      fs::path cp(config_path);
      detail::check_input(cp, "config file");
      auto base = cp.parent_path();
      try {
        for (const auto& [k, v] : parse_key_values(read_file(cp))) cfg.set(k, v, base);
      } catch (const FormatError& e) {
        throw FormatError(cp.string() + ": " + e.detail(), e.line());
      }
    }
    for (const auto& s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos) throw FormatError("--set expects key=value, got '" + s + "'");
      cfg.set(std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1))));
    }
    if (!wordnet_dir.empty()) {
      cfg.wordnet = wordnet_dir;
    } else if (!cfg.wordnet) {
      if (const char* env = std::getenv("WNHOME")) {
        fs::path p(env);
        cfg.wordnet = fs::exists(p / "dict" / "index.noun") ? p / "dict" : p;
      }
    }
    for (const auto& spec : sis_specs) {
      auto eq = spec.find('=');
      if (eq == std::string::npos) cfg.sis[corpus::Split::Train] = spec;
      else cfg.sis[corpus::parse_split(spec.substr(0, eq))] = spec.substr(eq + 1);
    }
    for (const auto& spec : pretagged_specs) {
      auto eq = spec.find('=');
      if (eq == std::string::npos) cfg.pretagged[corpus::Split::Train] = spec;
      else cfg.pretagged[corpus::parse_split(spec.substr(0, eq))] = spec.substr(eq + 1);
    }
    if (!features_path.empty()) cfg.features = features_path;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (!stoplist_path.empty()) cfg.stoplist = stoplist_path;
    if (seed) cfg.train.seed = *seed;
    if (top) cfg.top = *top;
    cfg.deterministic = true;
    cfg.train.deterministic = true;
    cfg.timestamp = !no_timestamp;
    return dispatch(cfg, out);
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args), out, err);
}

}  // namespace charstory::cli
