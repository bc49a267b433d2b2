#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "model_check.hpp"

namespace md = charstory::model;
namespace nn = charstory::nnet;
namespace cx = charstory::charex;
using charstory::testing::random_vec;

namespace {

const charstory::testing::ToySetup& toy() {
  static const auto t = charstory::testing::toy_setup();
  return t;
}

md::ModelConfig tiny_config(md::Variant v = md::Variant::ScnGru) {
  md::ModelConfig cfg;
  cfg.feature_dim = 4;
  cfg.embed_dim = 5;
  cfg.hidden = 6;
  cfg.layers = 2;
  cfg.semantic_dim = 3;
  cfg.rank = 2;
  cfg.variant = v;
  cfg.max_decode_len = 12;
  return cfg;
}

std::vector<float> floats(nn::Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

}  // namespace

TEST(Encoder, ZeroParamsGiveZeroSubject) {
  md::Encoder<double> enc(8, 5, 6);
  std::vector<nn::Param<double>*> ps;
  enc.collect(ps);
  for (auto* p : ps) p->fill(0.0);
  std::vector<double> f(5 * 8, 0.0);
  auto out = enc.forward(f);
  EXPECT_EQ(out.subject, std::vector<double>(6, 0.0));
  EXPECT_EQ(out.seq_embed, std::vector<double>(5, 0.0));
}

TEST(Encoder, ShapesAndErrors) {
  nn::Rng rng(1);
  md::Encoder<double> enc(8, 5, 6);
  enc.init(rng);
  std::vector<std::vector<double>> photos(5);
  for (auto& p : photos) p = random_vec(rng, 8);
  auto out = md::encode_sequence<double>(enc, photos);
  EXPECT_EQ(out.subject.size(), 6u);
  EXPECT_EQ(out.seq_embed.size(), 5u);
  auto four = photos;
  four.pop_back();
  EXPECT_THROW(md::encode_sequence<double>(enc, four), charstory::DimensionError);
  auto bad = photos;
  bad[2].push_back(0.0);
  EXPECT_THROW(md::encode_sequence<double>(enc, bad), charstory::DimensionError);
  EXPECT_THROW(enc.forward(std::vector<double>(39)), charstory::DimensionError);
}

TEST(Encoder, PhotoOrderMatters) {
  nn::Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    md::Encoder<double> enc(8, 5, 6);
    enc.init(rng);
    std::vector<std::vector<double>> photos(5);
    for (auto& p : photos) p = random_vec(rng, 8);
    auto a = md::encode_sequence<double>(enc, photos);
    std::swap(photos[0], photos[3]);
    auto b = md::encode_sequence<double>(enc, photos);
    EXPECT_NE(a.subject, b.subject);
  }
}

class ModelGradCheck : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(ModelGradCheck, Encoder) {
  auto r = charstory::testing::gradcheck_encoder(GetParam());
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param << "[" << r.worst_index << "]";
}

TEST_P(ModelGradCheck, FullModelAllVariants) {
  for (auto v : {md::Variant::ScnGru, md::Variant::ScnLstm, md::Variant::Rt2Lstm}) {
    auto r = charstory::testing::gradcheck_full_model(v, GetParam());
    EXPECT_LT(r.max_rel_error, 1e-4) << md::to_string(v) << " " << r.worst_param << "[" << r.worst_index << "]";
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, ModelGradCheck, ::testing::Values(1, 2, 3, 4, 5));

TEST(Config, ValidationAndKeys) {
  md::ModelConfig cfg;
  cfg.hidden = 0;
  EXPECT_THROW(cfg.validate(), charstory::PreconditionError);
  cfg = {};
  cfg.dropout = 1.0;
  EXPECT_THROW(cfg.validate(), charstory::PreconditionError);
  md::TrainConfig tc;
  tc.batch = 0;
  EXPECT_THROW(tc.validate(), charstory::PreconditionError);
  EXPECT_TRUE(cfg.set("model.variant", "rt2-lstm"));
  EXPECT_EQ(cfg.variant, md::Variant::Rt2Lstm);
  EXPECT_FALSE(cfg.set("model.colour", "red"));
  EXPECT_THROW(cfg.set("model.hidden", "-3"), charstory::FormatError);
  EXPECT_THROW(md::parse_variant("gru"), charstory::FormatError);
}

TEST(Examples, MissingJoinsNameTheStory) {
  const auto& t = toy();
  auto features = charstory::corpus::synthetic_features(t.corpus.train, 16, 0);
  md::SemanticTable table;
  for (const auto& s : t.corpus.train) table[s.story_id] = std::vector<float>(t.universe.size(), 0.0f);
  EXPECT_EQ(md::build_examples(t.corpus.train, features, table, t.vocab).size(), 50u);

  auto no_sem = table;
  no_sem.erase(t.corpus.train[3].story_id);
  try {
    md::build_examples(t.corpus.train, features, no_sem, t.vocab);
    FAIL() << "expected DataJoinError";
  } catch (const charstory::DataJoinError& e) {
    EXPECT_EQ(e.story_id(), t.corpus.train[3].story_id);
  }
  charstory::corpus::FeatureStore partial(16);
  for (const auto& [id, v] : features.vectors()) {
    if (id != t.corpus.train[7].photo_ids[2]) partial.insert(id, v);
  }
  try {
    md::build_examples(t.corpus.train, partial, table, t.vocab);
    FAIL() << "expected DataJoinError";
  } catch (const charstory::DataJoinError& e) {
    EXPECT_EQ(e.story_id(), t.corpus.train[7].story_id);
  }

  auto examples = t.train;
  examples[4].semantics.pop_back();
  md::StoryModel<float> model(t.model, t.vocab.size(), 1);
  auto cfg = t.cfg;
  cfg.epochs = 1;
  try {
    md::train<float>(model, examples, cfg);
    FAIL() << "expected DataJoinError";
  } catch (const charstory::DataJoinError& e) {
    EXPECT_EQ(e.story_id(), examples[4].story_id);
  }
}

TEST(Train, BatchOrderDoesNotChangeLossOrGradients) {
  const auto& t = toy();
  md::StoryModel<float> a(t.model, t.vocab.size(), 3);
  md::StoryModel<float> b(t.model, t.vocab.size(), 3);
  double la = md::batch_loss<float>(a, t.train, {0, 5, 9, 2}, true, nullptr);
  double lb = md::batch_loss<float>(b, t.train, {9, 2, 5, 0}, true, nullptr);
  EXPECT_EQ(la, lb);
  auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->grad, pb[i]->grad) << pa[i]->name;
}

TEST(Train, DeterministicHistories) {
  const auto& t = toy();
  auto cfg = t.cfg;
  cfg.epochs = 3;
  md::StoryModel<float> a(t.model, t.vocab.size(), cfg.seed);
  md::StoryModel<float> b(t.model, t.vocab.size(), cfg.seed);
  auto ha = md::train<float>(a, t.train, cfg);
  auto hb = md::train<float>(b, t.train, cfg);
  EXPECT_EQ(ha, hb);
  EXPECT_EQ(md::loss_tsv(ha), md::loss_tsv(hb));
  EXPECT_EQ(ha.size(), 3u);
}

TEST(Train, ToyCorpusLearns) {
  const auto& t = toy();
  md::StoryModel<float> model(t.model, t.vocab.size(), t.cfg.seed);
  auto history = md::train<float>(model, t.train, t.cfg);
  ASSERT_EQ(history.size(), 100u);
  const double uniform = std::log(static_cast<double>(t.vocab.size()));
  EXPECT_NEAR(history.front(), uniform, 0.1 * uniform);
  EXPECT_LE(history.back(), 0.5 * history.front());
}

TEST(Generate, ZeroLengthAndVocabularyContract) {
  nn::Rng rng(4);
  std::vector<std::string> toks{"<pad>", "<bos>", "<eos>", "<unk>"};
  for (int i = 0; i < 8; ++i) toks.push_back("w" + std::to_string(i));
  auto vocab = charstory::corpus::Vocabulary::from_tokens(toks);
  for (auto v : {md::Variant::ScnGru, md::Variant::ScnLstm, md::Variant::Rt2Lstm}) {
    auto cfg = tiny_config(v);
    for (int trial = 0; trial < 5; ++trial) {
      md::StoryModel<float> model(cfg, vocab.size(), rng.next());
      auto f = floats(rng, 5 * cfg.feature_dim), s = floats(rng, cfg.semantic_dim);
      auto greedy = md::generate<float>(model, vocab, f, s);
      EXPECT_EQ(md::generate<float>(model, vocab, f, s, md::DecodeMode::beam(1)), greedy);
      EXPECT_LE(greedy.size(), cfg.max_decode_len);
      for (std::size_t w : {2u, 4u}) {
        auto ids = md::generate<float>(model, vocab, f, s, md::DecodeMode::beam(w));
        for (std::size_t i = 0; i < ids.size(); ++i) {
          EXPECT_LT(ids[i], vocab.size());
          if (ids[i] == charstory::corpus::Vocabulary::kEos) {
            EXPECT_EQ(i + 1, ids.size());
          }
        }
      }
    }
    cfg.max_decode_len = 0;
    md::StoryModel<float> model(cfg, vocab.size(), 1);
    auto f = floats(rng, 5 * cfg.feature_dim), s = floats(rng, cfg.semantic_dim);
    EXPECT_TRUE(md::generate<float>(model, vocab, f, s).empty());
  }
  EXPECT_THROW(md::DecodeMode::beam(0), charstory::PreconditionError);
}

TEST(Generate, OverfitSingleStoryIsRegenerated) {
  const auto& t = toy();
  std::vector<md::Example> one{t.train[0]};
  auto mc = t.model;
  mc.dropout = 0.0;
  auto cfg = t.cfg;
  cfg.batch = 1;
  cfg.epochs = 300;
  md::StoryModel<float> model(mc, t.vocab.size(), 5);
  md::train<float>(model, one, cfg);
  auto f = md::cast_vector<float>(one[0].features), s = md::cast_vector<float>(one[0].semantics);
  auto ids = md::generate<float>(model, t.vocab, f, s);
  auto want = one[0].tokens;
  want.push_back(charstory::corpus::Vocabulary::kEos);
  EXPECT_EQ(ids, want) << md::story_text(t.vocab, ids);
  EXPECT_EQ(md::story_tokens(t.vocab, ids), t.corpus.train[0].tokens());
}

TEST(SemanticSensitivity, ScnVariantsReactToEveryChange) {
  EXPECT_GE(charstory::testing::semantic_sensitivity_hits(md::Variant::ScnGru, 100, 10), 99);
  EXPECT_GE(charstory::testing::semantic_sensitivity_hits(md::Variant::ScnLstm, 100, 11), 99);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto& t = toy();
  auto cfg = t.cfg;
  cfg.epochs = 2;
  md::StoryModel<float> model(t.model, t.vocab.size(), 9);
  md::train<float>(model, t.train, cfg);
  auto ck = md::make_checkpoint(model, cfg, 2, t.vocab.fingerprint(), t.universe.fingerprint());
  charstory::testing::TempDir dir("ckpt");
  auto path = dir / "model.csck";
  md::checkpoint_save(path, ck);
  auto loaded = md::checkpoint_load(path, t.vocab.fingerprint(), t.universe.fingerprint());
  EXPECT_EQ(md::encode_checkpoint(loaded), md::encode_checkpoint(ck));
  EXPECT_EQ(loaded.epoch, 2u);

  md::StoryModel<float> copy(loaded.model, loaded.vocab_size, 12345);
  md::restore(loaded, copy);
  auto pa = model.parameters(), pb = copy.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->value, pb[i]->value);
    EXPECT_EQ(pa[i]->adam_m, pb[i]->adam_m);
    EXPECT_EQ(pa[i]->adam_v, pb[i]->adam_v);
    EXPECT_EQ(pa[i]->step, pb[i]->step);
  }
  const auto& ex = t.test[0];
  auto f = md::cast_vector<float>(ex.features), s = md::cast_vector<float>(ex.semantics);
  EXPECT_EQ(model.start(f, s).logits, copy.start(f, s).logits);
  EXPECT_EQ(model.loss(f, s, ex.tokens).loss_sum, copy.loss(f, s, ex.tokens).loss_sum);
}

TEST(Checkpoint, RejectsMismatchAndCorruption) {
  const auto& t = toy();
  md::StoryModel<float> model(t.model, t.vocab.size(), 9);
  auto ck = md::make_checkpoint(model, t.cfg, 0, t.vocab.fingerprint(), t.universe.fingerprint());
  charstory::testing::TempDir dir("ckpt");
  auto path = dir / "model.csck";
  md::checkpoint_save(path, ck);
  EXPECT_THROW(md::checkpoint_load(path, t.vocab.fingerprint() ^ 1, t.universe.fingerprint()),
               charstory::IncompatibleCheckpoint);
  EXPECT_THROW(md::checkpoint_load(path, t.vocab.fingerprint(), 0), charstory::IncompatibleCheckpoint);

  auto bytes = md::encode_checkpoint(ck);
  auto flipped = bytes;
  flipped.back() = static_cast<char>(flipped.back() ^ 0x5a);
  EXPECT_THROW(md::decode_checkpoint(flipped), charstory::FormatError);
  EXPECT_THROW(md::decode_checkpoint(std::string_view(bytes).substr(0, bytes.size() - 3)), charstory::FormatError);
  EXPECT_THROW(md::decode_checkpoint(std::string_view(bytes).substr(0, 10)), charstory::FormatError);
  EXPECT_THROW(md::decode_checkpoint("XXXX" + bytes.substr(4)), charstory::FormatError);
  charstory::write_file(path, flipped);
  EXPECT_THROW(md::checkpoint_load(path, t.vocab.fingerprint(), t.universe.fingerprint()), charstory::FormatError);

  auto other = t.model;
  other.hidden = 8;
  md::StoryModel<float> wrong(other, t.vocab.size(), 1);
  EXPECT_THROW(md::restore(ck, wrong), charstory::IncompatibleCheckpoint);
}

TEST(EvaluateDistribution, TheEndGeneratesNoCharacters) {
  const auto& t = toy();
  auto rep = md::evaluate_distribution(
      t.test, t.test_chars, [](const md::Example&) { return std::vector<std::string>{"the", "end", "."}; },
      charstory::testing::mini_lexicon(), charstory::postag::Stoplist::builtin());
  auto truth = md::story_counts(t.test_chars);
  ASSERT_EQ(rep.rows.size(), truth.size());
  for (const auto& r : rep.rows) {
    EXPECT_EQ(r.generated_count, 0u);
    EXPECT_EQ(r.true_count, truth.at(r.character));
  }
}

TEST(EvaluateDistribution, GroundTruthAsGeneratedCoincides) {
  const auto& t = toy();
  std::map<std::string, std::vector<std::string>> text;
  for (const auto& s : t.corpus.test) text[s.story_id] = s.tokens();
  auto rep = md::evaluate_distribution(
      t.test, t.test_chars, [&](const md::Example& ex) { return text.at(ex.story_id); },
      charstory::testing::mini_lexicon(), charstory::postag::Stoplist::builtin());
  ASSERT_FALSE(rep.rows.empty());
  for (const auto& r : rep.rows) EXPECT_EQ(r.true_count, r.generated_count) << r.character;
}

TEST(EvaluateDistribution, ToyReportEqualsRecount) {
  const auto& t = toy();
  // generated story i is the ground truth of story i+1
  std::map<std::string, std::vector<std::string>> shifted;
  const auto n = t.corpus.test.size();
  for (std::size_t i = 0; i < n; ++i) shifted[t.corpus.test[i].story_id] = t.corpus.test[(i + 1) % n].tokens();
  auto rep = md::evaluate_distribution(
      t.test, t.test_chars, [&](const md::Example& ex) { return shifted.at(ex.story_id); },
      charstory::testing::mini_lexicon(), charstory::postag::Stoplist::builtin());

  // recount: planted names appearing anywhere in the story text
  std::map<std::string, std::uint64_t> recount;
  for (const auto& s : t.corpus.test) {
    auto toks = s.tokens();
    for (const char* c : md::kToyCharacters) {
      if (std::find(toks.begin(), toks.end(), c) != toks.end()) ++recount[c];
    }
  }
  ASSERT_EQ(rep.rows.size(), recount.size());
  for (const auto& r : rep.rows) {
    EXPECT_EQ(r.true_count, recount.at(r.character)) << r.character;
    EXPECT_EQ(r.generated_count, recount.at(r.character)) << r.character;
    EXPECT_EQ(r.tier, cx::tier_of(r.true_count));
  }
  auto tsv = md::tier_comparison_tsv(rep.rows);
  EXPECT_EQ(tsv.substr(0, tsv.find('\n')), "character\ttrue_count\tgenerated_count\ttier");
  EXPECT_THROW(md::evaluate_distribution(t.test, t.train_chars, {}, charstory::testing::mini_lexicon(),
                                         charstory::postag::Stoplist::builtin()),
               charstory::PreconditionError);
}
