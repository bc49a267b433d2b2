#pragma once

// Model-level harnesses shared by the storymodel tests and the acceptance
// runner: gradient checks on small dims and the toy training pipeline.

#include <cmath>
#include <vector>

#include "charstory/charex.hpp"
#include "charstory/storymodel.hpp"
#include "nnet_check.hpp"
#include "test_support.hpp"

namespace charstory::testing {

namespace md = charstory::model;

template <class T = Wide>
nn::GradCheckResult gradcheck_encoder(std::uint64_t seed) {
  nn::Rng rng(seed);
  md::Encoder<T> enc(kCheckInput, kCheckInput, kCheckHidden);
  enc.init(rng);
  std::vector<nn::Param<T>*> ps;
  enc.collect(ps);
  randomize(ps, rng);
  auto features = random_vec<T>(rng, corpus::kStoryLength * kCheckInput);
  auto w = random_vec<T>(rng, kCheckHidden), u = random_vec<T>(rng, kCheckInput);
  auto score = [&](const md::EncoderOutput<T>& out) {
    T total = 0;
    for (std::size_t i = 0; i < w.size(); ++i) total += w[i] * out.subject[i];
    for (std::size_t i = 0; i < u.size(); ++i) total += u[i] * out.seq_embed[i];
    return total;
  };
  auto loss = [&] { return score(enc.forward(features)); };
  auto backward = [&] {
    typename md::Encoder<T>::Trace tr;
    enc.forward(features, &tr);
    enc.backward(tr, w, u);
  };
  return nn::grad_check(ps, loss, backward, {kCheckStep, 10000, seed});
}

inline md::ModelConfig check_model_config(md::Variant v) {
  md::ModelConfig cfg;
  cfg.feature_dim = kCheckInput;
  cfg.embed_dim = kCheckInput;
  cfg.hidden = kCheckHidden;
  cfg.layers = 2;
  cfg.semantic_dim = kCheckSemantic;
  cfg.rank = kCheckRank;
  cfg.variant = v;
  cfg.dropout = 0.0;
  return cfg;
}

/// Teacher-forced loss of one random story through encoder, decoder and
/// output layer.
template <class T = Wide>
nn::GradCheckResult gradcheck_full_model(md::Variant v, std::uint64_t seed) {
  const std::size_t vocab = 12;
  md::StoryModel<T> model(check_model_config(v), vocab, seed);
  nn::Rng rng(seed + 1000);
  auto ps = model.parameters();
  randomize(ps, rng);
  auto features = random_vec<T>(rng, corpus::kStoryLength * kCheckInput);
  std::vector<T> sem(kCheckSemantic);
  for (auto& x : sem) x = static_cast<T>(rng.uniform(0.0, 0.2));
  std::vector<std::uint32_t> story;
  for (int i = 0; i < 4; ++i) story.push_back(static_cast<std::uint32_t>(4 + rng.below(vocab - 4)));
  auto loss = [&] { return model.loss(features, sem, story).loss_sum; };
  auto backward = [&] { model.forward_backward(features, sem, story, 1.0, nullptr); };
  return nn::grad_check(ps, loss, backward, {kCheckStep, 10000, seed});
}

/// Everything the toy learning runs need, built the same way the CLI does:
/// extraction on the mini WordNet, training-split statistics over the full
/// character universe, vocabulary threshold 1, synthetic 16-d features.
struct ToySetup {
  md::ToyCorpus corpus;
  corpus::Vocabulary vocab;
  charex::CharacterLexicon universe;
  charex::Statistics stats;
  std::vector<charex::StoryCharacters> train_chars, test_chars;
  std::vector<md::Example> train, test;
  md::ModelConfig model;
  md::TrainConfig cfg;
};

inline ToySetup toy_setup(md::Variant variant = md::Variant::ScnGru) {
  ToySetup t;
  t.corpus = md::make_toy_corpus(50, 10, 7);
  const auto& lex = mini_lexicon();
  const auto& stop = postag::Stoplist::builtin();
  for (const auto& s : t.corpus.train) t.train_chars.push_back(charex::extract_from_segments(lex, s.sentences, stop));
  for (const auto& s : t.corpus.test) t.test_chars.push_back(charex::extract_from_segments(lex, s.sentences, stop));
  for (const auto* group : {&t.train_chars, &t.test_chars}) {
    for (const auto& sc : *group) {
      for (const auto& c : sc.characters) t.universe.add(c.name, c.kind);
    }
  }
  std::vector<std::vector<std::string>> streams;
  for (const auto& s : t.corpus.train) streams.push_back(s.tokens());
  t.stats = charex::build_statistics(t.train_chars, corpus::count_token_types(streams), &t.universe);
  t.vocab = corpus::build_vocabulary(streams, 1);

  std::vector<corpus::StorySample> all = t.corpus.train;
  all.insert(all.end(), t.corpus.test.begin(), t.corpus.test.end());
  auto features = corpus::synthetic_features(all, 16, 0);
  md::SemanticTable table;
  auto add = [&](const std::vector<corpus::StorySample>& stories, const std::vector<charex::StoryCharacters>& chars) {
    for (std::size_t i = 0; i < stories.size(); ++i) {
      table[stories[i].story_id] = md::semantic_vector_for(chars[i], t.stats, md::PassiveMethod::M1, std::nullopt).probs;
    }
  };
  add(t.corpus.train, t.train_chars);
  add(t.corpus.test, t.test_chars);
  t.train = md::build_examples(t.corpus.train, features, table, t.vocab);
  t.test = md::build_examples(t.corpus.test, features, table, t.vocab);

  t.model.feature_dim = 16;
  t.model.embed_dim = 16;
  t.model.hidden = 32;
  t.model.layers = 2;
  t.model.semantic_dim = t.universe.size();
  t.model.rank = 4;
  t.model.variant = variant;
  t.model.dropout = 0.5;
  t.model.max_decode_len = 60;
  t.cfg.lr = 0.01;
  t.cfg.batch = 10;
  t.cfg.epochs = 100;
  t.cfg.seed = 1;
  t.cfg.vocab_threshold = 1;
  return t;
}

/// Max |Δ logit| at step 0 between two semantic vectors.
template <class T>
double step0_logit_gap(const md::StoryModel<T>& model, std::span<const T> features, std::span<const T> s1,
                       std::span<const T> s2) {
  auto a = model.start(features, s1).logits;
  auto b = model.start(features, s2).logits;
  double gap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, std::abs(static_cast<double>(a[i] - b[i])));
  return gap;
}

/// Count of random trials (fresh model, input and semantic pair differing
/// in one coordinate) whose step-0 logits differ.
inline int semantic_sensitivity_hits(md::Variant v, int trials, std::uint64_t seed) {
  nn::Rng rng(seed);
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    md::ModelConfig cfg;
    cfg.feature_dim = 6;
    cfg.embed_dim = 8;
    cfg.hidden = 10;
    cfg.layers = 2;
    cfg.semantic_dim = 7;
    cfg.rank = 3;
    cfg.variant = v;
    md::StoryModel<float> model(cfg, 20, rng.next());
    std::vector<float> f(corpus::kStoryLength * cfg.feature_dim), s1(cfg.semantic_dim), s2;
    for (auto& x : f) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (auto& x : s1) x = rng.uniform() < 0.5 ? 0.0f : static_cast<float>(rng.uniform(0.0, 0.1));
    s2 = s1;
    s2[rng.below(s2.size())] += 0.05f;
    if (step0_logit_gap<float>(model, f, s1, s2) > 0.0) ++hits;
  }
  return hits;
}

}  // namespace charstory::testing
