#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "charstory/charex.hpp"
#include "charstory/corpus.hpp"
#include "charstory/model/config.hpp"
#include "charstory/model/story_model.hpp"
#include "charstory/nnet/adam.hpp"

namespace charstory::model {

/// One story ready for the model: 5F features, semantic vector and token
/// ids without BOS/EOS.
struct Example {
  std::string story_id;
  std::vector<float> features;
  std::vector<float> semantics;
  std::vector<std::uint32_t> tokens;
};

using SemanticTable = std::map<std::string, std::vector<float>>;

/// Semantic vector of one story: its characters known to `stats` are
/// active, passive characters come from the configured method. Characters
/// missing from the statistics are ignored.
inline charex::SemanticVector semantic_vector_for(const charex::StoryCharacters& story,
                                                  const charex::Statistics& stats, PassiveMethod method,
                                                  std::optional<std::size_t> k) {
  charex::ActiveSet active;
  for (const auto& c : story.characters) {
    if (auto id = stats.lexicon.find(c.name)) active.insert(*id);
  }
  auto passive = method == PassiveMethod::M1
                     ? charex::select_passive_m1(active, stats.cooccurrence, stats.frequency)
                     : charex::select_passive_m2(active, stats.lexicon, stats.cooccurrence, stats.frequency, k);
  return charex::build_semantic_vector(active, passive, stats.frequency, stats.lexicon);
}

/// Joins stories with their photo features and semantic vectors.
inline std::vector<Example> build_examples(std::span<const corpus::StorySample> stories,
                                           const corpus::FeatureStore& features, const SemanticTable& semantics,
                                           const corpus::Vocabulary& vocab) {
  std::vector<Example> out;
  out.reserve(stories.size());
  for (const auto& story : stories) {
    Example ex;
    ex.story_id = story.story_id;
    ex.features.reserve(corpus::kStoryLength * features.dim());
    for (const auto& photo : story.photo_ids) {
      const auto* f = features.find(photo);
      if (!f) throw DataJoinError(story.story_id, "no feature vector for photo '" + photo + "'");
      ex.features.insert(ex.features.end(), f->begin(), f->end());
    }
    auto it = semantics.find(story.story_id);
    if (it == semantics.end()) throw DataJoinError(story.story_id, "no semantic vector");
    ex.semantics = it->second;
    auto toks = story.tokens();
    ex.tokens = vocab.encode(toks);
    out.push_back(std::move(ex));
  }
  return out;
}

template <class T>
std::vector<T> cast_vector(std::span<const float> v) {
  return std::vector<T>(v.begin(), v.end());
}

inline nnet::AdamConfig adam_config(const TrainConfig& cfg) {
  nnet::AdamConfig a;
  a.lr = cfg.lr;
  a.beta1 = cfg.beta1;
  a.beta2 = cfg.beta2;
  a.eps = cfg.eps;
  return a;
}

/// Mean per-token loss of one batch; gradients of that mean are
/// accumulated into the parameters when `backward` is set. Samples are
/// visited in ascending index order whatever order `batch` lists them in.
template <class T>
double batch_loss(StoryModel<T>& model, std::span<const Example> examples, std::vector<std::size_t> batch,
                  bool backward, nnet::Rng* dropout_rng) {
  std::sort(batch.begin(), batch.end());
  std::size_t tokens = 0;
  for (auto i : batch) tokens += examples[i].tokens.size() + 1;
  if (tokens == 0) return 0.0;
  const T scale = backward ? T(1) / static_cast<T>(tokens) : T(0);
  double sum = 0.0;
  for (auto i : batch) {
    const auto& ex = examples[i];
    auto f = cast_vector<T>(ex.features);
    auto s = cast_vector<T>(ex.semantics);
    auto r = model.forward_backward(f, s, ex.tokens, scale, dropout_rng);
    sum += r.loss_sum;
  }
  return sum / static_cast<double>(tokens);
}

/// Called after every epoch with (1-based epoch, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

/// Adam over shuffled mini-batches. Returns the per-epoch mean of the batch
/// mean per-token losses. Runs sequentially, so a fixed seed reproduces the
/// history exactly.
template <class T>
std::vector<double> train(StoryModel<T>& model, std::span<const Example> examples, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (examples.empty()) throw PreconditionError("train: no examples");
  const auto adam = adam_config(cfg);
  adam.validate();
  for (const auto& ex : examples) {
    nnet::check_dim(ex.features.size(), corpus::kStoryLength * model.config().feature_dim, "example features");
    if (ex.semantics.size() != model.config().semantic_dim) {
      throw DataJoinError(ex.story_id, "semantic vector has " + std::to_string(ex.semantics.size()) +
                                           " entries, model expects " +
                                           std::to_string(model.config().semantic_dim));
    }
  }
  auto params = model.parameters();
  for (auto* p : params) p->zero_grad();
  nnet::Rng order_rng(cfg.seed ^ 0x5eedf00dULL);
  nnet::Rng dropout_rng(cfg.seed ^ 0xd0d0ULL);
  std::vector<std::size_t> order(examples.size());
  std::vector<double> history;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      auto stop = std::min(order.size(), start + cfg.batch);
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(stop));
      total += batch_loss(model, examples, std::move(batch), true, &dropout_rng);
      ++batches;
      for (auto* p : params) nnet::adam_step(*p, adam);
    }
    history.push_back(total / static_cast<double>(batches));
    if (on_epoch) on_epoch(epoch, history.back());
  }
  return history;
}

/// Per-epoch loss table: "epoch\tloss".
inline std::string loss_tsv(std::span<const double> history) {
  std::string out = "epoch\tloss\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out += std::to_string(i + 1) + "\t" + format_number(history[i]) + "\n";
  }
  return out;
}

}  // namespace charstory::model
