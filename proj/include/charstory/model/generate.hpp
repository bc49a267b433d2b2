#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "charstory/corpus.hpp"
#include "charstory/model/story_model.hpp"
#include "charstory/nnet/loss.hpp"

namespace charstory::model {

struct DecodeMode {
  std::size_t beam_width = 0;  // 0 = greedy

  static DecodeMode greedy() { return {}; }
  static DecodeMode beam(std::size_t width) {
    if (width == 0) throw PreconditionError("beam width must be >= 1");
    return {width};
  }
};

namespace detail {

/// Candidate ids ordered best first: log-probability descending, ties by
/// token string.
inline std::vector<std::uint32_t> ranked_candidates(const std::vector<double>& logp,
                                                    const corpus::Vocabulary& vocab, std::size_t keep) {
  std::vector<std::uint32_t> ids(logp.size());
  std::iota(ids.begin(), ids.end(), 0u);
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (logp[a] != logp[b]) return logp[a] > logp[b];
    return vocab.token(a) < vocab.token(b);
  };
  keep = std::min(keep, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(), better);
  ids.resize(keep);
  return ids;
}

}  // namespace detail

/// Decodes one story. The output ends with <eos> when the model emitted it
/// within `max_decode_len` tokens.
template <class T>
std::vector<std::uint32_t> generate(const StoryModel<T>& model, const corpus::Vocabulary& vocab,
                                    std::span<const T> features, std::span<const T> semantics,
                                    DecodeMode mode = DecodeMode::greedy()) {
  if (vocab.size() != model.vocab_size()) {
    throw DimensionError("vocabulary size " + std::to_string(vocab.size()) + " differs from model " +
                         std::to_string(model.vocab_size()));
  }
  const auto max_len = model.config().max_decode_len;
  if (max_len == 0) return {};
  const std::size_t width = mode.beam_width == 0 ? 1 : mode.beam_width;

  using Session = typename StoryModel<T>::Session;
  struct Hyp {
    std::vector<std::uint32_t> tokens;
    double score = 0.0;
    bool done = false;
    Session session;
  };
  auto first = model.start(features, semantics);
  model.advance(first, corpus::Vocabulary::kBos);
  std::vector<Hyp> beam;
  beam.push_back({{}, 0.0, false, std::move(first)});

  struct Cand {
    double score;
    std::size_t parent;
    std::size_t rank;
    std::uint32_t token;  // ignored when carrying a finished hypothesis
    bool carry;
  };
  for (std::size_t len = 0; len < max_len; ++len) {
    if (std::all_of(beam.begin(), beam.end(), [](const Hyp& h) { return h.done; })) break;
    std::vector<Cand> cands;
    for (std::size_t p = 0; p < beam.size(); ++p) {
      const auto& h = beam[p];
      if (h.done) {
        cands.push_back({h.score, p, 0, 0, true});
        continue;
      }
      auto logp = nnet::log_softmax<T>(std::span<const T>(h.session.logits));
      auto ranked = detail::ranked_candidates(logp, vocab, width);
      for (std::size_t r = 0; r < ranked.size(); ++r) {
        cands.push_back({h.score + logp[ranked[r]], p, r, ranked[r], false});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.rank < b.rank;
    });
    if (cands.size() > width) cands.resize(width);
    std::vector<Hyp> next;
    for (const auto& c : cands) {
      Hyp h = beam[c.parent];
      if (!c.carry) {
        h.tokens.push_back(c.token);
        h.score = c.score;
        if (c.token == corpus::Vocabulary::kEos) {
          h.done = true;
        } else if (len + 1 < max_len) {
          model.advance(h.session, c.token);
        }
      }
      next.push_back(std::move(h));
    }
    beam = std::move(next);
  }
  return beam.front().tokens;
}

/// Space-joined tokens up to (excluding) <eos>.
inline std::string story_text(const corpus::Vocabulary& vocab, std::span<const std::uint32_t> ids) {
  std::string out;
  for (auto id : ids) {
    if (id == corpus::Vocabulary::kEos) break;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

/// Token strings up to (excluding) <eos>.
inline std::vector<std::string> story_tokens(const corpus::Vocabulary& vocab, std::span<const std::uint32_t> ids) {
  std::vector<std::string> out;
  for (auto id : ids) {
    if (id == corpus::Vocabulary::kEos) break;
    out.push_back(vocab.token(id));
  }
  return out;
}

}  // namespace charstory::model
