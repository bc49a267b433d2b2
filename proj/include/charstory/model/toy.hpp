#pragma once

// Templated five-sentence stories over eight planted characters. Small
// enough to train on in seconds; used by the toy bundle and the learning
// tests.

#include <array>
#include <string>
#include <vector>

#include "charstory/corpus.hpp"
#include "charstory/nnet/tensor.hpp"
#include "charstory/tokenize.hpp"

namespace charstory::model {

inline constexpr std::array<const char*, 8> kToyCharacters = {"mom", "dad", "sister", "brother",
                                                              "dog", "cat", "horse", "teacher"};

struct ToyCorpus {
  std::vector<corpus::StorySample> train;
  std::vector<corpus::StorySample> test;
};

namespace detail {

template <std::size_t N>
const char* pick(nnet::Rng& rng, const std::array<const char*, N>& xs) {
  return xs[rng.below(N)];
}

inline corpus::StorySample toy_story(nnet::Rng& rng, const std::string& id, corpus::Split split) {
  static constexpr std::array<const char*, 6> places = {"park", "beach", "zoo", "lake", "farm", "garden"};
  static constexpr std::array<const char*, 6> things = {"ball", "kite", "boat", "flowers", "pictures", "bike"};
  static constexpr std::array<const char*, 5> foods = {"pizza", "cake", "sandwiches", "soup", "pie"};
  static constexpr std::array<const char*, 4> feelings = {"happy", "excited", "tired", "sleepy"};

  std::string a, b;
  if (rng.uniform() < 0.4) {
    a = "mom";
    b = "dad";
  } else {
    auto i = rng.below(kToyCharacters.size());
    auto j = rng.below(kToyCharacters.size() - 1);
    if (j >= i) ++j;
    a = kToyCharacters[i];
    b = kToyCharacters[j];
  }
  std::string place = pick(rng, places);
  corpus::StorySample s;
  s.story_id = id;
  s.split = split;
  s.texts = {
      "today my " + a + " and my " + b + " went to the " + place + ".",
      "my " + a + " was very " + pick(rng, feelings) + " to see the " + pick(rng, things) + ".",
      "my " + b + " played with the " + pick(rng, things) + " all day.",
      "later we had " + std::string(pick(rng, foods)) + " at the " + place + ".",
      "at the end of the day my " + a + " and my " + b + " were " + pick(rng, feelings) + ".",
  };
  for (std::size_t k = 0; k < corpus::kStoryLength; ++k) {
    s.photo_ids[k] = id + "-" + std::to_string(k);
    s.sentences[k] = corpus::tokenize(s.texts[k]);
  }
  return s;
}

}  // namespace detail

/// Deterministic for a given seed. Story ids are "toy-train-NNN" and
/// "toy-test-NNN".
inline ToyCorpus make_toy_corpus(std::size_t train_stories = 50, std::size_t test_stories = 10,
                                 std::uint64_t seed = 7) {
  nnet::Rng rng(seed);
  ToyCorpus out;
  auto id = [](const char* split, std::size_t i) {
    auto n = std::to_string(i);
    return std::string("toy-") + split + "-" + std::string(3 - std::min<std::size_t>(3, n.size()), '0') + n;
  };
  for (std::size_t i = 0; i < train_stories; ++i) {
    out.train.push_back(detail::toy_story(rng, id("train", i), corpus::Split::Train));
  }
  for (std::size_t i = 0; i < test_stories; ++i) {
    out.test.push_back(detail::toy_story(rng, id("test", i), corpus::Split::Test));
  }
  return out;
}

}  // namespace charstory::model
