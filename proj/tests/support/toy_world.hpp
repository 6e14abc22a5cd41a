// Copyright 2026 The zsinvert Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <random>
#include <string>
#include <vector>

#include "zsinvert/domain.hpp"
#include "zsinvert/toy.hpp"

namespace zsinvert::testing {

// Twenty five-word sentences over a twelve-word vocabulary.
inline const std::vector<std::string>& ToyCorpus() {
  static const std::vector<std::string> corpus{
      "the cat sat on mat",     "the dog sat on log",    "the big cat ran home",
      "the red dog ran fast",   "big cat sat on mat",    "red dog ran on log",
      "the cat ran fast home",  "the dog sat on mat",    "big red cat sat on",
      "the fast dog ran home",  "red cat sat on log",    "the big dog ran fast",
      "the cat sat on log",     "big dog ran home fast", "the red cat ran home",
      "fast cat sat on mat",    "the dog ran on mat",    "big red dog sat on",
      "the cat ran on log",     "red big cat ran fast"};
  return corpus;
}

// Distinct lowercase words of 1-3 letters.
inline std::vector<std::string> RandomVocab(std::mt19937& rng, std::size_t n) {
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w(1 + rng() % 3, 'a');
    for (char& c : w) c = static_cast<char>('a' + rng() % 6);
    bool dup = false;
    for (const auto& o : out) dup = dup || o == w;
    if (!dup) out.push_back(w);
  }
  return out;
}

// Bigram LM with random counts over `vocab`.
inline ToyLM RandomLM(std::mt19937& rng, const std::vector<std::string>& vocab) {
  const std::size_t v = vocab.size();
  std::vector<std::vector<std::uint64_t>> counts(v, std::vector<std::uint64_t>(v));
  for (auto& row : counts) {
    for (auto& c : row) c = rng() % 10;
  }
  std::vector<std::uint64_t> start(v);
  for (auto& c : start) c = rng() % 10;
  return ToyLM(vocab, counts, start);
}

inline Embedding RandomTarget(std::mt19937& rng, std::size_t dim) {
  std::normal_distribution<double> g;
  std::vector<double> v(dim);
  for (double& x : v) x = g(rng);
  return Embedding(std::move(v));
}

inline std::string RandomSentence(std::mt19937& rng, const std::vector<std::string>& vocab,
                                  int length) {
  std::string s;
  for (int i = 0; i < length; ++i) {
    if (i) s += ' ';
    s += vocab[rng() % vocab.size()];
  }
  return s;
}

}  // namespace zsinvert::testing
