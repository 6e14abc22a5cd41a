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

// Deterministic in-process backends. They stand in for the real encoder and
// LM at desk scale and make exhaustive-search oracles tractable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zsinvert/backends.hpp"
#include "zsinvert/errors.hpp"
#include "zsinvert/prompts.hpp"
#include "zsinvert/text.hpp"

namespace zsinvert {

// L2-normalized bag of hashed character trigrams. The text gets one leading
// space as a boundary marker and is right-padded to at least three bytes.
class ToyEmbedder final : public EncoderClient {
 public:
  explicit ToyEmbedder(std::size_t dim = 256, std::uint64_t hash_seed = 0,
                       std::size_t batch_limit = 64, std::string model_id = "toy-trigram")
      : dim_(dim), seed_(hash_seed), batch_limit_(batch_limit), model_id_(std::move(model_id)) {
    if (dim_ == 0) throw ConfigError("toy embedder dim must be positive");
  }

  const std::string& model_id() const override { return model_id_; }
  std::size_t batch_limit() const override { return batch_limit_; }
  std::size_t dimension() const { return dim_; }
  std::uint64_t hash_seed() const { return seed_; }

  static std::size_t Bucket(unsigned char a, unsigned char b, unsigned char c, std::uint64_t seed,
                            std::size_t dim) {
    const std::uint64_t key = (std::uint64_t{a} << 16) | (std::uint64_t{b} << 8) | c;
    const std::uint64_t mixed = (key ^ seed) * 0x9E3779B97F4A7C15ULL;
    return static_cast<std::size_t>((mixed >> 32) % dim);
  }

  std::vector<double> Embed(std::string_view s) const {
    std::string padded = " ";
    padded += s;
    while (padded.size() < 3) padded += ' ';
    std::vector<double> v(dim_, 0.0);
    for (std::size_t i = 0; i + 2 < padded.size(); ++i) {
      v[Bucket(static_cast<unsigned char>(padded[i]), static_cast<unsigned char>(padded[i + 1]),
               static_cast<unsigned char>(padded[i + 2]), seed_, dim_)] += 1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  }

  std::vector<std::vector<double>> EmbedRequest(std::span<const std::string> texts) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(Embed(t));
    return out;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::size_t batch_limit_;
  std::string model_id_;
};

// Laplace-smoothed word bigram model. Conditions on the last word of the
// generated text, or of the prefix when nothing is generated yet. Words
// outside the vocabulary fall back to the sentence-start row.
class ToyLM final : public ProposalClient {
 public:
  ToyLM(std::vector<std::string> vocab, std::vector<std::vector<std::uint64_t>> bigram_counts,
        std::vector<std::uint64_t> start_counts = {}, double smoothing_alpha = 1.0,
        std::string model_id = "toy-bigram")
      : vocab_(std::move(vocab)),
        counts_(std::move(bigram_counts)),
        start_(std::move(start_counts)),
        alpha_(smoothing_alpha),
        model_id_(std::move(model_id)) {
    const std::size_t v = vocab_.size();
    if (v == 0) throw ConfigError("toy LM needs a non-empty vocabulary");
    if (!(alpha_ > 0.0)) throw ConfigError("smoothing alpha must be positive");
    if (counts_.size() != v) throw ConfigError("bigram matrix must be |V| x |V|");
    for (const auto& row : counts_) {
      if (row.size() != v) throw ConfigError("bigram matrix must be |V| x |V|");
    }
    if (start_.empty()) start_.assign(v, 0);
    if (start_.size() != v) throw ConfigError("start counts must have |V| entries");
    for (std::size_t i = 0; i < v; ++i) {
      if (!index_.emplace(vocab_[i], i).second) {
        throw ConfigError("duplicate vocabulary word '" + vocab_[i] + "'");
      }
    }
  }

  // Vocabulary in first-appearance order; counts from adjacent word pairs.
  static ToyLM FromCorpus(const std::vector<std::string>& sentences, double smoothing_alpha = 1.0) {
    std::vector<std::string> vocab;
    std::unordered_map<std::string, std::size_t> idx;
    std::vector<std::vector<std::string>> tokenized;
    for (const auto& s : sentences) {
      tokenized.push_back(text::SplitWhitespace(s));
      for (const auto& w : tokenized.back()) {
        if (idx.emplace(w, vocab.size()).second) vocab.push_back(w);
      }
    }
    const std::size_t v = vocab.size();
    std::vector<std::vector<std::uint64_t>> counts(v, std::vector<std::uint64_t>(v, 0));
    std::vector<std::uint64_t> start(v, 0);
    for (const auto& words : tokenized) {
      if (words.empty()) continue;
      ++start[idx[words.front()]];
      for (std::size_t i = 1; i < words.size(); ++i) ++counts[idx[words[i - 1]]][idx[words[i]]];
    }
    return ToyLM(std::move(vocab), std::move(counts), std::move(start), smoothing_alpha);
  }

  const std::string& model_id() const override { return model_id_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  double alpha() const { return alpha_; }

  // P(w | context) for every vocabulary word; context is a word or empty.
  std::vector<double> Distribution(std::string_view context) const {
    const std::vector<std::uint64_t>* row = &start_;
    if (auto it = index_.find(std::string(context)); it != index_.end()) row = &counts_[it->second];
    const double n = static_cast<double>(std::accumulate(row->begin(), row->end(), std::uint64_t{0}));
    const double denom = n + alpha_ * static_cast<double>(vocab_.size());
    std::vector<double> p(vocab_.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = (static_cast<double>((*row)[i]) + alpha_) / denom;
    return p;
  }

  static std::string LastWord(std::string_view s) {
    auto words = text::SplitWhitespace(s);
    return words.empty() ? std::string() : words.back();
  }

  std::vector<TokenProposal> TopK(std::string_view prefix, std::string_view generated,
                                  int k) override {
    const std::string context = generated.empty() ? LastWord(prefix) : LastWord(generated);
    const auto p = Distribution(context);
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    const std::size_t n = std::min<std::size_t>(order.size(), static_cast<std::size_t>(k));
    std::vector<TokenProposal> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& w = vocab_[order[i]];
      out.push_back({generated.empty() ? w : " " + w, std::log(p[order[i]]), false});
    }
    return out;
  }

 private:
  std::vector<std::string> vocab_;
  std::vector<std::vector<std::uint64_t>> counts_;
  std::vector<std::uint64_t> start_;
  double alpha_;
  std::string model_id_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Chat double driven by a function of the prompt.
class ScriptedChat final : public ChatClient {
 public:
  using Script = std::function<std::string(std::string_view)>;

  explicit ScriptedChat(Script script, std::string model_id = "scripted")
      : script_(std::move(script)), model_id_(std::move(model_id)) {}

  const std::string& model_id() const override { return model_id_; }
  std::string Complete(std::string_view prompt) override { return script_(prompt); }

  static ScriptedChat Canned(std::string reply) {
    return ScriptedChat([reply = std::move(reply)](std::string_view) { return reply; }, "canned");
  }

  // Replies with the first candidate of a correction prompt, which is the
  // most relevant one. Other prompts are echoed unchanged.
  static ScriptedChat EchoFirstCandidate() {
    return ScriptedChat(
        [](std::string_view prompt) {
          if (prompt.substr(0, kCorrectionHeader.size()) == kCorrectionHeader) {
            return parse_correction_prompt(prompt).front();
          }
          return std::string(prompt);
        },
        "echo");
  }

  static ScriptedChat EchoLastLine() {
    return ScriptedChat(
        [](std::string_view prompt) {
          auto nl = prompt.rfind('\n');
          return std::string(nl == std::string_view::npos ? prompt : prompt.substr(nl + 1));
        },
        "echo-last-line");
  }

  static ScriptedChat AlwaysFail() {
    return ScriptedChat(
        [](std::string_view) -> std::string { throw BackendError("scripted chat failure"); },
        "fail");
  }

 private:
  Script script_;
  std::string model_id_;
};

}  // namespace zsinvert
