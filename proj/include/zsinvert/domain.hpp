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

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zsinvert/errors.hpp"

namespace zsinvert {

// A fixed-length vector produced by some encoder. Components are finite and
// the vector is never empty.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<double> values, std::string model_id = {})
      : values_(std::move(values)), model_id_(std::move(model_id)) {
    if (values_.empty()) throw DomainError("embedding must have dim > 0");
    for (double v : values_) {
      if (!std::isfinite(v)) throw DomainError("embedding has a non-finite component");
    }
  }

  std::size_t dim() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  const std::string& model_id() const { return model_id_; }
  double operator[](std::size_t i) const { return values_[i]; }

  // Component-wise; model_id is a label and does not take part.
  friend bool operator==(const Embedding& a, const Embedding& b) {
    return a.values_ == b.values_;
  }

 private:
  std::vector<double> values_;
  std::string model_id_;
};

enum class Stage { kSeed, kRefined, kCorrected };

inline std::string_view StageName(Stage s) {
  switch (s) {
    case Stage::kSeed: return "seed";
    case Stage::kRefined: return "refined";
    case Stage::kCorrected: return "corrected";
  }
  return "?";
}

inline Stage ParseStage(std::string_view name) {
  if (name == "seed") return Stage::kSeed;
  if (name == "refined") return Stage::kRefined;
  if (name == "corrected") return Stage::kCorrected;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

// A text with its cosine to the target. Scores are stored rather than
// recomputed because every score costs an encoder query.
struct Candidate {
  std::string text;
  std::optional<double> score;
  Stage stage = Stage::kSeed;
  int iteration = 0;

  bool scored() const { return score.has_value(); }

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct TokenProposal {
  std::string token;  // detokenized piece, may carry a leading space
  double logprob = 0.0;
  bool eos = false;

  friend bool operator==(const TokenProposal&, const TokenProposal&) = default;
};

struct DecodeParams {
  int beam_width = 30;
  int top_k = 30;
  // Counts generated tokens only; the prefix prompt is excluded.
  int max_length = 32;
  std::string prefix_prompt;

  void Validate() const {
    if (beam_width < 1) throw ConfigError("beam width must be >= 1");
    if (top_k < 1) throw ConfigError("top-k must be >= 1");
    if (max_length < 1) throw ConfigError("max length must be >= 1");
  }
};

struct PipelineParams {
  DecodeParams decode;
  int n_iter = 9;
  bool correction_enabled = true;
  // One extra encoder query per iteration so records carry corrected cosines.
  bool score_corrected = true;

  void Validate() const {
    decode.Validate();
    if (n_iter < 1) throw ConfigError("iteration count must be >= 1");
  }
};

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

// Snapshot of query counts. See QueryMeter for the live counter.
struct QueryLedger {
  std::uint64_t encoder_texts = 0;
  std::uint64_t encoder_calls = 0;
  std::uint64_t lm_calls = 0;
  std::uint64_t chat_calls = 0;

  QueryLedger& operator+=(const QueryLedger& o) {
    encoder_texts += o.encoder_texts;
    encoder_calls += o.encoder_calls;
    lm_calls += o.lm_calls;
    chat_calls += o.chat_calls;
    return *this;
  }
  friend QueryLedger operator-(QueryLedger a, const QueryLedger& b) {
    a.encoder_texts -= b.encoder_texts;
    a.encoder_calls -= b.encoder_calls;
    a.lm_calls -= b.lm_calls;
    a.chat_calls -= b.chat_calls;
    return a;
  }
  friend bool operator==(const QueryLedger&, const QueryLedger&) = default;
};

// Thread-safe, monotone query counter shared by all calls of one run.
class QueryMeter {
 public:
  void AddEncoder(std::uint64_t texts, std::uint64_t calls) {
    encoder_texts_.fetch_add(texts, std::memory_order_relaxed);
    encoder_calls_.fetch_add(calls, std::memory_order_relaxed);
  }
  void AddLm(std::uint64_t calls = 1) { lm_calls_.fetch_add(calls, std::memory_order_relaxed); }
  void AddChat(std::uint64_t calls = 1) { chat_calls_.fetch_add(calls, std::memory_order_relaxed); }

  QueryLedger Snapshot() const {
    return {encoder_texts_.load(), encoder_calls_.load(), lm_calls_.load(), chat_calls_.load()};
  }

 private:
  std::atomic<std::uint64_t> encoder_texts_{0};
  std::atomic<std::uint64_t> encoder_calls_{0};
  std::atomic<std::uint64_t> lm_calls_{0};
  std::atomic<std::uint64_t> chat_calls_{0};
};

// One corpus row. Rows exported from a vector store may carry the
// embedding and no usable text.
struct CorpusDoc {
  std::string doc_id;
  std::string text;
  std::optional<std::vector<double>> embedding;

  friend bool operator==(const CorpusDoc&, const CorpusDoc&) = default;
};

// One pass of refinement (and correction, when enabled).
struct IterationTrace {
  int iteration = 0;
  Candidate refined;
  std::optional<Candidate> corrected;
  bool correction_fell_back = false;
  QueryLedger cumulative;

  // The text that seeds the next iteration.
  const Candidate& output() const { return corrected ? *corrected : refined; }

  friend bool operator==(const IterationTrace&, const IterationTrace&) = default;
};

struct InversionRecord {
  std::string doc_id;
  std::size_t target_dim = 0;
  std::optional<Candidate> seed;
  std::vector<Candidate> candidates;  // the refined list, one per iteration
  std::vector<IterationTrace> iterations;
  std::string final_text;
  std::optional<double> cos_sim;
  // Cosine against the noise-free embedding, when the target was perturbed.
  std::optional<double> clean_cos_sim;
  std::optional<double> f1;
  std::optional<bool> leaked;
  QueryLedger ledger;
  double wall_time_s = 0.0;
  std::optional<NoiseSpec> noise;
  std::optional<int> max_doc_tokens;
  std::string encoder_model;
  std::optional<std::string> error;

  friend bool operator==(const InversionRecord&, const InversionRecord&) = default;
};

}  // namespace zsinvert
