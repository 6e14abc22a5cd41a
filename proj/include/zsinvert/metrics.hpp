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

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "zsinvert/backends.hpp"
#include "zsinvert/domain.hpp"
#include "zsinvert/log.hpp"
#include "zsinvert/prompts.hpp"
#include "zsinvert/text.hpp"

namespace zsinvert {

// Lowercase, drop ASCII punctuation, split on whitespace.
inline std::vector<std::string> f1_tokens(std::string_view s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 128 && std::ispunct(u)) continue;
    cleaned += static_cast<char>(u < 128 ? std::tolower(u) : u);
  }
  return text::SplitWhitespace(cleaned);
}

// Token-overlap F1 in [0, 100] over token multisets. 2PR/(P+R) reduces to
// 2|A∩B|/(|A|+|B|), which is also exactly symmetric in floating point.
inline double token_f1(std::string_view original, std::string_view inversion) {
  const auto a = f1_tokens(original);
  const auto b = f1_tokens(inversion);
  if (a.empty() && b.empty()) return 100.0;
  if (a.empty() || b.empty()) return 0.0;
  std::unordered_map<std::string, int> bag;
  for (const auto& t : a) ++bag[t];
  std::size_t overlap = 0;
  for (const auto& t : b) {
    auto it = bag.find(t);
    if (it != bag.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  return 100.0 * (2.0 * static_cast<double>(overlap)) / static_cast<double>(a.size() + b.size());
}

enum class Verdict { kLeak, kNoLeak, kInvalid };

inline Verdict ParseVerdict(std::string_view reply) {
  const std::string r = text::ToLower(text::TrimView(reply));
  if (r.rfind("yes", 0) == 0) return Verdict::kLeak;
  if (r.rfind("no", 0) == 0) return Verdict::kNoLeak;
  return Verdict::kInvalid;
}

// Transport failures count as invalid verdicts rather than aborting a corpus.
inline Verdict judge_leakage(std::string_view original, std::string_view inversion,
                             ChatClient& chat, QueryMeter& meter) {
  std::string reply;
  try {
    reply = chat_complete(chat, render_judge_prompt(original, inversion), meter);
  } catch (const std::exception& e) {
    log::Warn("judge call failed: ", e.what());
    return Verdict::kInvalid;
  }
  const Verdict v = ParseVerdict(reply);
  if (v == Verdict::kInvalid) log::Warn("judge reply is neither yes nor no: '", reply, "'");
  return v;
}

inline constexpr std::array<int, 4> kLengthBuckets = {16, 32, 64, 128};

// Smallest bucket that holds `n_tokens`; longer texts land in the last one.
inline int LengthBucket(std::size_t n_tokens) {
  for (int b : kLengthBuckets) {
    if (n_tokens <= static_cast<std::size_t>(b)) return b;
  }
  return kLengthBuckets.back();
}

struct DocScore {
  std::string doc_id;
  double f1 = 0.0;
  std::optional<double> cos;
  std::optional<bool> leaked;
};

struct IterationRow {
  int iteration = 0;
  double mean_f1 = 0.0;
  double mean_cos = 0.0;
  std::size_t n = 0;
};

struct BucketRow {
  int token_length = 0;
  double mean_f1 = 0.0;
  double mean_cos = 0.0;
  std::size_t n = 0;
};

struct EvalReport {
  std::size_t n_docs = 0;
  double mean_f1 = 0.0;
  double mean_cos = 0.0;
  std::optional<double> leakage_pct;
  std::size_t judge_invalid = 0;
  std::string judge_model;
  std::vector<IterationRow> per_iteration;
  std::vector<BucketRow> buckets;
  std::vector<DocScore> docs;
};

struct EvalOptions {
  bool length_buckets = false;
  // Applied to ground truth when a record does not say how it was truncated.
  std::optional<int> default_max_doc_tokens;
};

// Cosine reported for a record: noise-free when available.
inline std::optional<double> ReportedCosine(const InversionRecord& r) {
  return r.clean_cos_sim ? r.clean_cos_sim : r.cos_sim;
}

inline EvalReport evaluate_corpus(const std::vector<InversionRecord>& records,
                                  const std::map<std::string, std::string>& ground_truth,
                                  ChatClient* judge, QueryMeter& meter,
                                  const EvalOptions& options = {}) {
  EvalReport report;
  if (judge) report.judge_model = judge->model_id();

  struct Acc {
    double f1 = 0, cos = 0;
    std::size_t n = 0, n_cos = 0;
  };
  Acc total;
  std::map<int, Acc> per_iter, per_bucket;
  std::size_t yes = 0, no = 0;

  for (const auto& r : records) {
    auto it = ground_truth.find(r.doc_id);
    if (it == ground_truth.end()) {
      log::Warn("no ground truth for doc '", r.doc_id, "'; excluded from the report");
      continue;
    }
    const auto max_tokens = r.max_doc_tokens ? r.max_doc_tokens : options.default_max_doc_tokens;
    const std::string truth = max_tokens ? text::TruncateWords(it->second, *max_tokens) : it->second;

    DocScore d{r.doc_id, token_f1(truth, r.final_text), ReportedCosine(r), std::nullopt};
    total.f1 += d.f1;
    ++total.n;
    if (d.cos) {
      total.cos += *d.cos;
      ++total.n_cos;
    }

    for (const auto& tr : r.iterations) {
      auto& acc = per_iter[tr.iteration];
      const auto& out = tr.output();
      acc.f1 += token_f1(truth, out.text);
      ++acc.n;
      if (out.score) {
        acc.cos += *out.score;
        ++acc.n_cos;
      }
    }

    if (options.length_buckets) {
      auto& acc = per_bucket[LengthBucket(f1_tokens(truth).size())];
      acc.f1 += d.f1;
      ++acc.n;
      if (d.cos) {
        acc.cos += *d.cos;
        ++acc.n_cos;
      }
    }

    if (judge) {
      switch (judge_leakage(truth, r.final_text, *judge, meter)) {
        case Verdict::kLeak: ++yes; d.leaked = true; break;
        case Verdict::kNoLeak: ++no; d.leaked = false; break;
        case Verdict::kInvalid: ++report.judge_invalid; break;
      }
    }
    report.docs.push_back(std::move(d));
  }

  auto mean = [](double sum, std::size_t n) { return n ? sum / static_cast<double>(n) : 0.0; };
  report.n_docs = total.n;
  report.mean_f1 = mean(total.f1, total.n);
  report.mean_cos = mean(total.cos, total.n_cos);
  if (judge && yes + no > 0) {
    report.leakage_pct = 100.0 * static_cast<double>(yes) / static_cast<double>(yes + no);
  }
  for (const auto& [iter, acc] : per_iter) {
    report.per_iteration.push_back({iter, mean(acc.f1, acc.n), mean(acc.cos, acc.n_cos), acc.n});
  }
  for (const auto& [len, acc] : per_bucket) {
    report.buckets.push_back({len, mean(acc.f1, acc.n), mean(acc.cos, acc.n_cos), acc.n});
  }
  return report;
}

}  // namespace zsinvert
