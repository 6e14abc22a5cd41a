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

// Training data for the offline correction model: for each document, the
// stage-2 inversions produced against a local encoder, ranked by cosine to
// the document's true embedding.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "zsinvert/backends.hpp"
#include "zsinvert/decoder.hpp"
#include "zsinvert/domain.hpp"
#include "zsinvert/log.hpp"
#include "zsinvert/pipeline.hpp"
#include "zsinvert/prompts.hpp"

namespace zsinvert {

struct CorrectionExample {
  std::string doc_id;
  std::string target;
  std::vector<std::string> inversions;  // most similar first
  std::vector<double> cosines;

  friend bool operator==(const CorrectionExample&, const CorrectionExample&) = default;
};

// Prompt followed by the target: the exact sequence the fine-tune trains on.
inline std::string training_input(const CorrectionExample& ex) {
  return render_correction_prompt(ex.inversions) + ex.target;
}

struct CorrectionDataOptions {
  std::size_t n_docs = 400;
  std::size_t n_candidates = 5;
  std::size_t parallelism = 1;
};

// Inversions for one document. Stage 2 is run once per distinct seed taken
// from the top final beams of a single stage-1 search; when the search
// yields fewer seeds than candidates the seeds are reused in order.
inline CorrectionExample make_correction_example(const CorpusDoc& doc, EncoderClient& enc_local,
                                                 ProposalClient& lm, const DecodeParams& decode,
                                                 const PromptTemplates& templates,
                                                 std::size_t n_candidates, QueryMeter& meter) {
  std::vector<std::string> one{doc.text};
  const Embedding target = embed_batch(enc_local, one, meter).front();

  DecodeParams seed_params = decode;
  seed_params.prefix_prompt = templates.seed_prefix;
  CosineScorer scorer(enc_local, target, meter);
  const BeamState seeds = decode_beams(seed_params, scorer, lm, meter);

  Backends b{enc_local, lm, nullptr};
  const std::size_t distinct = std::min(n_candidates, seeds.beams.size());
  std::vector<Candidate> refined;
  for (std::size_t j = 0; j < distinct; ++j) {
    refined.push_back(
        stage2_refine(target, seeds.beams[j].candidate, decode, templates, 0, b, meter));
  }
  std::vector<Candidate> all;
  for (std::size_t j = 0; j < n_candidates; ++j) all.push_back(refined[j % distinct]);
  all = select_top_b(std::move(all), all.size(), [](const Candidate& c) { return *c.score; });

  CorrectionExample ex{doc.doc_id, doc.text, {}, {}};
  for (const auto& c : all) {
    ex.inversions.push_back(c.text);
    ex.cosines.push_back(*c.score);
  }
  return ex;
}

// Processes the first n_docs documents. A failing document is skipped with a
// warning; more than 10% skipped fails the whole run.
inline std::vector<CorrectionExample> gen_correction_dataset(
    const std::vector<CorpusDoc>& corpus, EncoderClient& enc_local, ProposalClient& lm,
    const DecodeParams& decode, const PromptTemplates& templates,
    const CorrectionDataOptions& opts, QueryMeter& meter) {
  if (opts.n_docs == 0 || opts.n_candidates == 0) {
    throw ConfigError("n_docs and n_candidates must be positive");
  }
  if (corpus.size() < opts.n_docs) {
    throw ConfigError("corpus has " + std::to_string(corpus.size()) + " documents, need " +
                      std::to_string(opts.n_docs));
  }
  decode.Validate();

  std::vector<std::optional<CorrectionExample>> slots(opts.n_docs);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> skipped{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < opts.n_docs; i = next++) {
      try {
        slots[i] = make_correction_example(corpus[i], enc_local, lm, decode, templates,
                                           opts.n_candidates, meter);
        log::Info("correction data ", i + 1, "/", opts.n_docs, " doc=", corpus[i].doc_id);
      } catch (const std::exception& e) {
        ++skipped;
        log::Warn("skipping doc '", corpus[i].doc_id, "': ", e.what());
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(opts.parallelism, 1, opts.n_docs);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  if (skipped * 10 > opts.n_docs) {
    throw Error(std::to_string(skipped.load()) + " of " + std::to_string(opts.n_docs) +
                " documents failed; more than 10% skipped");
  }
  std::vector<CorrectionExample> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

}  // namespace zsinvert
