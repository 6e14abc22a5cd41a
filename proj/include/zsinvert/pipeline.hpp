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

// Seed, refine, correct: the iterative inversion loop, plus the Gaussian
// noise transform used to evaluate the noise defense.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "zsinvert/backends.hpp"
#include "zsinvert/decoder.hpp"
#include "zsinvert/domain.hpp"
#include "zsinvert/log.hpp"
#include "zsinvert/prompts.hpp"
#include "zsinvert/text.hpp"

namespace zsinvert {

// The model roles one inversion talks to. chat may be null when correction
// is disabled.
struct Backends {
  EncoderClient& encoder;
  ProposalClient& lm;
  ChatClient* chat = nullptr;
  std::size_t max_in_flight = 1;
};

// e + N(0, sigma^2 I), drawn from a generator seeded by spec.rng_seed.
inline Embedding add_noise(const Embedding& e, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0)) throw DomainError("noise sigma must be >= 0");
  if (spec.sigma == 0.0) return e;
  std::mt19937_64 rng(spec.rng_seed);
  std::normal_distribution<double> gauss(0.0, spec.sigma);
  std::vector<double> v = e.values();
  for (double& x : v) x += gauss(rng);
  return Embedding(std::move(v), e.model_id());
}

inline Candidate stage1_seed(const Embedding& target, const DecodeParams& params,
                             const PromptTemplates& templates, Backends& b, QueryMeter& meter) {
  Candidate c = run_decode(templates.seed_prefix, target, params, b.lm, b.encoder, meter,
                           b.max_in_flight);
  c.stage = Stage::kSeed;
  c.iteration = 0;
  return c;
}

inline Candidate stage2_refine(const Embedding& target, const Candidate& current,
                               const DecodeParams& params, const PromptTemplates& templates,
                               int iteration, Backends& b, QueryMeter& meter) {
  if (text::TrimView(current.text).empty()) throw DomainError("refine needs a non-empty text");
  Candidate c = run_decode(templates.RefinePrompt(current.text), target, params, b.lm, b.encoder,
                           meter, b.max_in_flight);
  c.stage = Stage::kRefined;
  c.iteration = iteration;
  return c;
}

struct CorrectionOutcome {
  Candidate candidate;
  bool fell_back = false;
};

// Reply up to the first blank line, on one line.
inline std::string CleanCorrectionReply(std::string_view reply) {
  auto body = text::TrimView(reply);
  if (auto cut = body.find("\n\n"); cut != std::string_view::npos) body = body.substr(0, cut);
  return text::Trim(text::FlattenLines(body));
}

// Orders the refined list by cosine to the target, asks the corrector for
// the original text, and scores the answer. Any chat failure falls back to
// the best member of the list.
inline CorrectionOutcome stage3_correct(const std::vector<Candidate>& refined,
                                        const Embedding& target, ChatClient& chat,
                                        EncoderClient& encoder, QueryMeter& meter, int iteration,
                                        bool score_corrected = true) {
  if (refined.empty()) throw DomainError("correction needs at least one candidate");
  auto ranked = select_top_b(refined, refined.size(),
                             [](const Candidate& c) { return c.score.value_or(-2.0); });

  std::vector<std::string> texts;
  texts.reserve(ranked.size());
  for (const auto& c : ranked) texts.push_back(c.text);

  std::string reply;
  try {
    reply = CleanCorrectionReply(chat_complete(chat, render_correction_prompt(texts), meter));
    if (reply.empty()) throw BackendError("corrector returned an empty reply");
  } catch (const std::exception& e) {
    log::Warn("correction failed (", e.what(), "); falling back to best refined candidate");
    Candidate fallback = ranked.front();
    fallback.stage = Stage::kCorrected;
    fallback.iteration = iteration;
    return {std::move(fallback), true};
  }

  Candidate out{reply, std::nullopt, Stage::kCorrected, iteration};
  if (score_corrected) {
    CosineScorer scorer(encoder, target, meter);
    std::vector<std::string> one{reply};
    out.score = scorer.Score(one).front();
  }
  return {std::move(out), false};
}

// Stage 1 once, then n_iter rounds of refine (and correct). final_text is
// the last corrected text, or the best refined one without correction.
inline InversionRecord invert(const Embedding& target, const PipelineParams& params,
                              const PromptTemplates& templates, Backends& b, QueryMeter& meter,
                              std::string doc_id = {}) {
  params.Validate();
  const auto t0 = std::chrono::steady_clock::now();
  const QueryLedger start = meter.Snapshot();

  InversionRecord rec;
  rec.doc_id = std::move(doc_id);
  rec.target_dim = target.dim();
  rec.encoder_model = b.encoder.model_id();

  auto finish = [&] {
    rec.ledger = meter.Snapshot() - start;
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  auto best_refined = [&]() -> const Candidate* {
    const Candidate* best = nullptr;
    for (const auto& c : rec.candidates) {
      if (!best || c.score.value_or(-2.0) > best->score.value_or(-2.0)) best = &c;
    }
    return best;
  };

  const bool correct = params.correction_enabled;
  if (correct && b.chat == nullptr) throw ConfigError("correction enabled without a chat client");

  try {
    rec.seed = stage1_seed(target, params.decode, templates, b, meter);
    log::Info("[", rec.doc_id, "] seed cos=", *rec.seed->score, " text=", rec.seed->text);
    Candidate current = *rec.seed;

    for (int i = 1; i <= params.n_iter; ++i) {
      IterationTrace trace;
      trace.iteration = i;
      trace.refined = stage2_refine(target, current, params.decode, templates, i, b, meter);
      rec.candidates.push_back(trace.refined);
      current = trace.refined;
      if (correct) {
        auto outcome = stage3_correct(rec.candidates, target, *b.chat, b.encoder, meter, i,
                                      params.score_corrected);
        trace.corrected = outcome.candidate;
        trace.correction_fell_back = outcome.fell_back;
        current = outcome.candidate;
      }
      trace.cumulative = meter.Snapshot() - start;
      log::Info("[", rec.doc_id, "] iter ", i, " refined cos=", *trace.refined.score,
                " text=", trace.refined.text,
                trace.corrected ? " | corrected: " + trace.corrected->text : std::string(),
                " | encoder texts=", trace.cumulative.encoder_texts);
      rec.iterations.push_back(std::move(trace));
    }

    const Candidate& final_c = correct ? *rec.iterations.back().corrected : *best_refined();
    rec.final_text = final_c.text;
    rec.cos_sim = final_c.score;
  } catch (const std::exception& e) {
    rec.error = e.what();
    log::Err("[", rec.doc_id, "] inversion aborted: ", e.what());
    if (!rec.iterations.empty()) {
      const auto& last = rec.iterations.back().output();
      rec.final_text = last.text;
      rec.cos_sim = last.score;
    } else if (rec.seed) {
      rec.final_text = rec.seed->text;
      rec.cos_sim = rec.seed->score;
    }
  }
  finish();
  return rec;
}

}  // namespace zsinvert
