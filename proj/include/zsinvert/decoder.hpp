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

// Beam search over LM token proposals, ranked by cosine similarity between
// each candidate's embedding and the target embedding. The LM only proposes
// continuations; it never ranks them.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "zsinvert/backends.hpp"
#include "zsinvert/domain.hpp"
#include "zsinvert/errors.hpp"
#include "zsinvert/log.hpp"
#include "zsinvert/text.hpp"

namespace zsinvert {

// dot(a,b) / (|a| |b|), accumulated in extended precision and clamped to
// [-1, 1].
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DomainError("cosine of vectors with dims " + std::to_string(a.size()) + " and " +
                      std::to_string(b.size()));
  }
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) throw DomainError("cosine of a zero-norm vector");
  const long double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(static_cast<double>(c), -1.0, 1.0);
}

inline double cosine_similarity(const Embedding& a, const Embedding& b) {
  return cosine_similarity(std::span<const double>(a.values()), std::span<const double>(b.values()));
}

// Anything that maps a batch of texts to one score each, order-preserving.
template <typename S>
concept BeamScorer = requires(S& s, std::span<const std::string> texts) {
  { s.Score(texts) } -> std::convertible_to<std::vector<double>>;
};

class CosineScorer {
 public:
  CosineScorer(EncoderClient& encoder, Embedding target, QueryMeter& meter,
               std::size_t max_in_flight = 1)
      : encoder_(encoder), target_(std::move(target)), meter_(meter), max_in_flight_(max_in_flight) {}

  std::vector<double> Score(std::span<const std::string> texts) {
    if (texts.empty()) return {};
    auto embs = embed_batch(encoder_, texts, meter_, max_in_flight_);
    if (embs.front().dim() != target_.dim()) {
      throw ConfigError("target has dim " + std::to_string(target_.dim()) + " but encoder '" +
                        encoder_.model_id() + "' produces dim " +
                        std::to_string(embs.front().dim()));
    }
    std::vector<double> out;
    out.reserve(embs.size());
    for (const auto& e : embs) out.push_back(cosine_similarity(e, target_));
    return out;
  }

 private:
  EncoderClient& encoder_;
  Embedding target_;
  QueryMeter& meter_;
  std::size_t max_in_flight_;
};

struct BeamEntry {
  Candidate candidate;    // text is `generated` without leading whitespace
  std::string generated;  // raw concatenated pieces, fed back to the LM
  int tokens = 0;
  bool finished = false;  // emitted end-of-sequence; kept but not expanded
};

struct BeamState {
  int step = 0;
  std::vector<BeamEntry> beams;  // sorted by score, descending
  std::optional<Candidate> best_ever;

  static BeamState Initial() {
    BeamState s;
    s.beams.emplace_back();
    return s;
  }
};

class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::optional<Candidate> best_ever)
      : Error(what), best_ever_(std::move(best_ever)) {}
  const std::optional<Candidate>& best_ever() const { return best_ever_; }

 private:
  std::optional<Candidate> best_ever_;
};

// Keeps the `b` highest-scoring items. Equal scores keep their input order.
template <typename T, typename ScoreFn>
std::vector<T> select_top_b(std::vector<T> items, std::size_t b, ScoreFn score) {
  std::stable_sort(items.begin(), items.end(),
                   [&](const T& x, const T& y) { return score(x) > score(y); });
  if (items.size() > b) items.erase(items.begin() + static_cast<std::ptrdiff_t>(b), items.end());
  return items;
}

// One search step: expand every live beam by its top-k proposals, score the
// new strings in one batched pass, keep the top `beam_width`.
template <BeamScorer Scorer>
BeamState expand_and_score(const BeamState& state, Scorer& scorer, const DecodeParams& params,
                           ProposalClient& lm, QueryMeter& meter) {
  if (state.beams.empty()) throw DomainError("expand_and_score needs at least one beam");

  // Expansion order is parent-major, proposal-rank-minor; ties keep it.
  std::vector<BeamEntry> expansions;
  std::unordered_set<std::string> seen;
  for (const auto& parent : state.beams) {
    if (parent.finished) {
      if (seen.insert(parent.candidate.text).second) expansions.push_back(parent);
      continue;
    }
    auto proposals =
        topk_next_tokens(lm, params.prefix_prompt, parent.generated, params.top_k, meter);
    if (proposals.empty()) {
      log::Warn("no proposals for beam '", parent.candidate.text, "'; dropping it");
      continue;
    }
    for (const auto& p : proposals) {
      BeamEntry child;
      if (p.eos) {
        if (!parent.candidate.scored()) continue;  // end-of-sequence on the empty beam
        child = parent;
        child.finished = true;
      } else {
        child.generated = parent.generated + p.token;
        child.tokens = parent.tokens + 1;
        child.candidate = parent.candidate;
        child.candidate.text = text::TrimLeft(child.generated);
        child.candidate.score.reset();
        if (text::TrimView(child.candidate.text).empty()) continue;  // unscoreable
      }
      if (!seen.insert(child.candidate.text).second) continue;
      expansions.push_back(std::move(child));
    }
  }

  std::vector<std::string> to_score;
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < expansions.size(); ++i) {
    if (!expansions[i].candidate.scored()) {
      to_score.push_back(expansions[i].candidate.text);
      slots.push_back(i);
    }
  }
  if (!to_score.empty()) {
    auto scores = scorer.Score(std::span<const std::string>(to_score));
    if (scores.size() != to_score.size()) throw DomainError("scorer returned wrong count");
    for (std::size_t j = 0; j < slots.size(); ++j) expansions[slots[j]].candidate.score = scores[j];
  }

  BeamState next;
  next.step = state.step + 1;
  next.best_ever = state.best_ever;
  for (const auto& e : expansions) {
    if (!next.best_ever || *e.candidate.score > *next.best_ever->score) {
      next.best_ever = e.candidate;
    }
  }
  next.beams = select_top_b(std::move(expansions), static_cast<std::size_t>(params.beam_width),
                            [](const BeamEntry& e) { return *e.candidate.score; });

  if (log::Enabled(log::Level::kDebug) && !next.beams.empty()) {
    std::ostringstream os;
    for (std::size_t i = 0; i < next.beams.size(); ++i) {
      os << (i ? " | " : "") << next.beams[i].candidate.text;
    }
    log::Debug("step ", next.step, " best=", *next.beams.front().candidate.score, " beams=[",
               os.str(), "]");
  }
  return next;
}

// Runs max_length steps from the empty beam and returns the final state.
template <BeamScorer Scorer>
BeamState decode_beams(const DecodeParams& params, Scorer& scorer, ProposalClient& lm,
                       QueryMeter& meter) {
  params.Validate();
  BeamState state = BeamState::Initial();
  try {
    for (int t = 1; t <= params.max_length; ++t) {
      state = expand_and_score(state, scorer, params, lm, meter);
      if (state.beams.empty()) throw DecodeError("every beam was dropped", state.best_ever);
      const bool all_done = std::all_of(state.beams.begin(), state.beams.end(),
                                        [](const BeamEntry& e) { return e.finished; });
      if (all_done) break;
    }
  } catch (const DecodeError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw DecodeError(std::string("decode failed at step ") + std::to_string(state.step + 1) +
                          ": " + e.what(),
                      state.best_ever);
  }
  if (state.best_ever) {
    log::Debug("decode done: top=", *state.beams.front().candidate.score,
               " best_ever=", *state.best_ever->score);
  }
  return state;
}

// The top beam of the final step. It can score below best_ever because
// extending a sequence can lower its cosine.
inline Candidate run_decode(std::string_view prefix, const Embedding& target, DecodeParams params,
                            ProposalClient& lm, EncoderClient& encoder, QueryMeter& meter,
                            std::size_t max_in_flight = 1) {
  params.prefix_prompt = std::string(prefix);
  CosineScorer scorer(encoder, target, meter, max_in_flight);
  return decode_beams(params, scorer, lm, meter).beams.front().candidate;
}

}  // namespace zsinvert
