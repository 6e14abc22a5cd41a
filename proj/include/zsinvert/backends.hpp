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

// Contracts for the three model roles the attack talks to: the target
// encoder, the proposal LM, and the chat model used for correction and
// judging. The free functions below are the only entry points the search
// uses; they enforce the contracts and keep the query ledger exact.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <future>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zsinvert/domain.hpp"
#include "zsinvert/errors.hpp"
#include "zsinvert/text.hpp"

namespace zsinvert {

class EncoderClient {
 public:
  virtual ~EncoderClient() = default;

  virtual const std::string& model_id() const = 0;
  virtual std::size_t batch_limit() const = 0;

  // Embeds at most batch_limit() texts in one request, order-preserving.
  virtual std::vector<std::vector<double>> EmbedRequest(std::span<const std::string> texts) = 0;

  // 0 until the first successful request.
  std::size_t dim() const { return dim_.load(); }

  // Records the first dimension seen; throws on any later mismatch.
  void ObserveDim(std::size_t d) {
    std::size_t expected = 0;
    if (dim_.compare_exchange_strong(expected, d)) return;
    if (expected != d) {
      throw ConfigError("encoder '" + model_id() + "' changed dimension from " +
                        std::to_string(expected) + " to " + std::to_string(d));
    }
  }

 private:
  std::atomic<std::size_t> dim_{0};
};

class ProposalClient {
 public:
  virtual ~ProposalClient() = default;
  virtual const std::string& model_id() const = 0;
  // Raw top-k of the next-token distribution after prefix + generated.
  virtual std::vector<TokenProposal> TopK(std::string_view prefix, std::string_view generated,
                                          int k) = 0;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual const std::string& model_id() const = 0;
  virtual int max_output_tokens() const { return 256; }
  virtual std::string Complete(std::string_view prompt) = 0;
};

inline std::vector<Embedding> embed_batch(EncoderClient& client,
                                          std::span<const std::string> texts,
                                          QueryMeter& meter, std::size_t max_in_flight = 1) {
  if (texts.empty()) throw DomainError("embed_batch needs at least one text");
  for (const auto& t : texts) {
    if (text::TrimView(t).empty()) throw DomainError("embed_batch got a blank text");
  }
  const std::size_t limit = std::max<std::size_t>(1, client.batch_limit());
  const std::size_t n_batches = (texts.size() + limit - 1) / limit;
  max_in_flight = std::max<std::size_t>(1, max_in_flight);

  std::vector<std::vector<double>> raw(texts.size());
  auto run_batch = [&](std::size_t batch) {
    const std::size_t begin = batch * limit;
    const std::size_t len = std::min(limit, texts.size() - begin);
    meter.AddEncoder(len, 1);
    std::vector<std::vector<double>> out;
    try {
      out = client.EmbedRequest(texts.subspan(begin, len));
    } catch (const BackendError& e) {
      throw BackendError(e.what(), batch);
    }
    if (out.size() != len) {
      throw BackendError("encoder returned " + std::to_string(out.size()) + " vectors for " +
                             std::to_string(len) + " texts",
                         batch);
    }
    for (std::size_t i = 0; i < len; ++i) raw[begin + i] = std::move(out[i]);
  };

  if (max_in_flight == 1 || n_batches == 1) {
    for (std::size_t b = 0; b < n_batches; ++b) run_batch(b);
  } else {
    for (std::size_t wave = 0; wave < n_batches; wave += max_in_flight) {
      std::vector<std::future<void>> pending;
      for (std::size_t b = wave; b < std::min(n_batches, wave + max_in_flight); ++b) {
        pending.push_back(std::async(std::launch::async, run_batch, b));
      }
      // get() in submission order so the first failing batch is reported.
      std::exception_ptr first;
      for (auto& f : pending) {
        try {
          f.get();
        } catch (...) {
          if (!first) first = std::current_exception();
        }
      }
      if (first) std::rethrow_exception(first);
    }
  }

  std::vector<Embedding> result;
  result.reserve(raw.size());
  for (auto& v : raw) {
    client.ObserveDim(v.size());
    result.emplace_back(std::move(v), client.model_id());
  }
  return result;
}

inline std::vector<TokenProposal> topk_next_tokens(ProposalClient& client, std::string_view prefix,
                                                   std::string_view generated, int k,
                                                   QueryMeter& meter) {
  if (k < 1) throw DomainError("top-k must be >= 1");
  meter.AddLm();
  auto proposals = client.TopK(prefix, generated, k);
  std::stable_sort(proposals.begin(), proposals.end(),
                   [](const TokenProposal& a, const TokenProposal& b) {
                     return a.logprob > b.logprob;
                   });
  if (proposals.size() > static_cast<std::size_t>(k)) proposals.resize(k);
  return proposals;
}

inline std::string chat_complete(ChatClient& client, std::string_view prompt, QueryMeter& meter) {
  if (prompt.empty()) throw DomainError("chat prompt must be non-empty");
  meter.AddChat();
  return client.Complete(prompt);
}

}  // namespace zsinvert
