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

// Clients for OpenAI-compatible endpoints. Needs cpp-httplib on the include
// path; define CPPHTTPLIB_OPENSSL_SUPPORT before including for https URLs.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "zsinvert/backends.hpp"
#include "zsinvert/errors.hpp"
#include "zsinvert/log.hpp"

namespace zsinvert::http {

using nlohmann::json;

struct EndpointOptions {
  std::string base_url;  // scheme://host[:port][/path-prefix]
  std::string model_id;
  std::string api_key;   // bearer token; empty sends no Authorization header
  int max_attempts = 3;
  double backoff_s = 0.5;
  double timeout_s = 120.0;
  bool preflight = true;  // GET /v1/models at construction
};

// "http://host:8080/api" -> {"http://host:8080", "/api"}.
struct BaseUrl {
  std::string origin;
  std::string path_prefix;
};

inline BaseUrl ParseBaseUrl(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw ConfigError("endpoint URL needs a scheme: '" + std::string(url) + "'");
  }
  const std::string_view scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported URL scheme '" + std::string(scheme) + "'");
  }
  const auto slash = url.find('/', scheme_end + 3);
  BaseUrl out;
  out.origin = std::string(url.substr(0, slash));
  if (slash != std::string_view::npos) out.path_prefix = std::string(url.substr(slash));
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  if (out.origin.size() == scheme_end + 3) throw ConfigError("endpoint URL has no host");
  return out;
}

inline std::string ApiKeyFromEnv() {
  const char* k = std::getenv("ZSINVERT_API_KEY");
  return k ? k : "";
}

// JSON over HTTP with bounded retries. Retries cover transport failures,
// 429 and 5xx; other statuses fail at once.
class JsonEndpoint {
 public:
  explicit JsonEndpoint(const EndpointOptions& opts)
      : opts_(opts), base_(ParseBaseUrl(opts.base_url)) {
    if (opts_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  }

  const EndpointOptions& options() const { return opts_; }

  json Post(const std::string& path, const json& body) const {
    return Send("POST", path, body.dump());
  }
  json Get(const std::string& path) const { return Send("GET", path, {}); }

 private:
  std::unique_ptr<httplib::Client> MakeClient() const {
    auto cli = std::make_unique<httplib::Client>(base_.origin);
    const auto secs = static_cast<time_t>(opts_.timeout_s);
    const auto usecs = static_cast<time_t>((opts_.timeout_s - static_cast<double>(secs)) * 1e6);
    cli->set_connection_timeout(10, 0);
    cli->set_read_timeout(secs, usecs);
    cli->set_write_timeout(secs, usecs);
    if (!opts_.api_key.empty()) cli->set_bearer_token_auth(opts_.api_key);
    return cli;
  }

  json Send(const std::string& method, const std::string& path, const std::string& body) const {
    const std::string full = base_.path_prefix + path;
    std::string last_error;
    for (int attempt = 1; attempt <= opts_.max_attempts; ++attempt) {
      if (attempt > 1) {
        const double wait = opts_.backoff_s * static_cast<double>(1 << (attempt - 2));
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
      }
      // One connection per request keeps clients shareable across threads.
      auto cli = MakeClient();
      auto res = method == "GET" ? cli->Get(full) : cli->Post(full, body, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        log::Warn(method, " ", full, " attempt ", attempt, " failed: ", last_error);
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        log::Warn(method, " ", full, " attempt ", attempt, ": ", last_error);
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw BackendError(method + " " + full + " returned HTTP " + std::to_string(res->status) +
                           ": " + res->body.substr(0, 200));
      }
      try {
        return json::parse(res->body);
      } catch (const json::exception& e) {
        throw BackendError(method + " " + full + " returned malformed JSON: " + e.what());
      }
    }
    throw BackendError(method + " " + full + " failed after " +
                       std::to_string(opts_.max_attempts) + " attempts: " + last_error);
  }

  EndpointOptions opts_;
  BaseUrl base_;
};

inline void Preflight(const JsonEndpoint& ep) {
  if (!ep.options().preflight) return;
  try {
    ep.Get("/v1/models");
  } catch (const BackendError& e) {
    throw BackendError("preflight of " + ep.options().base_url + " failed: " + e.what());
  }
}

class HttpEncoder final : public EncoderClient {
 public:
  // text_prefix is prepended to every input, for instruction-tuned embedders.
  HttpEncoder(EndpointOptions opts, std::size_t batch_limit = 64, std::string text_prefix = {})
      : ep_(opts), model_id_(opts.model_id), batch_limit_(batch_limit),
        prefix_(std::move(text_prefix)) {
    if (batch_limit_ == 0) throw ConfigError("encoder batch limit must be positive");
    Preflight(ep_);
  }

  const std::string& model_id() const override { return model_id_; }
  std::size_t batch_limit() const override { return batch_limit_; }

  std::vector<std::vector<double>> EmbedRequest(std::span<const std::string> texts) override {
    json input = json::array();
    for (const auto& t : texts) input.push_back(prefix_ + t);
    const json res = ep_.Post("/v1/embeddings", {{"model", model_id_}, {"input", input}});
    try {
      std::vector<std::vector<double>> out(texts.size());
      std::vector<bool> seen(texts.size(), false);
      for (const auto& item : res.at("data")) {
        const auto idx = item.at("index").get<std::size_t>();
        if (idx >= out.size() || seen[idx]) throw BackendError("bad embedding index");
        seen[idx] = true;
        out[idx] = item.at("embedding").get<std::vector<double>>();
      }
      if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw BackendError("embedding response is missing indices");
      }
      return out;
    } catch (const json::exception& e) {
      throw BackendError(std::string("unexpected embeddings response: ") + e.what());
    }
  }

 private:
  JsonEndpoint ep_;
  std::string model_id_;
  std::size_t batch_limit_;
  std::string prefix_;
};

// End-of-sequence markers used by common serving stacks.
inline bool IsEosPiece(std::string_view t) {
  static constexpr std::string_view kEos[] = {"<|endoftext|>", "</s>", "<|eot_id|>",
                                              "<|im_end|>", "<|end_of_text|>", "<eos>"};
  return std::find(std::begin(kEos), std::end(kEos), t) != std::end(kEos);
}

class HttpProposal final : public ProposalClient {
 public:
  // Probes logprob support once; an endpoint without it is rejected here
  // rather than halfway through a search.
  explicit HttpProposal(EndpointOptions opts) : ep_(opts), model_id_(opts.model_id) {
    Preflight(ep_);
    const json res = Request("Hello", 2);
    if (!HasTopLogprobs(res)) {
      throw CapabilityError("completions endpoint " + opts.base_url +
                            " does not return top logprobs");
    }
  }

  const std::string& model_id() const override { return model_id_; }

  std::vector<TokenProposal> TopK(std::string_view prefix, std::string_view generated,
                                  int k) override {
    const json res = Request(std::string(prefix) + std::string(generated), k);
    if (!HasTopLogprobs(res)) throw BackendError("completion response lost its logprobs");
    std::vector<TokenProposal> out;
    for (const auto& [token, lp] : res["choices"][0]["logprobs"]["top_logprobs"][0].items()) {
      if (!lp.is_number()) throw BackendError("non-numeric logprob for '" + token + "'");
      out.push_back({token, lp.get<double>(), IsEosPiece(token)});
    }
    return out;
  }

 private:
  static bool HasTopLogprobs(const json& res) {
    if (!res.contains("choices") || !res["choices"].is_array() || res["choices"].empty()) {
      return false;
    }
    const auto& c = res["choices"][0];
    if (!c.contains("logprobs") || !c["logprobs"].is_object()) return false;
    const auto& lp = c["logprobs"];
    return lp.contains("top_logprobs") && lp["top_logprobs"].is_array() &&
           !lp["top_logprobs"].empty() && lp["top_logprobs"][0].is_object() &&
           !lp["top_logprobs"][0].empty();
  }

  json Request(const std::string& prompt, int k) const {
    return ep_.Post("/v1/completions", {{"model", model_id_},
                                        {"prompt", prompt},
                                        {"max_tokens", 1},
                                        {"logprobs", k},
                                        {"temperature", 0}});
  }

  JsonEndpoint ep_;
  std::string model_id_;
};

class HttpChat final : public ChatClient {
 public:
  explicit HttpChat(EndpointOptions opts, int max_output_tokens = 256)
      : ep_(opts), model_id_(opts.model_id), max_tokens_(max_output_tokens) {
    if (max_tokens_ < 1) throw ConfigError("max_output_tokens must be positive");
    Preflight(ep_);
  }

  const std::string& model_id() const override { return model_id_; }
  int max_output_tokens() const override { return max_tokens_; }

  std::string Complete(std::string_view prompt) override {
    json message = {{"role", "user"}, {"content", std::string(prompt)}};
    const json body = {{"model", model_id_},
                       {"messages", json::array({std::move(message)})},
                       {"max_tokens", max_tokens_},
                       {"temperature", 0}};
    const json res = ep_.Post("/v1/chat/completions", body);
    try {
      return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw BackendError(std::string("unexpected chat response: ") + e.what());
    }
  }

 private:
  JsonEndpoint ep_;
  std::string model_id_;
  int max_tokens_;
};

}  // namespace zsinvert::http
