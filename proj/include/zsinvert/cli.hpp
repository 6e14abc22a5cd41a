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

// The zsinvert command line: configuration layering, backend selection and
// the batch commands. Everything here is callable from tests with injected
// backends; tools/zsinvert.cpp is a thin main().

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "zsinvert/backends.hpp"
#include "zsinvert/correction.hpp"
#include "zsinvert/domain.hpp"
#include "zsinvert/errors.hpp"
#include "zsinvert/http.hpp"
#include "zsinvert/io.hpp"
#include "zsinvert/log.hpp"
#include "zsinvert/metrics.hpp"
#include "zsinvert/pipeline.hpp"
#include "zsinvert/toy.hpp"

namespace zsinvert::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitConfig = 2;

enum class Preset { kCustom, kMsmarco, kEnron };

inline Preset ParsePreset(std::string_view s) {
  if (s == "custom") return Preset::kCustom;
  if (s == "msmarco-style") return Preset::kMsmarco;
  if (s == "enron-style") return Preset::kEnron;
  throw ConfigError("unknown preset '" + std::string(s) +
                    "' (expected msmarco-style, enron-style or custom)");
}

struct RunConfig {
  std::string encoder_url, llm_url, chat_url;
  std::string encoder_model, llm_model, chat_model;
  std::string encoder_prefix;
  std::string api_key;
  std::size_t batch_limit = 64;
  int max_attempts = 3;

  PipelineParams pipeline;
  NoiseSpec noise;
  Preset preset = Preset::kCustom;
  std::size_t parallelism = 1;
  std::size_t max_in_flight = 1;
  int max_doc_tokens = 32;

  std::string corpus, out, records, csv;
  std::size_t n_docs = 400, n_candidates = 5;
  std::vector<double> sigmas = {0.1, 0.01, 0.001};
  bool judge = false;
  bool length_buckets = false;
  std::optional<std::size_t> limit;  // stop after this many documents
};

// ---------------------------------------------------------------------------
// Configuration layers. Each layer is a flat JSON object over the keys
// below; flags override env vars, which override the config file.

enum class Kind { kString, kInt, kDouble, kBool, kDoubleList };

struct KeySpec {
  const char* key;
  const char* flag;  // nullptr: config file / env only
  Kind kind;
  const char* help;
};

inline const std::vector<KeySpec>& Keys() {
  static const std::vector<KeySpec> keys = {
      {"encoder_url", "--encoder-url", Kind::kString, "embeddings endpoint, or toy://trigram"},
      {"llm_url", "--llm-url", Kind::kString, "completions endpoint, or toy://bigram"},
      {"chat_url", "--chat-url", Kind::kString, "chat endpoint, or toy://echo|fail|yes|no"},
      {"encoder_model", "--encoder-model", Kind::kString, "encoder model id"},
      {"llm_model", "--llm-model", Kind::kString, "proposal model id"},
      {"chat_model", "--chat-model", Kind::kString, "chat model id"},
      {"encoder_prefix", "--encoder-prefix", Kind::kString, "text prefix for every encoder input"},
      {"api_key", nullptr, Kind::kString, ""},
      {"batch_limit", "--batch-limit", Kind::kInt, "texts per embeddings request"},
      {"max_attempts", "--max-attempts", Kind::kInt, "attempts per HTTP request"},
      {"beam_width", "--beam-width", Kind::kInt, "beams kept per step"},
      {"top_k", "--top-k", Kind::kInt, "proposals per beam"},
      {"max_length", "--max-length", Kind::kInt, "generated tokens per search"},
      {"iterations", "--iterations", Kind::kInt, "refinement iterations"},
      {"correction", "--correction,!--no-correction", Kind::kBool, "run the correction stage"},
      {"score_corrected", nullptr, Kind::kBool, ""},
      {"noise_sigma", "--noise-sigma", Kind::kDouble, "Gaussian noise std on the target"},
      {"noise_seed", "--noise-seed", Kind::kInt, "noise seed"},
      {"preset", "--preset", Kind::kString, "msmarco-style, enron-style or custom"},
      {"parallelism", "--parallelism", Kind::kInt, "documents in flight"},
      {"max_in_flight", "--max-in-flight", Kind::kInt, "embedding batches in flight per step"},
      {"corpus", "--corpus", Kind::kString, "corpus JSONL"},
      {"out", "--out", Kind::kString, "output path"},
      {"max_doc_tokens", "--max-doc-tokens", Kind::kInt, "truncate documents to this many tokens"},
      {"records", "--records", Kind::kString, "records JSONL"},
      {"csv", "--csv", Kind::kString, "per-iteration CSV path"},
      {"n_docs", "--n-docs", Kind::kInt, "documents for correction data"},
      {"n_candidates", "--n-candidates", Kind::kInt, "inversions per document"},
      {"sigmas", "--sigmas", Kind::kDoubleList, "comma-separated noise levels"},
      {"judge", "--judge", Kind::kBool, "ask the chat model whether inversions leak"},
      {"length_buckets", "--length-buckets", Kind::kBool, "report by ground-truth length"},
      {"limit", "--limit", Kind::kInt, ""},
  };
  return keys;
}

inline const KeySpec& FindKey(std::string_view key) {
  for (const auto& k : Keys()) {
    if (key == k.key) return k;
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

// Parses a flag or env string into the JSON type of `key`.
inline json Coerce(const KeySpec& spec, const std::string& raw) {
  auto bad = [&] { return ConfigError("bad value '" + raw + "' for " + spec.key); };
  try {
    std::size_t used = 0;
    switch (spec.kind) {
      case Kind::kString: return raw;
      case Kind::kInt: {
        if (!raw.empty() && raw[0] == '-') throw bad();
        const unsigned long long v = std::stoull(raw, &used);
        if (used != raw.size()) throw bad();
        return v;
      }
      case Kind::kDouble: {
        const double v = std::stod(raw, &used);
        if (used != raw.size()) throw bad();
        return v;
      }
      case Kind::kBool: {
        const std::string l = text::ToLower(raw);
        if (l == "1" || l == "true" || l == "on" || l == "yes") return true;
        if (l == "0" || l == "false" || l == "off" || l == "no") return false;
        throw bad();
      }
      case Kind::kDoubleList: {
        json arr = json::array();
        std::stringstream ss(raw);
        std::string item;
        const KeySpec one{spec.key, nullptr, Kind::kDouble, ""};
        while (std::getline(ss, item, ',')) arr.push_back(Coerce(one, text::Trim(item)));
        if (arr.empty()) throw bad();
        return arr;
      }
    }
  } catch (const std::logic_error&) {
    throw bad();
  }
  throw bad();
}

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

inline std::optional<std::string> ProcessEnv(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

inline json EnvLayer(const EnvLookup& env) {
  json j = json::object();
  static const std::pair<const char*, const char*> vars[] = {
      {"ZSINVERT_ENCODER_URL", "encoder_url"},
      {"ZSINVERT_LLM_URL", "llm_url"},
      {"ZSINVERT_CHAT_URL", "chat_url"},
      {"ZSINVERT_API_KEY", "api_key"},
  };
  for (const auto& [var, key] : vars) {
    if (auto v = env(var)) j[key] = *v;
  }
  return j;
}

inline json FileLayer(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  for (auto& [key, value] : j.items()) {
    const auto& spec = FindKey(key);
    // Allow strings everywhere so hand-written configs can quote numbers.
    if (value.is_string() && spec.kind != Kind::kString) value = Coerce(spec, value.get<std::string>());
  }
  return j;
}

namespace detail {
template <typename T>
T Get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}
template <typename T>
void Maybe(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = Get<T>(j, key);
}
inline void Positive(long long v, const char* what) {
  if (v < 1) throw ConfigError(std::string(what) + " must be >= 1");
}
}  // namespace detail

// Builds the run configuration from the merged layers and applies the
// preset. A preset rejects explicit settings that contradict it.
inline RunConfig BuildConfig(const json& merged) {
  using detail::Maybe;
  RunConfig c;
  for (const auto& [key, value] : merged.items()) FindKey(key);

  Maybe(merged, "encoder_url", c.encoder_url);
  Maybe(merged, "llm_url", c.llm_url);
  Maybe(merged, "chat_url", c.chat_url);
  Maybe(merged, "encoder_model", c.encoder_model);
  Maybe(merged, "llm_model", c.llm_model);
  Maybe(merged, "chat_model", c.chat_model);
  Maybe(merged, "encoder_prefix", c.encoder_prefix);
  Maybe(merged, "api_key", c.api_key);
  Maybe(merged, "batch_limit", c.batch_limit);
  Maybe(merged, "max_attempts", c.max_attempts);
  Maybe(merged, "beam_width", c.pipeline.decode.beam_width);
  Maybe(merged, "top_k", c.pipeline.decode.top_k);
  Maybe(merged, "max_length", c.pipeline.decode.max_length);
  Maybe(merged, "score_corrected", c.pipeline.score_corrected);
  Maybe(merged, "noise_sigma", c.noise.sigma);
  Maybe(merged, "noise_seed", c.noise.rng_seed);
  Maybe(merged, "parallelism", c.parallelism);
  Maybe(merged, "max_in_flight", c.max_in_flight);
  Maybe(merged, "corpus", c.corpus);
  Maybe(merged, "out", c.out);
  Maybe(merged, "max_doc_tokens", c.max_doc_tokens);
  Maybe(merged, "records", c.records);
  Maybe(merged, "csv", c.csv);
  Maybe(merged, "n_docs", c.n_docs);
  Maybe(merged, "n_candidates", c.n_candidates);
  Maybe(merged, "sigmas", c.sigmas);
  Maybe(merged, "judge", c.judge);
  Maybe(merged, "length_buckets", c.length_buckets);
  if (merged.contains("limit")) c.limit = detail::Get<std::size_t>(merged, "limit");

  if (merged.contains("preset")) c.preset = ParsePreset(detail::Get<std::string>(merged, "preset"));
  std::optional<int> n_iter;
  std::optional<bool> correction;
  if (merged.contains("iterations")) n_iter = detail::Get<int>(merged, "iterations");
  if (merged.contains("correction")) correction = detail::Get<bool>(merged, "correction");

  if (c.preset != Preset::kCustom) {
    const int want_iter = c.preset == Preset::kMsmarco ? 9 : 3;
    const bool want_corr = c.preset == Preset::kMsmarco;
    const char* name = c.preset == Preset::kMsmarco ? "msmarco-style" : "enron-style";
    if (n_iter && *n_iter != want_iter) {
      throw ConfigError(std::string("preset ") + name + " runs " + std::to_string(want_iter) +
                        " iterations; --iterations " + std::to_string(*n_iter) + " contradicts it");
    }
    if (correction && *correction != want_corr) {
      throw ConfigError(std::string("preset ") + name + " has correction " +
                        (want_corr ? "on" : "off") + "; the correction setting contradicts it");
    }
    n_iter = want_iter;
    correction = want_corr;
  }
  if (n_iter) c.pipeline.n_iter = *n_iter;
  if (correction) c.pipeline.correction_enabled = *correction;

  c.pipeline.Validate();
  detail::Positive(static_cast<long long>(c.batch_limit), "batch limit");
  detail::Positive(c.max_attempts, "max attempts");
  detail::Positive(static_cast<long long>(c.parallelism), "parallelism");
  detail::Positive(static_cast<long long>(c.max_in_flight), "max in flight");
  detail::Positive(c.max_doc_tokens, "max doc tokens");
  detail::Positive(static_cast<long long>(c.n_docs), "n_docs");
  detail::Positive(static_cast<long long>(c.n_candidates), "n_candidates");
  if (!(c.noise.sigma >= 0.0) || !std::isfinite(c.noise.sigma)) {
    throw ConfigError("noise sigma must be a finite value >= 0");
  }
  for (double s : c.sigmas) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("sigmas must be finite and >= 0");
  }
  return c;
}

// flags > env > file.
inline RunConfig ResolveConfig(const json& flags, const EnvLookup& env = ProcessEnv) {
  json merged = json::object();
  if (flags.contains("config")) {
    merged = FileLayer(flags["config"].get<std::string>());
  }
  merged.update(EnvLayer(env));
  for (const auto& [key, value] : flags.items()) {
    if (key != "config") merged[key] = value;
  }
  return BuildConfig(merged);
}

// ---------------------------------------------------------------------------
// Backends.

enum Need : unsigned { kNeedEncoder = 1, kNeedLm = 2, kNeedChat = 4 };

struct BackendSet {
  std::unique_ptr<EncoderClient> encoder;
  std::unique_ptr<ProposalClient> lm;
  std::unique_ptr<ChatClient> chat;
};

// Creates the requested roles. May throw ConfigError, or BackendError and
// CapabilityError from endpoint preflight.
using BackendFactory =
    std::function<BackendSet(const RunConfig&, const std::vector<CorpusDoc>&, unsigned needs)>;

inline bool IsToy(std::string_view url) { return url.rfind("toy://", 0) == 0; }

inline http::EndpointOptions Endpoint(const RunConfig& c, const std::string& url,
                                      const std::string& model, const char* model_flag) {
  if (model.empty()) {
    throw ConfigError(std::string(model_flag) + " is required for " + url);
  }
  http::EndpointOptions o;
  o.base_url = url;
  o.model_id = model;
  o.api_key = c.api_key;
  o.max_attempts = c.max_attempts;
  return o;
}

// toy:// URLs select the in-process doubles. The toy LM learns its bigrams
// from the corpus texts, which is what makes desk-scale inversion possible.
inline BackendSet MakeBackends(const RunConfig& c, const std::vector<CorpusDoc>& corpus,
                               unsigned needs) {
  BackendSet b;
  if (needs & kNeedEncoder) {
    if (c.encoder_url.empty()) throw ConfigError("--encoder-url (or ZSINVERT_ENCODER_URL) is required");
    if (c.encoder_url == "toy://trigram" || c.encoder_url == "toy://") {
      b.encoder = std::make_unique<ToyEmbedder>(256, 0, c.batch_limit);
    } else if (IsToy(c.encoder_url)) {
      throw ConfigError("unknown toy encoder " + c.encoder_url);
    } else {
      b.encoder = std::make_unique<http::HttpEncoder>(
          Endpoint(c, c.encoder_url, c.encoder_model, "--encoder-model"), c.batch_limit,
          c.encoder_prefix);
    }
  }
  if (needs & kNeedLm) {
    if (c.llm_url.empty()) throw ConfigError("--llm-url (or ZSINVERT_LLM_URL) is required");
    if (c.llm_url == "toy://bigram" || c.llm_url == "toy://") {
      std::vector<std::string> texts;
      for (const auto& d : corpus) {
        if (!text::TrimView(d.text).empty()) texts.push_back(text::TruncateWords(d.text, c.max_doc_tokens));
      }
      if (texts.empty()) throw ConfigError("toy://bigram needs corpus rows with text");
      b.lm = std::make_unique<ToyLM>(ToyLM::FromCorpus(texts));
    } else if (IsToy(c.llm_url)) {
      throw ConfigError("unknown toy LM " + c.llm_url);
    } else {
      b.lm = std::make_unique<http::HttpProposal>(
          Endpoint(c, c.llm_url, c.llm_model, "--llm-model"));
    }
  }
  if (needs & kNeedChat) {
    if (c.chat_url.empty()) throw ConfigError("--chat-url (or ZSINVERT_CHAT_URL) is required");
    if (c.chat_url == "toy://echo") {
      b.chat = std::make_unique<ScriptedChat>(ScriptedChat::EchoFirstCandidate());
    } else if (c.chat_url == "toy://fail") {
      b.chat = std::make_unique<ScriptedChat>(ScriptedChat::AlwaysFail());
    } else if (c.chat_url == "toy://yes" || c.chat_url == "toy://no") {
      b.chat = std::make_unique<ScriptedChat>(ScriptedChat::Canned(c.chat_url.substr(6)));
    } else if (IsToy(c.chat_url)) {
      throw ConfigError("unknown toy chat " + c.chat_url);
    } else {
      b.chat = std::make_unique<http::HttpChat>(
          Endpoint(c, c.chat_url, c.chat_model, "--chat-model"));
    }
  }
  return b;
}

struct Context {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
  BackendFactory factory = MakeBackends;
};

// ---------------------------------------------------------------------------
// invert

// Per-document noise seed, so a document's perturbation does not depend on
// which other documents share the run or in what order they finish.
inline std::uint64_t DocNoiseSeed(std::uint64_t base, std::string_view doc_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : doc_id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = h ^ (base + 0x9E3779B97F4A7C15ULL);  // splitmix64 finalizer
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// doc_ids already present in an output file. A torn last line from an
// interrupted run is cut off so appends start on a fresh line.
inline std::set<std::string> CompletedDocIds(const fs::path& out) {
  std::set<std::string> done;
  if (!fs::exists(out)) return done;
  {
    std::ifstream in(out, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!content.empty() && content.back() != '\n') {
      const auto keep = content.rfind('\n');
      const std::size_t size = keep == std::string::npos ? 0 : keep + 1;
      log::Warn("dropping a partial trailing line from ", out.string());
      in.close();
      fs::resize_file(out, size);
    }
  }
  ForEachJsonLine(out, [&](const json& j, std::size_t) {
    done.insert(j.at("doc_id").get<std::string>());
  });
  return done;
}

// One document end to end. Ground-truth and evaluation-only encoder queries
// go to a separate meter so the record's ledger counts the attack alone.
inline InversionRecord InvertDocument(const CorpusDoc& doc, const RunConfig& c, BackendSet& be,
                                      QueryMeter& eval_meter) {
  const std::string truth =
      text::TrimView(doc.text).empty() ? std::string() : text::TruncateWords(doc.text, c.max_doc_tokens);
  std::optional<Embedding> clean;
  try {
    if (doc.embedding) {
      clean = Embedding(*doc.embedding, "provided");
    } else {
      std::vector<std::string> one{truth};
      clean = embed_batch(*be.encoder, one, eval_meter).front();
    }
  } catch (const std::exception& e) {
    InversionRecord r;
    r.doc_id = doc.doc_id;
    r.encoder_model = be.encoder->model_id();
    r.error = std::string("embedding the target failed: ") + e.what();
    return r;
  }

  Embedding target = *clean;
  std::optional<NoiseSpec> noise;
  if (c.noise.sigma > 0.0) {
    noise = NoiseSpec{c.noise.sigma, DocNoiseSeed(c.noise.rng_seed, doc.doc_id)};
    target = add_noise(*clean, *noise);
  }

  Backends b{*be.encoder, *be.lm, be.chat.get(), c.max_in_flight};
  QueryMeter meter;
  InversionRecord rec = invert(target, c.pipeline, PromptTemplates{}, b, meter, doc.doc_id);
  rec.noise = noise;
  if (!truth.empty()) {
    rec.max_doc_tokens = c.max_doc_tokens;
    rec.f1 = token_f1(truth, rec.final_text);
  }
  if (noise && !text::TrimView(rec.final_text).empty()) {
    try {
      std::vector<std::string> one{rec.final_text};
      CosineScorer clean_scorer(*be.encoder, *clean, eval_meter);
      rec.clean_cos_sim = clean_scorer.Score(one).front();
    } catch (const std::exception& e) {
      log::Warn("[", doc.doc_id, "] clean cosine unavailable: ", e.what());
    }
  }
  return rec;
}

struct InvertSummary {
  std::size_t written = 0, failed = 0;
};

inline InvertSummary RunInversions(const std::vector<CorpusDoc>& pending, const RunConfig& c,
                                   BackendSet& be, const fs::path& out_path) {
  std::ofstream out(out_path, std::ios::app);
  if (!out) throw ConfigError("cannot write " + out_path.string());
  std::mutex write_mu;
  std::atomic<std::size_t> next{0}, failed{0}, written{0};
  QueryMeter eval_meter;

  auto worker = [&] {
    for (std::size_t i = next++; i < pending.size(); i = next++) {
      InversionRecord rec = InvertDocument(pending[i], c, be, eval_meter);
      if (rec.error) ++failed;
      const std::string line = SerializeRecord(rec);
      std::lock_guard lock(write_mu);
      out << line << '\n';
      out.flush();
      ++written;
      log::Info("wrote ", rec.doc_id, " (", written.load(), "/", pending.size(), ")");
    }
  };
  const std::size_t n = std::clamp<std::size_t>(c.parallelism, 1, pending.size());
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
  }
  return {written.load(), failed.load()};
}

inline int cmd_invert(const RunConfig& c, Context& ctx) {
  if (c.corpus.empty()) throw ConfigError("--corpus is required");
  if (c.out.empty()) throw ConfigError("--out is required");
  const auto corpus = ReadCorpus(c.corpus);
  const auto done = CompletedDocIds(c.out);

  std::vector<CorpusDoc> pending;
  for (const auto& d : corpus) {
    if (!done.count(d.doc_id)) pending.push_back(d);
  }
  const std::size_t skipped = corpus.size() - pending.size();
  if (c.limit && pending.size() > *c.limit) pending.resize(*c.limit);
  if (pending.empty()) {
    ctx.out << "nothing to do: all " << corpus.size() << " documents are in " << c.out << "\n";
    return kExitOk;
  }

  BackendSet be;
  try {
    be = ctx.factory(c, corpus, kNeedEncoder | kNeedLm | (c.pipeline.correction_enabled ? kNeedChat : 0u));
  } catch (const BackendError& e) {
    ctx.err << "preflight failed: " << e.what() << "\n";
    return kExitConfig;
  }

  const auto s = RunInversions(pending, c, be, c.out);
  ctx.out << "wrote " << s.written << " records to " << c.out << " (" << s.failed << " failed, "
          << skipped << " already present)\n";
  return s.failed ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate / judge

inline std::map<std::string, std::string> GroundTruth(const std::vector<CorpusDoc>& corpus) {
  std::map<std::string, std::string> m;
  for (const auto& d : corpus) {
    if (!text::TrimView(d.text).empty()) m.emplace(d.doc_id, d.text);
  }
  return m;
}

inline std::string Fixed(double v, int digits = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline void PrintReport(const EvalReport& r, std::ostream& os) {
  os << "docs " << r.n_docs << "  F1 " << Fixed(r.mean_f1) << "  cos " << Fixed(r.mean_cos, 4);
  if (r.leakage_pct) os << "  leakage " << Fixed(*r.leakage_pct) << "%";
  if (r.judge_invalid) os << "  (judge invalid: " << r.judge_invalid << ")";
  os << "\n";
  if (!r.per_iteration.empty()) {
    os << "iter      F1     cos\n";
    for (const auto& row : r.per_iteration) {
      os << std::setw(4) << row.iteration << std::setw(8) << Fixed(row.mean_f1) << std::setw(8)
         << Fixed(row.mean_cos, 4) << "\n";
    }
  }
  for (const auto& row : r.buckets) {
    os << "len<=" << row.token_length << "  n=" << row.n << "  F1 " << Fixed(row.mean_f1)
       << "  cos " << Fixed(row.mean_cos, 4) << "\n";
  }
}

inline fs::path IterationCsvPath(const RunConfig& c) {
  if (!c.csv.empty()) return c.csv;
  fs::path p(c.out);
  return p.replace_extension(".iterations.csv");
}

inline int cmd_evaluate(const RunConfig& c, Context& ctx) {
  if (c.records.empty()) throw ConfigError("--records is required");
  if (c.corpus.empty()) throw ConfigError("--corpus is required");
  if (c.out.empty()) throw ConfigError("--out is required");
  const auto records = ReadRecords(c.records);
  const auto corpus = ReadCorpus(c.corpus);

  BackendSet be;
  if (c.judge) {
    try {
      be = ctx.factory(c, corpus, kNeedChat);
    } catch (const BackendError& e) {
      ctx.err << "preflight failed: " << e.what() << "\n";
      return kExitConfig;
    }
  }
  QueryMeter meter;
  EvalOptions opts{c.length_buckets, c.max_doc_tokens};
  const EvalReport report = evaluate_corpus(records, GroundTruth(corpus), be.chat.get(), meter, opts);

  std::ofstream(c.out) << ReportToJson(report).dump(2) << "\n";
  std::ofstream(IterationCsvPath(c)) << IterationCsv(report);
  PrintReport(report, ctx.out);
  return kExitOk;
}

inline int cmd_judge(const RunConfig& c, Context& ctx) {
  if (c.records.empty()) throw ConfigError("--records is required");
  if (c.corpus.empty()) throw ConfigError("--corpus is required");
  if (c.out.empty()) throw ConfigError("--out is required");
  auto records = ReadRecords(c.records);
  const auto corpus = ReadCorpus(c.corpus);
  const auto truth = GroundTruth(corpus);

  BackendSet be;
  try {
    be = ctx.factory(c, corpus, kNeedChat);
  } catch (const BackendError& e) {
    ctx.err << "preflight failed: " << e.what() << "\n";
    return kExitConfig;
  }
  QueryMeter meter;
  std::size_t yes = 0, no = 0, invalid = 0;
  for (auto& r : records) {
    auto it = truth.find(r.doc_id);
    if (it == truth.end()) continue;
    const std::string original = text::TruncateWords(it->second, r.max_doc_tokens.value_or(c.max_doc_tokens));
    switch (judge_leakage(original, r.final_text, *be.chat, meter)) {
      case Verdict::kLeak: r.leaked = true; ++yes; break;
      case Verdict::kNoLeak: r.leaked = false; ++no; break;
      case Verdict::kInvalid: r.leaked.reset(); ++invalid; break;
    }
  }
  WriteRecords(c.out, records);
  ctx.out << "judged " << yes + no + invalid << " records with " << be.chat->model_id() << ": ";
  if (yes + no) ctx.out << "leakage " << Fixed(100.0 * yes / (yes + no)) << "%";
  else ctx.out << "no valid verdicts";
  ctx.out << " (" << invalid << " invalid)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gen-data

inline int cmd_gen_correction_data(const RunConfig& c, Context& ctx) {
  if (c.corpus.empty()) throw ConfigError("--corpus is required");
  if (c.out.empty()) throw ConfigError("--out is required");
  std::vector<CorpusDoc> corpus;
  for (auto& d : ReadCorpus(c.corpus)) {
    if (!text::TrimView(d.text).empty()) {
      d.text = text::TruncateWords(d.text, c.max_doc_tokens);
      corpus.push_back(std::move(d));
    }
  }
  BackendSet be;
  try {
    be = ctx.factory(c, corpus, kNeedEncoder | kNeedLm);
  } catch (const BackendError& e) {
    ctx.err << "preflight failed: " << e.what() << "\n";
    return kExitConfig;
  }
  QueryMeter meter;
  CorrectionDataOptions opts{c.n_docs, c.n_candidates, c.parallelism};
  std::vector<CorrectionExample> rows;
  try {
    rows = gen_correction_dataset(corpus, *be.encoder, *be.lm, c.pipeline.decode, PromptTemplates{},
                                  opts, meter);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    ctx.err << e.what() << "\n";
    return kExitPartial;
  }
  WriteDataset(c.out, rows);
  ctx.out << "wrote " << rows.size() << " correction examples to " << c.out << " ("
          << meter.Snapshot().encoder_texts << " encoder texts)\n";
  return rows.size() == c.n_docs ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// noise-sweep

inline std::string SigmaTag(double sigma) {
  std::ostringstream os;
  os << sigma;
  return os.str();
}

// <out>.sigma-<s>.jsonl per level plus <out>.noise.csv.
inline fs::path SweepRecordsPath(const fs::path& stem, double sigma) {
  return fs::path(stem.string() + ".sigma-" + SigmaTag(sigma) + ".jsonl");
}

inline int cmd_noise_sweep(const RunConfig& c, Context& ctx) {
  if (c.out.empty()) throw ConfigError("--out is required");
  if (c.sigmas.empty()) throw ConfigError("--sigmas must name at least one level");
  int worst = kExitOk;
  std::ostringstream table;
  table << "sigma,n_docs,mean_f1,mean_cos\n" << std::setprecision(10);
  ctx.out << "   sigma      F1     cos\n";
  for (double sigma : c.sigmas) {
    RunConfig run = c;
    run.noise.sigma = sigma;
    run.out = SweepRecordsPath(c.out, sigma).string();
    const int code = cmd_invert(run, ctx);
    if (code == kExitConfig) return code;
    worst = std::max(worst, code);

    QueryMeter meter;
    const auto report = evaluate_corpus(ReadRecords(run.out), GroundTruth(ReadCorpus(c.corpus)),
                                        nullptr, meter, {false, c.max_doc_tokens});
    table << sigma << ',' << report.n_docs << ',' << report.mean_f1 << ',' << report.mean_cos << '\n';
    ctx.out << std::setw(8) << SigmaTag(sigma) << std::setw(8) << Fixed(report.mean_f1)
            << std::setw(8) << Fixed(report.mean_cos, 4) << "\n";
  }
  std::ofstream(c.out + ".noise.csv") << table.str();
  return worst;
}

// ---------------------------------------------------------------------------
// Argument parsing.

inline log::Level ParseLogLevel(std::string_view s) {
  if (s == "debug") return log::Level::kDebug;
  if (s == "info") return log::Level::kInfo;
  if (s == "warning") return log::Level::kWarning;
  if (s == "error") return log::Level::kError;
  if (s == "off") return log::Level::kOff;
  throw ConfigError("unknown log level '" + std::string(s) + "'");
}

// Runs one command line (args excludes the program name). Returns the exit
// status; diagnostics go to ctx.err.
inline int Run(const std::vector<std::string>& args, Context& ctx,
               const EnvLookup& env = ProcessEnv) {
  CLI::App app{"Zero-shot embedding inversion", "zsinvert"};
  app.require_subcommand(1);

  std::map<std::string, std::string> raw;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> bound;
  std::string config_path, log_level = "warning";

  struct Command {
    const char* name;
    const char* help;
    std::function<int(const RunConfig&, Context&)> fn;
  };
  const std::vector<Command> commands = {
      {"invert", "invert every document of a corpus", cmd_invert},
      {"evaluate", "score inversion records against a corpus", cmd_evaluate},
      {"gen-data", "build the correction fine-tune dataset", cmd_gen_correction_data},
      {"noise-sweep", "invert under several noise levels", cmd_noise_sweep},
      {"judge", "ask a chat model whether each inversion leaks", cmd_judge},
  };
  std::vector<CLI::App*> subs;
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--log-level", log_level, "debug, info, warning, error or off");
    for (const auto& k : Keys()) {
      if (k.flag == nullptr) continue;
      CLI::Option* opt = k.kind == Kind::kBool ? sub->add_flag(k.flag, flags[k.key], k.help)
                                               : sub->add_option(k.flag, raw[k.key], k.help);
      if (std::string_view(k.key) == "limit") opt->group("");
      bound[std::string(cmd.name) + "/" + k.key] = opt;
    }
    subs.push_back(sub);
  }

  std::vector<const char*> argv{"zsinvert"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, ctx.out, ctx.err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    log::SetLevel(ParseLogLevel(log_level));
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      json layer = json::object();
      if (!config_path.empty()) layer["config"] = config_path;
      for (const auto& k : Keys()) {
        if (k.flag == nullptr) continue;
        CLI::Option* opt = bound[std::string(commands[i].name) + "/" + k.key];
        if (opt->count() == 0) continue;
        layer[k.key] = k.kind == Kind::kBool ? json(flags[k.key]) : Coerce(k, raw[k.key]);
      }
      const RunConfig cfg = ResolveConfig(layer, env);
      return commands[i].fn(cfg, ctx);
    }
  } catch (const ConfigError& e) {
    ctx.err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CapabilityError& e) {
    ctx.err << "endpoint unsuitable: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    ctx.err << "error: " << e.what() << "\n";
    return kExitPartial;
  }
  return kExitConfig;
}

}  // namespace zsinvert::cli
