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

// On-disk formats: corpus, records and correction-data JSONL, the
// evaluation report JSON and its per-iteration CSV.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zsinvert/correction.hpp"
#include "zsinvert/domain.hpp"
#include "zsinvert/errors.hpp"
#include "zsinvert/metrics.hpp"

namespace zsinvert {

using nlohmann::json;

inline void to_json(json& j, const QueryLedger& l) {
  j = {{"encoder_texts", l.encoder_texts},
       {"encoder_calls", l.encoder_calls},
       {"lm_calls", l.lm_calls},
       {"chat_calls", l.chat_calls}};
}
inline void from_json(const json& j, QueryLedger& l) {
  j.at("encoder_texts").get_to(l.encoder_texts);
  j.at("encoder_calls").get_to(l.encoder_calls);
  j.at("lm_calls").get_to(l.lm_calls);
  j.at("chat_calls").get_to(l.chat_calls);
}

inline void to_json(json& j, const Candidate& c) {
  j = {{"text", c.text}, {"stage", StageName(c.stage)}, {"iteration", c.iteration}};
  if (c.score) j["score"] = *c.score;
}
inline void from_json(const json& j, Candidate& c) {
  j.at("text").get_to(c.text);
  c.stage = ParseStage(j.at("stage").get<std::string>());
  j.at("iteration").get_to(c.iteration);
  c.score.reset();
  if (j.contains("score")) c.score = j["score"].get<double>();
}

inline void to_json(json& j, const IterationTrace& t) {
  j = {{"iteration", t.iteration},
       {"refined", t.refined},
       {"correction_fell_back", t.correction_fell_back},
       {"cumulative", t.cumulative}};
  if (t.corrected) j["corrected"] = *t.corrected;
}
inline void from_json(const json& j, IterationTrace& t) {
  j.at("iteration").get_to(t.iteration);
  j.at("refined").get_to(t.refined);
  j.at("correction_fell_back").get_to(t.correction_fell_back);
  j.at("cumulative").get_to(t.cumulative);
  t.corrected.reset();
  if (j.contains("corrected")) t.corrected = j["corrected"].get<Candidate>();
}

namespace detail {
template <typename T>
void PutOpt(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}
template <typename T>
void GetOpt(const json& j, const char* key, std::optional<T>& v) {
  v.reset();
  if (j.contains(key) && !j[key].is_null()) v = j[key].get<T>();
}
}  // namespace detail

inline void to_json(json& j, const InversionRecord& r) {
  j = {{"doc_id", r.doc_id},
       {"target_dim", r.target_dim},
       {"candidates", r.candidates},
       {"iterations", r.iterations},
       {"final_text", r.final_text},
       {"ledger", r.ledger},
       {"wall_time_s", r.wall_time_s},
       {"encoder_model", r.encoder_model}};
  detail::PutOpt(j, "seed", r.seed);
  detail::PutOpt(j, "cos_sim", r.cos_sim);
  detail::PutOpt(j, "clean_cos_sim", r.clean_cos_sim);
  detail::PutOpt(j, "f1", r.f1);
  detail::PutOpt(j, "leaked", r.leaked);
  if (r.noise) j["noise"] = {{"sigma", r.noise->sigma}, {"seed", r.noise->rng_seed}};
  detail::PutOpt(j, "max_doc_tokens", r.max_doc_tokens);
  detail::PutOpt(j, "error", r.error);
}
inline void from_json(const json& j, InversionRecord& r) {
  j.at("doc_id").get_to(r.doc_id);
  j.at("target_dim").get_to(r.target_dim);
  j.at("candidates").get_to(r.candidates);
  j.at("iterations").get_to(r.iterations);
  j.at("final_text").get_to(r.final_text);
  j.at("ledger").get_to(r.ledger);
  j.at("wall_time_s").get_to(r.wall_time_s);
  j.at("encoder_model").get_to(r.encoder_model);
  detail::GetOpt(j, "seed", r.seed);
  detail::GetOpt(j, "cos_sim", r.cos_sim);
  detail::GetOpt(j, "clean_cos_sim", r.clean_cos_sim);
  detail::GetOpt(j, "f1", r.f1);
  detail::GetOpt(j, "leaked", r.leaked);
  r.noise.reset();
  if (j.contains("noise")) {
    r.noise = NoiseSpec{j["noise"].at("sigma").get<double>(),
                        j["noise"].at("seed").get<std::uint64_t>()};
  }
  detail::GetOpt(j, "max_doc_tokens", r.max_doc_tokens);
  detail::GetOpt(j, "error", r.error);
}

inline void to_json(json& j, const CorrectionExample& ex) {
  j = {{"doc_id", ex.doc_id},
       {"target", ex.target},
       {"inversions", ex.inversions},
       {"cosines", ex.cosines}};
}
inline void from_json(const json& j, CorrectionExample& ex) {
  j.at("doc_id").get_to(ex.doc_id);
  j.at("target").get_to(ex.target);
  j.at("inversions").get_to(ex.inversions);
  j.at("cosines").get_to(ex.cosines);
  if (ex.inversions.size() != ex.cosines.size()) {
    throw DomainError("inversions and cosines differ in length");
  }
}

// Field order is fixed because the fine-tune reads these rows too.
inline std::string SerializeExample(const CorrectionExample& ex) {
  nlohmann::ordered_json j;
  j["doc_id"] = ex.doc_id;
  j["target"] = ex.target;
  j["inversions"] = ex.inversions;
  j["cosines"] = ex.cosines;
  return j.dump();
}

inline std::string SerializeRecord(const InversionRecord& r) { return json(r).dump(); }
inline InversionRecord ParseRecord(std::string_view line) {
  return json::parse(line).get<InversionRecord>();
}

// Calls fn(object, line_number) for every non-blank line. Any parse or
// schema problem becomes a ConfigError naming the file and line.
inline void ForEachJsonLine(const std::filesystem::path& path,
                            const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (text::TrimView(line).empty()) continue;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw DomainError("expected a JSON object");
      fn(j, no);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(no) + ": " + e.what());
    } catch (const DomainError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(no) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(no) + ": " + e.what());
    }
  }
}

// {"doc_id": str, "text": str, "embedding"?: [float]}. A row with an
// embedding may omit the text.
inline std::vector<CorpusDoc> ReadCorpus(const std::filesystem::path& path) {
  std::vector<CorpusDoc> docs;
  std::set<std::string> seen;
  ForEachJsonLine(path, [&](const json& j, std::size_t) {
    CorpusDoc d;
    j.at("doc_id").get_to(d.doc_id);
    if (d.doc_id.empty()) throw DomainError("empty doc_id");
    if (!seen.insert(d.doc_id).second) throw DomainError("duplicate doc_id '" + d.doc_id + "'");
    if (j.contains("embedding") && !j["embedding"].is_null()) {
      d.embedding = j["embedding"].get<std::vector<double>>();
      Embedding check(*d.embedding);  // rejects empty or non-finite vectors
      if (j.contains("text")) j["text"].get_to(d.text);
    } else {
      j.at("text").get_to(d.text);
      if (text::TrimView(d.text).empty()) throw DomainError("row has neither text nor embedding");
    }
    docs.push_back(std::move(d));
  });
  return docs;
}

inline std::vector<InversionRecord> ReadRecords(const std::filesystem::path& path) {
  std::vector<InversionRecord> out;
  ForEachJsonLine(path, [&](const json& j, std::size_t) { out.push_back(j.get<InversionRecord>()); });
  return out;
}

inline void WriteRecords(const std::filesystem::path& path,
                         const std::vector<InversionRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& r : records) out << SerializeRecord(r) << '\n';
}

inline std::vector<CorrectionExample> ReadDataset(const std::filesystem::path& path) {
  std::vector<CorrectionExample> out;
  ForEachJsonLine(path, [&](const json& j, std::size_t) { out.push_back(j.get<CorrectionExample>()); });
  return out;
}

inline void WriteDataset(const std::filesystem::path& path,
                         const std::vector<CorrectionExample>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& r : rows) out << SerializeExample(r) << '\n';
}

inline json ReportToJson(const EvalReport& r) {
  json j = {{"n_docs", r.n_docs},
            {"mean_f1", r.mean_f1},
            {"mean_cos", r.mean_cos},
            {"judge_invalid", r.judge_invalid}};
  j["leakage_pct"] = r.leakage_pct ? json(*r.leakage_pct) : json(nullptr);
  if (!r.judge_model.empty()) j["judge_model"] = r.judge_model;
  j["per_iteration"] = json::array();
  for (const auto& row : r.per_iteration) {
    j["per_iteration"].push_back(
        {{"iteration", row.iteration}, {"mean_f1", row.mean_f1}, {"mean_cos", row.mean_cos},
         {"n", row.n}});
  }
  j["buckets"] = json::array();
  for (const auto& row : r.buckets) {
    j["buckets"].push_back({{"token_length", row.token_length}, {"mean_f1", row.mean_f1},
                            {"mean_cos", row.mean_cos}, {"n", row.n}});
  }
  j["docs"] = json::array();
  for (const auto& d : r.docs) {
    json dj = {{"doc_id", d.doc_id}, {"f1", d.f1}};
    dj["cos"] = d.cos ? json(*d.cos) : json(nullptr);
    if (d.leaked) dj["leaked"] = *d.leaked;
    j["docs"].push_back(std::move(dj));
  }
  return j;
}

// iteration,mean_f1,mean_cos
inline std::string IterationCsv(const EvalReport& r) {
  std::ostringstream os;
  os << "iteration,mean_f1,mean_cos\n" << std::setprecision(10);
  for (const auto& row : r.per_iteration) {
    os << row.iteration << ',' << row.mean_f1 << ',' << row.mean_cos << '\n';
  }
  return os.str();
}

}  // namespace zsinvert
