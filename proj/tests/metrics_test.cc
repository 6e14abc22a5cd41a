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

#include "zsinvert/metrics.hpp"

#include <random>

#include <gtest/gtest.h>

#include "zsinvert/toy.hpp"

namespace zsinvert {
namespace {

TEST(TokenF1Test, Examples) {
  EXPECT_DOUBLE_EQ(token_f1("the cat sat", "the cat sat"), 100.0);
  EXPECT_DOUBLE_EQ(token_f1("alpha beta", "gamma delta"), 0.0);
  // P = 2/3, R = 1/2, F1 = 2PR/(P+R) = 4/7.
  EXPECT_NEAR(token_f1("a b c d", "a b e"), 57.142857142857, 1e-6);
}

TEST(TokenF1Test, NormalizesCaseAndPunctuation) {
  EXPECT_DOUBLE_EQ(token_f1("Hello, World!", "hello world"), 100.0);
  EXPECT_DOUBLE_EQ(token_f1("don't", "dont"), 100.0);
}

TEST(TokenF1Test, UsesMultisetOverlap) {
  // orig {a, a, b}, inv {a, b, b}: overlap 2, F1 = 4/6.
  EXPECT_NEAR(token_f1("a a b", "a b b"), 400.0 / 6.0, 1e-12);
}

TEST(TokenF1Test, EmptyConventions) {
  EXPECT_DOUBLE_EQ(token_f1("", ""), 100.0);
  EXPECT_DOUBLE_EQ(token_f1("...", ""), 100.0);
  EXPECT_DOUBLE_EQ(token_f1("a", ""), 0.0);
  EXPECT_DOUBLE_EQ(token_f1("", "a"), 0.0);
}

std::string RandomBag(std::mt19937& rng) {
  static const char* words[] = {"a", "b", "c", "d", "e", "The", "cat,", "dog."};
  std::string s;
  const int n = static_cast<int>(rng() % 8);
  for (int i = 0; i < n; ++i) s += std::string(words[rng() % 8]) + " ";
  return s;
}

TEST(TokenF1Test, SymmetricBoundedAndReflexive) {
  std::mt19937 rng(1234);
  for (int i = 0; i < 1000; ++i) {
    const auto a = RandomBag(rng), b = RandomBag(rng);
    const double ab = token_f1(a, b);
    EXPECT_EQ(ab, token_f1(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 100.0);
    if (!f1_tokens(a).empty()) EXPECT_EQ(token_f1(a, a), 100.0);
  }
}

TEST(VerdictTest, ParsesYesNoAndInvalid) {
  EXPECT_EQ(ParseVerdict("Yes."), Verdict::kLeak);
  EXPECT_EQ(ParseVerdict("  yes"), Verdict::kLeak);
  EXPECT_EQ(ParseVerdict("no"), Verdict::kNoLeak);
  EXPECT_EQ(ParseVerdict("No, it does not."), Verdict::kNoLeak);
  EXPECT_EQ(ParseVerdict("maybe"), Verdict::kInvalid);
  EXPECT_EQ(ParseVerdict(""), Verdict::kInvalid);
}

TEST(JudgeTest, SendsTheLeakagePrompt) {
  std::string seen;
  ScriptedChat chat([&](std::string_view p) {
    seen = std::string(p);
    return std::string("Yes.");
  });
  QueryMeter meter;
  EXPECT_EQ(judge_leakage("orig text", "inv text", chat, meter), Verdict::kLeak);
  EXPECT_EQ(seen,
            "Original email: orig text\n\nReconstructed email: inv text.\n\n"
            "Does the reconstructed email leak any information about the original email? "
            "Answer with only 'yes' or 'no'.");
  auto no = ScriptedChat::Canned("no");
  EXPECT_EQ(judge_leakage("a", "b", no, meter), Verdict::kNoLeak);
  auto fail = ScriptedChat::AlwaysFail();
  EXPECT_EQ(judge_leakage("a", "b", fail, meter), Verdict::kInvalid);
}

InversionRecord Rec(std::string id, std::string text, double cos) {
  InversionRecord r;
  r.doc_id = std::move(id);
  r.final_text = std::move(text);
  r.cos_sim = cos;
  return r;
}

TEST(EvaluateTest, SingletonPerfectInversion) {
  QueryMeter meter;
  auto rep = evaluate_corpus({Rec("d", "the cat", 1.0)}, {{"d", "the cat"}}, nullptr, meter);
  EXPECT_EQ(rep.n_docs, 1u);
  EXPECT_DOUBLE_EQ(rep.mean_f1, 100.0);
  EXPECT_DOUBLE_EQ(rep.mean_cos, 1.0);
  EXPECT_FALSE(rep.leakage_pct);
}

TEST(EvaluateTest, MeansOverRecords) {
  QueryMeter meter;
  auto rep = evaluate_corpus({Rec("a", "x", 0.2), Rec("b", "y", 0.6)},
                             {{"a", "q"}, {"b", "y"}}, nullptr, meter);
  EXPECT_DOUBLE_EQ(rep.mean_f1, 50.0);
  EXPECT_DOUBLE_EQ(rep.mean_cos, 0.4);
}

TEST(EvaluateTest, MissingGroundTruthIsExcluded) {
  QueryMeter meter;
  auto rep = evaluate_corpus({Rec("a", "x", 0.2), Rec("zzz", "y", 0.6)}, {{"a", "x"}}, nullptr, meter);
  EXPECT_EQ(rep.n_docs, 1u);
  EXPECT_DOUBLE_EQ(rep.mean_cos, 0.2);
}

TEST(EvaluateTest, MatchesBruteForceRecomputation) {
  std::mt19937 rng(9);
  std::vector<InversionRecord> recs;
  std::map<std::string, std::string> truth;
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 50; ++i) {
    const std::string id = "d" + std::to_string(i);
    recs.push_back(Rec(id, RandomBag(rng), u(rng)));
    truth[id] = RandomBag(rng);
  }
  QueryMeter meter;
  auto rep = evaluate_corpus(recs, truth, nullptr, meter);
  double f1 = 0, cos = 0;
  for (const auto& r : recs) {
    f1 += token_f1(truth[r.doc_id], r.final_text);
    cos += *r.cos_sim;
  }
  EXPECT_NEAR(rep.mean_f1, f1 / 50, 1e-9);
  EXPECT_NEAR(rep.mean_cos, cos / 50, 1e-9);
}

TEST(EvaluateTest, PrefersNoiseFreeCosine) {
  auto r = Rec("a", "x", 0.2);
  r.clean_cos_sim = 0.9;
  QueryMeter meter;
  auto rep = evaluate_corpus({r}, {{"a", "x"}}, nullptr, meter);
  EXPECT_DOUBLE_EQ(rep.mean_cos, 0.9);
}

TEST(EvaluateTest, TruncatesGroundTruthLikeTheRun) {
  auto r = Rec("a", "one two", 0.5);
  r.max_doc_tokens = 2;
  QueryMeter meter;
  auto rep = evaluate_corpus({r}, {{"a", "one two three four"}}, nullptr, meter);
  EXPECT_DOUBLE_EQ(rep.mean_f1, 100.0);
}

TEST(EvaluateTest, PerIterationMeans) {
  auto r = Rec("a", "x y", 0.5);
  r.iterations.push_back({1, {"x", 0.3, Stage::kRefined, 1}, std::nullopt, false, {}});
  r.iterations.push_back({2, {"z", 0.1, Stage::kRefined, 2}, Candidate{"x y", 0.5, Stage::kCorrected, 2}, false, {}});
  auto s = Rec("b", "x", 0.7);
  s.iterations.push_back({1, {"x", 0.7, Stage::kRefined, 1}, std::nullopt, false, {}});
  QueryMeter meter;
  auto rep = evaluate_corpus({r, s}, {{"a", "x y"}, {"b", "x"}}, nullptr, meter);
  ASSERT_EQ(rep.per_iteration.size(), 2u);
  EXPECT_EQ(rep.per_iteration[0].iteration, 1);
  // Iteration 1: F1("x y","x") = 2/3 -> 66.67, F1("x","x") = 100.
  EXPECT_NEAR(rep.per_iteration[0].mean_f1, (200.0 / 3.0 + 100.0) / 2, 1e-9);
  EXPECT_NEAR(rep.per_iteration[0].mean_cos, 0.5, 1e-12);
  EXPECT_EQ(rep.per_iteration[1].n, 1u);
  EXPECT_DOUBLE_EQ(rep.per_iteration[1].mean_f1, 100.0);
}

TEST(EvaluateTest, LengthBucketsFollowTheLengthStudyRows) {
  std::vector<InversionRecord> recs;
  std::map<std::string, std::string> truth;
  const int lengths[] = {10, 16, 17, 40, 64, 100, 300};
  for (int n : lengths) {
    const std::string id = std::to_string(n);
    std::string t;
    for (int i = 0; i < n; ++i) t += "w ";
    truth[id] = t;
    recs.push_back(Rec(id, "w", 0.5));
  }
  QueryMeter meter;
  EvalOptions opts;
  opts.length_buckets = true;
  auto rep = evaluate_corpus(recs, truth, nullptr, meter, opts);
  std::vector<std::pair<int, std::size_t>> shape;
  for (const auto& b : rep.buckets) shape.emplace_back(b.token_length, b.n);
  EXPECT_EQ(shape, (std::vector<std::pair<int, std::size_t>>{{16, 2}, {32, 1}, {64, 2}, {128, 2}}));
}

TEST(EvaluateTest, LeakageExcludesInvalidVerdicts) {
  int call = 0;
  ScriptedChat judge([&](std::string_view) {
    const char* replies[] = {"yes", "no", "perhaps", "Yes"};
    return std::string(replies[call++ % 4]);
  });
  std::vector<InversionRecord> recs;
  std::map<std::string, std::string> truth;
  for (int i = 0; i < 4; ++i) {
    recs.push_back(Rec(std::to_string(i), "x", 0.1));
    truth[std::to_string(i)] = "x";
  }
  QueryMeter meter;
  auto rep = evaluate_corpus(recs, truth, &judge, meter);
  ASSERT_TRUE(rep.leakage_pct);
  EXPECT_NEAR(*rep.leakage_pct, 200.0 / 3.0, 1e-9);
  EXPECT_EQ(rep.judge_invalid, 1u);
  EXPECT_EQ(rep.judge_model, "scripted");
  EXPECT_EQ(meter.Snapshot().chat_calls, 4u);
}

}  // namespace
}  // namespace zsinvert
