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

#include "zsinvert/backends.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "support/fakes.hpp"
#include "support/oracles.hpp"
#include "zsinvert/toy.hpp"

namespace zsinvert {
namespace {

using testing::CountingEncoder;
using testing::FunctionEncoder;
using testing::NaiveCosine;

TEST(ToyEmbedderTest, SingleTrigramForTwoCharText) {
  // " ab" is the only padded trigram of "ab"; its bucket was worked out by
  // hand: key 0x206162 times the golden-ratio constant, high word mod 256.
  ToyEmbedder enc(256);
  const auto v = enc.Embed("ab");
  ASSERT_EQ(v.size(), 256u);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_DOUBLE_EQ(v[i], i == 141 ? 1.0 : 0.0) << "index " << i;
  }
}

TEST(ToyEmbedderTest, IdenticalTextsGiveIdenticalVectors) {
  ToyEmbedder enc;
  QueryMeter meter;
  std::vector<std::string> texts{"x", "x"};
  auto out = embed_batch(enc, texts, meter);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], out[1]);
}

TEST(ToyEmbedderTest, SharedPrefixTrigramGivesPartialSimilarity) {
  // "abc" -> {" ab", "abc"} in buckets {141, 175}; "abd" -> {" ab", "abd"}
  // in buckets {141, 105}. One shared unit entry of two: cosine 1/2.
  ToyEmbedder enc;
  QueryMeter meter;
  std::vector<std::string> texts{"abc", "abd"};
  auto out = embed_batch(enc, texts, meter);
  const double c = NaiveCosine(out[0].values(), out[1].values());
  EXPECT_GT(c, 0.0);
  EXPECT_LT(c, 1.0);
  EXPECT_NEAR(c, 0.5, 1e-12);
}

TEST(ToyEmbedderTest, OutputIsUnitNorm) {
  ToyEmbedder enc(64, 7);
  for (const char* s : {"a", "hello world", "the cat sat on the mat"}) {
    auto v = enc.Embed(s);
    double n = 0;
    for (double x : v) n += x * x;
    EXPECT_NEAR(n, 1.0, 1e-12) << s;
  }
}

TEST(EmbedBatchTest, CountsTextsAndCalls) {
  ToyEmbedder enc(32, 0, /*batch_limit=*/2);
  QueryMeter meter;
  std::vector<std::string> texts{"a", "b", "c", "d", "e"};
  auto out = embed_batch(enc, texts, meter);
  EXPECT_EQ(out.size(), 5u);
  EXPECT_EQ(meter.Snapshot().encoder_texts, 5u);
  EXPECT_EQ(meter.Snapshot().encoder_calls, 3u);
}

TEST(EmbedBatchTest, PreservesOrderAcrossBatches) {
  ToyEmbedder enc(64, 3, /*batch_limit=*/3);
  std::mt19937 rng(11);
  const std::string alphabet = "abcdefgh ";
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> texts;
    const int n = 1 + static_cast<int>(rng() % 9);
    for (int i = 0; i < n; ++i) {
      std::string s(1 + rng() % 6, 'a');
      for (char& c : s) c = alphabet[rng() % (alphabet.size() - 1)];
      texts.push_back(s);
    }
    QueryMeter m1, m2;
    auto batched = embed_batch(enc, texts, m1);
    auto parallel = embed_batch(enc, texts, m2, /*max_in_flight=*/3);
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> one{texts[i]};
      QueryMeter m;
      EXPECT_EQ(batched[i], embed_batch(enc, one, m)[0]);
      EXPECT_EQ(parallel[i], batched[i]);
    }
  }
}

TEST(EmbedBatchTest, RejectsEmptyInputAndBlankTexts) {
  ToyEmbedder enc;
  QueryMeter meter;
  std::vector<std::string> none;
  EXPECT_THROW(embed_batch(enc, none, meter), DomainError);
  std::vector<std::string> blank{"ok", "   "};
  EXPECT_THROW(embed_batch(enc, blank, meter), DomainError);
  EXPECT_EQ(meter.Snapshot().encoder_calls, 0u);
}

TEST(EmbedBatchTest, FailureCarriesBatchIndex) {
  ToyEmbedder inner(16, 0, 2);
  CountingEncoder enc(inner);
  enc.fail_from_request = 1;
  QueryMeter meter;
  std::vector<std::string> texts{"a", "b", "c", "d"};
  try {
    embed_batch(enc, texts, meter);
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    ASSERT_TRUE(e.batch_index().has_value());
    EXPECT_EQ(*e.batch_index(), 1u);
  }
}

TEST(EmbedBatchTest, DimensionChangeIsConfigError) {
  int calls = 0;
  FunctionEncoder enc([&](const std::string&) {
    return std::vector<double>(++calls == 1 ? 3 : 4, 1.0);
  });
  QueryMeter meter;
  std::vector<std::string> one{"a"};
  embed_batch(enc, one, meter);
  EXPECT_EQ(enc.dim(), 3u);
  EXPECT_THROW(embed_batch(enc, one, meter), ConfigError);
}

ToyLM TwoWordLM() {
  // Row "a": a->a once, a->b nine times.
  return ToyLM({"a", "b"}, {{1, 9}, {0, 0}});
}

TEST(ToyLMTest, LaplaceSmoothedTopK) {
  ToyLM lm = TwoWordLM();
  QueryMeter meter;
  auto p = topk_next_tokens(lm, "x a", "", 2, meter);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].token, "b");
  EXPECT_NEAR(p[0].logprob, std::log(10.0 / 12.0), 1e-12);
  EXPECT_EQ(p[1].token, "a");
  EXPECT_NEAR(p[1].logprob, std::log(2.0 / 12.0), 1e-12);
  EXPECT_EQ(meter.Snapshot().lm_calls, 1u);
}

TEST(ToyLMTest, ContinuationPiecesCarryLeadingSpace) {
  ToyLM lm = TwoWordLM();
  QueryMeter meter;
  auto p = topk_next_tokens(lm, "ignored", "a", 1, meter);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].token, " b");
}

TEST(ToyLMTest, KEqualToVocabCoversVocabulary) {
  auto lm = ToyLM::FromCorpus({"the cat sat", "a dog ran far"});
  QueryMeter meter;
  auto p = topk_next_tokens(lm, "", "", static_cast<int>(lm.vocab().size()), meter);
  ASSERT_EQ(p.size(), lm.vocab().size());
  std::set<std::string> seen;
  for (const auto& t : p) seen.insert(t.token);
  EXPECT_EQ(seen, std::set<std::string>(lm.vocab().begin(), lm.vocab().end()));
}

TEST(ToyLMTest, KOneIsArgmax) {
  auto lm = ToyLM::FromCorpus({"a b", "a b", "a c"});
  QueryMeter meter;
  auto p = topk_next_tokens(lm, "", "a", 1, meter);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].token, " b");
}

TEST(ToyLMTest, ProposalMassSumsToAtMostOne) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t v = 1 + rng() % 7;
    std::vector<std::string> vocab;
    for (std::size_t i = 0; i < v; ++i) vocab.push_back("w" + std::to_string(i));
    std::vector<std::vector<std::uint64_t>> counts(v, std::vector<std::uint64_t>(v));
    for (auto& row : counts) {
      for (auto& c : row) c = rng() % 20;
    }
    ToyLM lm(vocab, counts, {}, 0.5 + (rng() % 4));
    for (std::size_t ctx = 0; ctx <= v; ++ctx) {
      const std::string generated = ctx < v ? vocab[ctx] : "";
      QueryMeter meter;
      auto full = topk_next_tokens(lm, "p", generated, static_cast<int>(v), meter);
      double total = 0;
      for (const auto& t : full) total += std::exp(t.logprob);
      EXPECT_NEAR(total, 1.0, 1e-9);
      const int k = 1 + static_cast<int>(rng() % v);
      auto part = topk_next_tokens(lm, "p", generated, k, meter);
      double partial = 0;
      for (std::size_t i = 0; i < part.size(); ++i) {
        partial += std::exp(part[i].logprob);
        if (i) EXPECT_GE(part[i - 1].logprob, part[i].logprob);
      }
      EXPECT_LE(partial, 1.0 + 1e-9);
      EXPECT_LE(part.size(), static_cast<std::size_t>(k));
    }
  }
}

TEST(ToyLMTest, RejectsMalformedCounts) {
  EXPECT_THROW(ToyLM({"a", "b"}, {{1, 2}}), ConfigError);
  EXPECT_THROW(ToyLM({}, {}), ConfigError);
  EXPECT_THROW(ToyLM({"a"}, {{1}}, {}, 0.0), ConfigError);
  EXPECT_THROW(ToyLM({"a", "a"}, {{1, 1}, {1, 1}}), ConfigError);
}

TEST(TopKTest, RejectsNonPositiveK) {
  ToyLM lm = TwoWordLM();
  QueryMeter meter;
  EXPECT_THROW(topk_next_tokens(lm, "a", "", 0, meter), DomainError);
}

TEST(ChatTest, ScriptedDoubles) {
  QueryMeter meter;
  auto yes = ScriptedChat::Canned("yes");
  EXPECT_EQ(chat_complete(yes, "anything", meter), "yes");
  auto echo = ScriptedChat::EchoLastLine();
  EXPECT_EQ(chat_complete(echo, "first\nsecond\nlast line", meter), "last line");
  EXPECT_EQ(meter.Snapshot().chat_calls, 2u);
  EXPECT_THROW(chat_complete(yes, "", meter), DomainError);
  auto fail = ScriptedChat::AlwaysFail();
  EXPECT_THROW(chat_complete(fail, "x", meter), BackendError);
}

}  // namespace
}  // namespace zsinvert
