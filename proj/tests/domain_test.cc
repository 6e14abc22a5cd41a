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

#include "zsinvert/domain.hpp"

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "zsinvert/decoder.hpp"

namespace zsinvert {
namespace {

TEST(EmbeddingTest, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(Embedding(std::vector<double>{}), DomainError);
  EXPECT_THROW(Embedding({1.0, std::numeric_limits<double>::quiet_NaN()}), DomainError);
  EXPECT_THROW(Embedding({std::numeric_limits<double>::infinity()}), DomainError);
  Embedding e({1.0, 2.0}, "m");
  EXPECT_EQ(e.dim(), 2u);
  EXPECT_EQ(e.model_id(), "m");
}

TEST(EmbeddingTest, EqualityIsComponentWise) {
  EXPECT_EQ(Embedding({1.0, 2.0}, "a"), Embedding({1.0, 2.0}, "b"));
  EXPECT_NE(Embedding({1.0, 2.0}), Embedding({1.0, 2.5}));
}

TEST(EmbeddingTest, SelfCosineIsOne) {
  Embedding e({0.3, -1.7, 2.2, 1e-3});
  EXPECT_NEAR(cosine_similarity(e, e), 1.0, 1e-9);
}

TEST(ParamsTest, Defaults) {
  DecodeParams d;
  EXPECT_EQ(d.beam_width, 30);
  EXPECT_EQ(d.top_k, 30);
  EXPECT_EQ(d.max_length, 32);
  PipelineParams p;
  EXPECT_EQ(p.n_iter, 9);
}

TEST(ParamsTest, ValidateRejectsNonPositive) {
  DecodeParams d;
  d.beam_width = 0;
  EXPECT_THROW(d.Validate(), ConfigError);
  d = {};
  d.top_k = 0;
  EXPECT_THROW(d.Validate(), ConfigError);
  d = {};
  d.max_length = 0;
  EXPECT_THROW(d.Validate(), ConfigError);
  PipelineParams p;
  p.n_iter = 0;
  EXPECT_THROW(p.Validate(), ConfigError);
}

TEST(StageTest, NamesRoundTrip) {
  for (Stage s : {Stage::kSeed, Stage::kRefined, Stage::kCorrected}) {
    EXPECT_EQ(ParseStage(StageName(s)), s);
  }
  EXPECT_THROW(ParseStage("final"), ConfigError);
}

TEST(QueryMeterTest, SnapshotsAndDifferences) {
  QueryMeter m;
  m.AddEncoder(5, 2);
  m.AddLm(3);
  m.AddChat();
  auto before = m.Snapshot();
  EXPECT_EQ(before, (QueryLedger{5, 2, 3, 1}));
  m.AddEncoder(1, 1);
  auto delta = m.Snapshot() - before;
  EXPECT_EQ(delta, (QueryLedger{1, 1, 0, 0}));
  EXPECT_GE(m.Snapshot().encoder_texts, m.Snapshot().encoder_calls);
}

}  // namespace
}  // namespace zsinvert
