// Copyright 2026 The prfl Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "prfl/data.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prfl/error.hpp"

namespace prfl {
namespace {

std::vector<double> ClassShares(const Dataset& d) {
  std::vector<double> share(d.num_classes, 0.0);
  for (int y : d.labels) share[y] += 1.0;
  for (auto& s : share) s /= static_cast<double>(d.size());
  return share;
}

TEST(GenerateDataset, DeterministicAndValid) {
  const auto a = GenerateDataset(4, 8, 500, 3);
  const auto b = GenerateDataset(4, 8, 500, 3);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NO_THROW(a.Validate());
  EXPECT_EQ(a.size(), 500u);
  EXPECT_NE(GenerateDataset(4, 8, 500, 4).features, a.features);
}

TEST(GenerateDataset, CoversAllClasses) {
  for (int classes : {2, 4, 7}) {
    const auto d = GenerateDataset(classes, 5, 10 * classes, 11);
    for (double s : ClassShares(d)) EXPECT_GT(s, 0.0);
  }
}

TEST(GenerateDataset, WellSeparatedTwoClassIsLearnable) {
  const ClusterSpec wide{8.0, 1, 1.0};
  // Centers depend on the seed, so train and test come from one draw.
  Dataset all = GenerateDataset(2, 4, 1000, 5, wide);
  std::vector<std::size_t> tr(600), te(400);
  std::iota(tr.begin(), tr.end(), std::size_t{0});
  std::iota(te.begin(), te.end(), std::size_t{600});
  const auto shapes = MlpShapes(4, {16}, 2);
  auto w = InitModel(shapes, 1);
  TrainSpec spec{{0.1}, 20, 300};
  w = LocalTrain(w, Mask(w.size(), true), all.Subset(tr), spec, 0, 1);
  EXPECT_GT(TestAccuracy(w, all.Subset(te)), 0.95);
}

TEST(GenerateDataset, DefaultIsNotLinearlySeparable) {
  // A linear softmax model trained to convergence stays clearly below the
  // MLP on the default cluster layout.
  Dataset all = GenerateDataset(4, 8, 3000, 7);
  std::vector<std::size_t> tr(2000), te(1000);
  std::iota(tr.begin(), tr.end(), std::size_t{0});
  std::iota(te.begin(), te.end(), std::size_t{2000});
  TrainSpec spec{{0.1}, 50, 3000};
  auto lin = InitModel(MlpShapes(8, {}, 4), 1);
  lin = LocalTrain(lin, Mask(lin.size(), true), all.Subset(tr), spec, 0, 1);
  auto mlp = InitModel(MlpShapes(8, {32}, 4), 1);
  mlp = LocalTrain(mlp, Mask(mlp.size(), true), all.Subset(tr), spec, 0, 1);
  EXPECT_LT(TestAccuracy(lin, all.Subset(te)), TestAccuracy(mlp, all.Subset(te)) - 0.03);
}

TEST(Partition, DisjointCover) {
  const auto d = GenerateDataset(4, 3, 1003, 2);
  for (auto mode : {PartitionMode::kIid, PartitionMode::kLabelSkew}) {
    const auto parts = PartitionIndices(d, 7, {mode, 0.3, 5});
    ASSERT_EQ(parts.size(), 7u);
    std::vector<std::size_t> all;
    for (const auto& p : parts) {
      EXPECT_GE(p.size(), 143u);
      EXPECT_LE(p.size(), 144u);
      all.insert(all.end(), p.begin(), p.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(d.size());
    std::iota(expect.begin(), expect.end(), std::size_t{0});
    EXPECT_EQ(all, expect);
  }
}

TEST(Partition, IidMatchesGlobalFrequencies) {
  const auto d = GenerateDataset(4, 3, 2000, 9);
  const auto global = ClassShares(d);
  for (const auto& part : Partition(d, 2, {PartitionMode::kIid, 0.5, 1})) {
    const auto s = ClassShares(part);
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(s[c], global[c], 0.05);
  }
}

TEST(Partition, TinyAlphaConcentratesLabels) {
  const auto d = GenerateDataset(4, 3, 2000, 9);
  for (const auto& part : Partition(d, 4, {PartitionMode::kLabelSkew, 0.001, 3})) {
    const auto s = ClassShares(part);
    EXPECT_GT(*std::max_element(s.begin(), s.end()), 0.8);
  }
}

TEST(Partition, HugeAlphaApproachesIid) {
  const auto d = GenerateDataset(4, 3, 4000, 9);
  const auto global = ClassShares(d);
  for (const auto& part : Partition(d, 4, {PartitionMode::kLabelSkew, 1e4, 3})) {
    const auto s = ClassShares(part);
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(s[c], global[c], 0.05);
  }
}

TEST(Partition, Errors) {
  const auto d = GenerateDataset(2, 2, 5, 1);
  EXPECT_THROW(Partition(d, 6, {}), ConfigError);
  EXPECT_THROW(ParsePartitionMode("dirichlet"), ConfigError);
  EXPECT_EQ(ParsePartitionMode(PartitionModeName(PartitionMode::kLabelSkew)),
            PartitionMode::kLabelSkew);
}

}  // namespace
}  // namespace prfl
