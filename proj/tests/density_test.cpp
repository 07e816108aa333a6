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

#include "prfl/density.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "prfl/error.hpp"

namespace prfl {
namespace {

Mask Bits(std::vector<std::uint8_t> b) { return Mask(std::move(b)); }

ParamVector Flat(std::vector<double> v) {
  const std::size_t n = v.size();
  return ParamVector({{n}}, std::move(v));
}

// Stable sort of indices by |w| descending; the first `keep` are kept.
Mask SortOracle(const ParamVector& w, std::size_t keep) {
  std::vector<std::size_t> idx(w.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(w[a]) > std::abs(w[b]);
  });
  Mask m(w.size(), false);
  for (std::size_t k = 0; k < keep; ++k) m.Set(idx[k], true);
  return m;
}

TEST(TimeQueue, MeanExamples) {
  TimeQueue q(5);
  q.Push(10);
  EXPECT_EQ(*MeanRoundTime(q), 10.0);
  q.Push(20);
  q.Push(30);
  EXPECT_EQ(*MeanRoundTime(q), 20.0);

  TimeQueue fifo(3);
  for (double t : {5.0, 10.0, 15.0, 20.0}) fifo.Push(t);
  EXPECT_EQ(fifo.size(), 3u);
  EXPECT_EQ(*MeanRoundTime(fifo), 15.0);
}

TEST(TimeQueue, EmptyHasNoMeanAndRejectsBadTimes) {
  TimeQueue q(2);
  EXPECT_FALSE(MeanRoundTime(q).has_value());
  EXPECT_THROW(q.Push(0.0), ContractViolation);
  EXPECT_THROW(q.Push(-1.0), ContractViolation);
  EXPECT_THROW(q.Push(NAN), ContractViolation);
}

TEST(ComputeDensity, RatioToFastest) {
  const std::map<ClientId, double> means = {{1, 10}, {2, 20}, {3, 40}};
  DensityState s;
  s.rho_min = 0.1;
  EXPECT_EQ(ComputeDensity(means, 1, s), 1.0);
  EXPECT_EQ(ComputeDensity(means, 2, s), 0.5);
  EXPECT_EQ(ComputeDensity(means, 3, s), 0.25);
}

TEST(ComputeDensity, FloorAndEqualMeans) {
  DensityState s;
  s.rho_min = 0.3;
  EXPECT_EQ(ComputeDensity({{1, 10}, {2, 200}}, 2, s), 0.3);
  const std::map<ClientId, double> same = {{0, 7}, {1, 7}, {2, 7}};
  for (ClientId i = 0; i < 3; ++i) EXPECT_EQ(ComputeDensity(same, i, s), 1.0);
}

TEST(ComputeDensity, Errors) {
  DensityState s;
  EXPECT_THROW(ComputeDensity({{1, 10}, {2, 0}}, 1, s), ContractViolation);
  EXPECT_THROW(ComputeDensity({{1, 10}}, 2, s), ContractViolation);
  EXPECT_THROW(ComputeDensity({}, 2, s), ContractViolation);
}

TEST(ComputeDensity, FloorAndFastestInvariants) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> t(1.0, 100.0), f(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<ClientId, double> means;
    for (ClientId i = 0; i < 6; ++i) means[i] = t(rng);
    const auto fastest = std::min_element(means.begin(), means.end(), [](auto& a, auto& b) {
                           return a.second < b.second;
                         })->first;
    for (ClientId i = 0; i < 6; ++i) {
      DensityState s;
      s.rho_min = f(rng);
      const double rho = ComputeDensity(means, i, s);
      EXPECT_GE(rho, s.rho_min);
      EXPECT_LE(rho, 1.0);
      if (i == fastest) {
        EXPECT_EQ(rho, 1.0);
      }
    }
  }
}

TEST(PruneToDensity, Examples) {
  const auto w = Flat({0.1, -0.5, 0.3, 0.05});
  EXPECT_EQ(PruneToDensity(w, 1.0), Mask(4, true));
  EXPECT_EQ(PruneToDensity(w, 0.5), Bits({0, 1, 1, 0}));
  // Ties on |w|: the lower index is kept first.
  EXPECT_EQ(PruneToDensity(Flat({0.2, -0.2, 0.2, 0.2}), 0.5), Bits({1, 1, 0, 0}));
}

TEST(PruneToDensity, MatchesStableSortOracle) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> small(-4, 4);  // many ties
  std::uniform_real_distribution<double> rho(0.01, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v(1 + trial % 40);
    for (auto& x : v) x = small(rng) * 0.25;
    const auto w = Flat(v);
    const double r = rho(rng);
    const Mask m = PruneToDensity(w, r);
    const std::size_t keep = static_cast<std::size_t>(std::ceil(r * v.size() - 1e-9 * r * v.size()));
    EXPECT_EQ(m.Count(), std::max<std::size_t>(1, keep));
    EXPECT_EQ(m, SortOracle(w, m.Count()));
    double kept_min = INFINITY, dropped_max = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (m[k]) {
        kept_min = std::min(kept_min, std::abs(v[k]));
      } else {
        dropped_max = std::max(dropped_max, std::abs(v[k]));
      }
    }
    EXPECT_GE(kept_min, dropped_max);
  }
}

TEST(PruneToDensity, CardinalityIsCeilOfDensity) {
  const auto w = Flat(std::vector<double>(10, 1.0));
  EXPECT_EQ(PruneToDensity(w, 0.3).Count(), 3u);
  EXPECT_EQ(PruneToDensity(w, 0.31).Count(), 4u);
  EXPECT_EQ(PruneToDensity(w, 0.01).Count(), 1u);
  EXPECT_EQ(KeptCount(0.7, 10), 7u);
  EXPECT_EQ(KeptCount(0.33, 10000), 3300u);
}

TEST(PruneToDensity, NestedAcrossDensities) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::vector<double> v(64);
  for (auto& x : v) x = g(rng);
  const auto w = Flat(v);
  EXPECT_TRUE(PruneToDensity(w, 0.2).IsSubsetOf(PruneToDensity(w, 0.5)));
  EXPECT_TRUE(PruneToDensity(w, 0.5).IsSubsetOf(PruneToDensity(w, 0.9)));
}

TEST(PruneToDensity, LayerwiseKeepsPerTensorShare) {
  ParamVector w({{2, 2}, {4}}, {1, 2, 3, 4, 0.1, 0.2, 0.3, 0.4});
  const Mask global = PruneToDensity(w, 0.5, PruningPolicy::kGlobalMagnitude);
  EXPECT_EQ(global, Bits({1, 1, 1, 1, 0, 0, 0, 0}));
  const Mask layer = PruneToDensity(w, 0.5, PruningPolicy::kLayerwiseMagnitude);
  EXPECT_EQ(layer, Bits({0, 0, 1, 1, 0, 0, 1, 1}));
}

TEST(EarlyStopper, NeverTriggersWhileImproving) {
  EarlyStopper s;
  s.patience = 3;
  for (double acc : {0.5, 0.6, 0.7}) {
    auto [next, fired] = ObserveAccuracy(s, acc);
    EXPECT_FALSE(fired);
    s = next;
  }
}

TEST(EarlyStopper, TriggersOnFourthFlatObservation) {
  EarlyStopper s;
  s.patience = 3;
  s.min_delta = 0.0;
  std::vector<bool> fired;
  for (int k = 0; k < 4; ++k) {
    auto [next, f] = ObserveAccuracy(s, 0.7);
    fired.push_back(f);
    s = next;
  }
  EXPECT_EQ(fired, (std::vector<bool>{false, false, false, true}));
  EXPECT_EQ(s.stall_count, 0u);  // reset so it can fire again
}

TEST(EarlyStopper, PatienceOne) {
  EarlyStopper s;
  s.patience = 1;
  auto [a, f1] = ObserveAccuracy(s, 0.5);
  auto [b, f2] = ObserveAccuracy(a, 0.4);
  EXPECT_FALSE(f1);
  EXPECT_TRUE(f2);
}

TEST(RecoverDensity, Examples) {
  DensityState s;
  s.rho = 0.4;
  s.rho_min = 0.1;
  s.delta_rho = 0.2;
  auto r = RecoverDensity(s);
  EXPECT_DOUBLE_EQ(r.rho_min, 0.6);
  EXPECT_DOUBLE_EQ(r.rho, 0.6);

  s.rho = 0.95;
  EXPECT_EQ(RecoverDensity(s).rho_min, 1.0);

  s.rho = 1.0;
  s.rho_min = 0.3;
  r = RecoverDensity(s);
  EXPECT_EQ(r.rho_min, 0.3);
  EXPECT_EQ(r.rho, 1.0);
}

TEST(RecoverDensity, FourStepsFromPointTwo) {
  DensityState s;
  s.rho = 0.2;
  s.rho_min = 0.2;
  s.delta_rho = 0.2;
  int events = 0;
  double last_floor = s.rho_min;
  while (s.rho < 1.0) {
    s = RecoverDensity(s);
    ++events;
    EXPECT_GE(s.rho_min, last_floor);
    last_floor = s.rho_min;
    ASSERT_LE(events, 10);
  }
  EXPECT_EQ(events, 4);
  EXPECT_EQ(s.rho_min, 1.0);
}

TEST(ShouldTerminate, Examples) {
  EXPECT_TRUE(ShouldTerminate({{0, 1.0}, {1, 1.0}}, true));
  EXPECT_FALSE(ShouldTerminate({{0, 1.0}, {1, 0.8}}, true));
  EXPECT_FALSE(ShouldTerminate({{0, 1.0}, {1, 1.0}}, false));
}

}  // namespace
}  // namespace prfl
