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

#include "prfl/model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "prfl/error.hpp"

namespace prfl {
namespace {

// Reference forward pass written independently of the library: explicit
// loops over a {in, hidden..., out} MLP with ReLU, returning the mean
// softmax cross-entropy over the listed rows.
double ReferenceLoss(const std::vector<double>& v,
                     const std::vector<std::size_t>& widths,
                     const Dataset& data, const std::vector<std::size_t>& rows) {
  double total = 0.0;
  for (std::size_t r : rows) {
    std::vector<double> a(data.Row(r).begin(), data.Row(r).end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const std::size_t in = widths[l], out = widths[l + 1];
      std::vector<double> z(out);
      for (std::size_t j = 0; j < out; ++j) {
        double s = v[off + in * out + j];
        for (std::size_t i = 0; i < in; ++i) s += a[i] * v[off + i * out + j];
        z[j] = (l + 2 < widths.size()) ? std::max(0.0, s) : s;
      }
      off += in * out + out;
      a = z;
    }
    double m = a[0];
    for (double x : a) m = std::max(m, x);
    double sum = 0.0;
    for (double x : a) sum += std::exp(x - m);
    total += std::log(sum) + m - a[data.labels[r]];
  }
  return total / static_cast<double>(rows.size());
}

Dataset RandomData(std::size_t n, std::size_t dims, int classes, std::mt19937_64& rng) {
  Dataset d;
  d.dims = dims;
  d.num_classes = classes;
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> lab(0, classes - 1);
  for (std::size_t i = 0; i < n * dims; ++i) d.features.push_back(g(rng));
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(lab(rng));
  return d;
}

TEST(InitModel, DeterministicPerSeed) {
  const std::vector<LayerShape> s = {{2, 2}};
  EXPECT_TRUE(BitwiseEqual(InitModel(s, 7), InitModel(s, 7)));
  const auto a = InitModel(s, 7), b = InitModel(s, 8);
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) differs |= a[k] != b[k];
  EXPECT_TRUE(differs);
}

TEST(InitModel, LengthAndZeroBiases) {
  const auto w = InitModel({{4, 3}, {3}}, 1);
  EXPECT_EQ(w.size(), 15u);
  for (std::size_t k = 12; k < 15; ++k) EXPECT_EQ(w[k], 0.0);
}

TEST(InitModel, RejectsBadShapes) {
  EXPECT_THROW(InitModel({}, 1), ConfigError);
  EXPECT_THROW(InitModel({{4, 0}}, 1), ConfigError);
  EXPECT_THROW(InitModel({{}}, 1), ConfigError);
}

TEST(ApplyMask, Examples) {
  ParamVector w({{2}}, {1.0, 2.0});
  EXPECT_EQ(ApplyMask(w, Mask(2, true)), w);
  const auto out = ApplyMask(w, Mask(std::vector<std::uint8_t>{0, 1}));
  EXPECT_EQ(out[0], 0.0);
  EXPECT_EQ(out[1], 2.0);
  EXPECT_THROW(ApplyMask(w, Mask(3, true)), ContractViolation);
}

TEST(ApplyMask, IdempotentOnRandomPairs) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(17);
    std::vector<std::uint8_t> bits(17);
    for (auto& x : v) x = g(rng);
    for (auto& b : bits) b = coin(rng);
    ParamVector w({{17}}, v);
    Mask m(bits);
    const auto once = ApplyMask(w, m);
    EXPECT_TRUE(BitwiseEqual(ApplyMask(once, m), once));
    // No exact zeros in v, so the mask is recoverable from the values.
    EXPECT_EQ(MaskOf(once), m);
  }
}

TEST(MaskOf, Examples) {
  EXPECT_EQ(MaskOf(ParamVector({{3}}, {0.0, 3.0, 0.0})), Mask(std::vector<std::uint8_t>{0, 1, 0}));
  const auto zero = MaskOf(ParamVector(std::vector<LayerShape>{{4}}));
  EXPECT_EQ(zero.Count(), 0u);
  EXPECT_EQ(zero.Density(), 0.0);
}

TEST(Mask, SubsetAndDensity) {
  Mask a({1, 0, 1, 0}), b({1, 1, 1, 0});
  EXPECT_TRUE(a.IsSubsetOf(b));
  EXPECT_FALSE(b.IsSubsetOf(a));
  EXPECT_DOUBLE_EQ(b.Density(), 0.75);
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(11);
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dims = 2 + trial % 4, hidden = 3 + trial % 5;
    const int classes = 2 + trial % 3;
    const auto shapes = MlpShapes(dims, {hidden}, classes);
    auto w = InitModel(shapes, 100 + trial);
    // Nonzero biases so every parameter class gets exercised.
    std::normal_distribution<double> g(0.0, 0.3);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += g(rng);
    const Dataset data = RandomData(1, dims, classes, rng);
    const std::vector<std::size_t> rows = {0};
    const std::vector<std::size_t> widths = {dims, hidden, static_cast<std::size_t>(classes)};

    const auto lg = ComputeLossGradient(w, data, rows);
    std::vector<double> v(w.values().begin(), w.values().end());
    EXPECT_NEAR(lg.loss, ReferenceLoss(v, widths, data, rows), 1e-12);
    for (std::size_t k = 0; k < v.size(); ++k) {
      auto plus = v, minus = v;
      plus[k] += h;
      minus[k] -= h;
      const double fd = (ReferenceLoss(plus, widths, data, rows) -
                         ReferenceLoss(minus, widths, data, rows)) / (2 * h);
      const double an = lg.gradient[k];
      const double scale = std::max({std::abs(fd), std::abs(an), 1e-4});
      EXPECT_LE(std::abs(fd - an) / scale, 1e-4) << "trial " << trial << " k " << k;
      ++checked;
    }
  }
  EXPECT_GT(checked, 0);
}

TEST(Gradient, DeepNetworkMatchesDifferences) {
  std::mt19937_64 rng(5);
  const auto shapes = MlpShapes(3, {4, 5}, 3);
  auto w = InitModel(shapes, 9);
  std::normal_distribution<double> g(0.0, 0.2);
  for (std::size_t k = 0; k < w.size(); ++k) w[k] += g(rng);
  const Dataset data = RandomData(6, 3, 3, rng);
  const std::vector<std::size_t> rows = {0, 1, 2, 3, 4, 5};
  const std::vector<std::size_t> widths = {3, 4, 5, 3};
  const auto lg = ComputeLossGradient(w, data, rows);
  std::vector<double> v(w.values().begin(), w.values().end());
  for (std::size_t k = 0; k < v.size(); ++k) {
    auto plus = v, minus = v;
    plus[k] += 1e-6;
    minus[k] -= 1e-6;
    const double fd = (ReferenceLoss(plus, widths, data, rows) -
                       ReferenceLoss(minus, widths, data, rows)) / 2e-6;
    const double scale = std::max({std::abs(fd), std::abs(lg.gradient[k]), 1e-4});
    EXPECT_LE(std::abs(fd - lg.gradient[k]) / scale, 1e-4) << k;
  }
}

TEST(LocalTrain, ZeroRateReturnsMaskedInput) {
  std::mt19937_64 rng(1);
  const auto w = InitModel(MlpShapes(3, {4}, 2), 2);
  const Dataset data = RandomData(10, 3, 2, rng);
  Mask m(w.size(), true);
  m.Set(0, false);
  m.Set(5, false);
  TrainSpec spec{{0.0}, 4, 3};
  EXPECT_TRUE(BitwiseEqual(LocalTrain(w, m, data, spec, 0, 1), ApplyMask(w, m)));
}

TEST(LocalTrain, OneStepIsPlainGradientDescent) {
  std::mt19937_64 rng(2);
  const auto w = InitModel(MlpShapes(3, {4}, 2), 3);
  const Dataset data = RandomData(1, 3, 2, rng);
  TrainSpec spec{{0.1}, 1, 1};
  const auto out = LocalTrain(w, Mask(w.size(), true), data, spec, 0, 4);
  const std::vector<std::size_t> rows = {0};
  const std::vector<std::size_t> widths = {3, 4, 2};
  std::vector<double> v(w.values().begin(), w.values().end());
  for (std::size_t k = 0; k < v.size(); ++k) {
    auto plus = v, minus = v;
    plus[k] += 1e-6;
    minus[k] -= 1e-6;
    const double fd = (ReferenceLoss(plus, widths, data, rows) -
                       ReferenceLoss(minus, widths, data, rows)) / 2e-6;
    const double expected = v[k] - 0.1 * fd;
    EXPECT_NEAR(out[k], expected, 1e-4 * std::max(1.0, std::abs(expected)));
  }
}

TEST(LocalTrain, PrunedCoordinatesStayZero) {
  std::mt19937_64 rng(3);
  auto w = InitModel(MlpShapes(4, {6}, 3), 5);
  const Dataset data = RandomData(40, 4, 3, rng);
  std::bernoulli_distribution coin(0.4);
  std::vector<std::uint8_t> bits(w.size());
  for (auto& b : bits) b = coin(rng);
  const Mask m(bits);
  TrainSpec spec{{0.3}, 8, 5};
  for (int round = 0; round < 4; ++round) {
    w = LocalTrain(w, m, data, spec, round, 10 + round);
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (!m[k]) {
        EXPECT_EQ(w[k], 0.0);
      }
    }
    EXPECT_TRUE(MaskOf(w).IsSubsetOf(m));
  }
}

TEST(LocalTrain, Deterministic) {
  std::mt19937_64 rng(4);
  const auto w = InitModel(MlpShapes(4, {6}, 3), 5);
  const Dataset data = RandomData(30, 4, 3, rng);
  TrainSpec spec{{0.2}, 7, 6};
  EXPECT_TRUE(BitwiseEqual(LocalTrain(w, Mask(w.size(), true), data, spec, 2, 9),
                           LocalTrain(w, Mask(w.size(), true), data, spec, 2, 9)));
}

TEST(LocalTrain, Errors) {
  const auto w = InitModel(MlpShapes(2, {2}, 2), 1);
  Dataset empty;
  empty.dims = 2;
  empty.num_classes = 2;
  EXPECT_THROW(LocalTrain(w, Mask(w.size(), true), empty, {}, 0, 0), ContractViolation);

  std::mt19937_64 rng(0);
  const Dataset data = RandomData(5, 2, 2, rng);
  TrainSpec wild{{1e308}, 5, 50};
  EXPECT_THROW(LocalTrain(w, Mask(w.size(), true), data, wild, 0, 0), TrainingDiverged);
}

TEST(LearningRate, DecaySchedule) {
  LearningRateSchedule s{0.25, 0.5, 100.0};
  EXPECT_DOUBLE_EQ(s.Rate(0), 0.25);
  EXPECT_DOUBLE_EQ(s.Rate(100), 0.125);
  EXPECT_DOUBLE_EQ(s.Rate(200), 0.0625);
  LearningRateSchedule constant{0.25};
  EXPECT_EQ(constant.Rate(12345), 0.25);
}

TEST(TestAccuracy, Examples) {
  // Identity-like single layer: class = argmax of the two inputs.
  ParamVector w({{2, 2}, {2}}, {1, 0, 0, 1, 0, 0});
  Dataset one{2, 2, {0.0, 3.0}, {1}};
  EXPECT_EQ(TestAccuracy(w, one), 1.0);

  // All-zero model ties everywhere; the lowest class wins.
  std::mt19937_64 rng(8);
  Dataset d = RandomData(200, 3, 4, rng);
  const auto zeros = ParamVector(MlpShapes(3, {5}, 4));
  const double class0 =
      static_cast<double>(std::count(d.labels.begin(), d.labels.end(), 0)) / 200.0;
  EXPECT_DOUBLE_EQ(TestAccuracy(zeros, d), class0);

  const auto model = InitModel(MlpShapes(3, {5}, 4), 2);
  const double before = TestAccuracy(model, d);
  std::vector<std::size_t> perm(d.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = perm.size() - 1 - i;
  EXPECT_EQ(TestAccuracy(model, d.Subset(perm)), before);

  Dataset empty{3, 4, {}, {}};
  EXPECT_THROW(TestAccuracy(model, empty), ContractViolation);
}

TEST(Dataset, ValidateCatchesBadLabels) {
  Dataset d{2, 2, {0, 0, 1, 1}, {0, 2}};
  EXPECT_THROW(d.Validate(), ContractViolation);
  d.labels[1] = 1;
  EXPECT_NO_THROW(d.Validate());
}

}  // namespace
}  // namespace prfl
