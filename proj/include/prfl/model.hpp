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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace prfl {

// Dimensions of one parameter tensor, e.g. {in, out} for a dense weight matrix
// or {out} for a bias vector.
using LayerShape = std::vector<std::size_t>;

std::size_t ElementCount(const std::vector<LayerShape>& shapes);

// Flat model parameters plus the layer shapes they came from. Every model in
// the system (client, global, submodel, delta target) is one of these.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<LayerShape> shapes);
  ParamVector(std::vector<LayerShape> shapes, std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  const std::vector<LayerShape>& shapes() const { return shapes_; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

  bool AllFinite() const;

  // Value equality; +0.0 and -0.0 compare equal. See BitwiseEqual.
  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<LayerShape> shapes_;
  std::vector<double> values_;
};

// True iff shapes match and every element has an identical bit pattern.
bool BitwiseEqual(const ParamVector& a, const ParamVector& b);

// Binary keep(1)/prune(0) indicator aligned with a ParamVector.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t size, bool fill);
  explicit Mask(std::vector<std::uint8_t> bits);

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t k) const { return bits_[k] != 0; }
  void Set(std::size_t k, bool on) { bits_[k] = on ? 1 : 0; }

  std::size_t Count() const;
  double Density() const;

  // Bitwise <=: every kept position of *this is kept in `other`.
  bool IsSubsetOf(const Mask& other) const;

  const std::vector<std::uint8_t>& bits() const { return bits_; }
  bool operator==(const Mask&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

// Row-major feature matrix with integer class labels.
struct Dataset {
  std::size_t dims = 0;
  int num_classes = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> Row(std::size_t i) const {
    return {features.data() + i * dims, dims};
  }

  // Throws ContractViolation when rows/labels disagree or a label is out of
  // range.
  void Validate() const;

  Dataset Subset(std::span<const std::size_t> indices) const;
};

// eta(r) = base * decay_base^(r / decay_period). A decay_period of 0 or a
// decay_base of 1 gives a constant rate.
struct LearningRateSchedule {
  double base = 0.25;
  double decay_base = 1.0;
  double decay_period = 0.0;

  double Rate(std::int64_t round) const;
  bool operator==(const LearningRateSchedule&) const = default;
};

struct TrainSpec {
  LearningRateSchedule schedule;
  std::size_t batch_size = 20;
  std::size_t local_iterations = 5;
  bool operator==(const TrainSpec&) const = default;
};

// Layer shapes of a fully connected ReLU network: {in, h0}, {h0}, {h0, h1},
// {h1}, ..., {h_last, classes}, {classes}.
std::vector<LayerShape> MlpShapes(std::size_t inputs,
                                  const std::vector<std::size_t>& hidden,
                                  std::size_t classes);

// Scaled-uniform (Glorot) weights, zero biases. Deterministic in `seed`.
// Throws ConfigError for empty shapes or zero-sized dimensions.
ParamVector InitModel(const std::vector<LayerShape>& shapes,
                      std::uint64_t seed);

// out[k] = w[k] if m[k] else +0.0.
ParamVector ApplyMask(const ParamVector& w, const Mask& m);

// Bit k is set iff w[k] != 0.
Mask MaskOf(const ParamVector& w);

// Output-layer logits for one input row.
std::vector<double> Logits(const ParamVector& w, std::span<const double> x);

struct LossGradient {
  double loss = 0.0;  // mean softmax cross-entropy over the batch
  ParamVector gradient;
};

// Analytic gradient of the mean cross-entropy over `batch` rows of `data`.
LossGradient ComputeLossGradient(const ParamVector& w, const Dataset& data,
                                 std::span<const std::size_t> batch);

// Masked minibatch SGD. The mask is applied before the first step and after
// every step, so pruned positions are exactly zero in the result.
// Throws ContractViolation on an empty dataset or length mismatch and
// TrainingDiverged when the loss stops being finite.
ParamVector LocalTrain(const ParamVector& w, const Mask& m, const Dataset& data,
                       const TrainSpec& spec, std::int64_t round,
                       std::uint64_t seed);

// Fraction of rows whose argmax logit (lowest index on ties) equals the label.
double TestAccuracy(const ParamVector& w, const Dataset& data);

}  // namespace prfl
