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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <string>

#include "prfl/error.hpp"
#include "prfl/rng.hpp"

namespace prfl {

namespace {

struct DenseLayer {
  std::size_t weight_offset;
  std::size_t bias_offset;
  std::size_t in;
  std::size_t out;
};

std::vector<DenseLayer> ParseMlp(const std::vector<LayerShape>& shapes) {
  if (shapes.empty() || shapes.size() % 2 != 0) {
    throw ConfigError("MLP shapes must be (weight, bias) pairs");
  }
  std::vector<DenseLayer> layers;
  std::size_t offset = 0;
  for (std::size_t s = 0; s < shapes.size(); s += 2) {
    const auto& w = shapes[s];
    const auto& b = shapes[s + 1];
    if (w.size() != 2 || b.size() != 1 || b[0] != w[1]) {
      throw ConfigError("layer " + std::to_string(s / 2) +
                        " is not a {in, out} weight followed by an {out} bias");
    }
    if (!layers.empty() && layers.back().out != w[0]) {
      throw ConfigError("layer " + std::to_string(s / 2) +
                        " input width does not match previous output width");
    }
    layers.push_back({offset, offset + w[0] * w[1], w[0], w[1]});
    offset += w[0] * w[1] + w[1];
  }
  return layers;
}

// Activations of every layer for one row; acts[0] is the input, acts.back()
// the logits. Hidden layers are ReLU.
std::vector<std::vector<double>> ForwardAll(const ParamVector& w,
                                            const std::vector<DenseLayer>& L,
                                            std::span<const double> x) {
  std::vector<std::vector<double>> acts;
  acts.reserve(L.size() + 1);
  acts.emplace_back(x.begin(), x.end());
  const auto v = w.values();
  for (std::size_t l = 0; l < L.size(); ++l) {
    const auto& layer = L[l];
    const auto& in = acts.back();
    std::vector<double> z(v.begin() + layer.bias_offset,
                          v.begin() + layer.bias_offset + layer.out);
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double xi = in[i];
      if (xi == 0.0) continue;
      const double* row = v.data() + layer.weight_offset + i * layer.out;
      for (std::size_t j = 0; j < layer.out; ++j) z[j] += xi * row[j];
    }
    if (l + 1 < L.size()) {
      for (double& zj : z) zj = std::max(zj, 0.0);
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

std::size_t ArgMax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

}  // namespace

std::size_t ElementCount(const std::vector<LayerShape>& shapes) {
  std::size_t total = 0;
  for (const auto& s : shapes) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    total += n;
  }
  return total;
}

ParamVector::ParamVector(std::vector<LayerShape> shapes)
    : shapes_(std::move(shapes)), values_(ElementCount(shapes_), 0.0) {}

ParamVector::ParamVector(std::vector<LayerShape> shapes,
                         std::vector<double> values)
    : shapes_(std::move(shapes)), values_(std::move(values)) {
  Require(values_.size() == ElementCount(shapes_),
          "ParamVector: value count does not match shapes");
}

bool ParamVector::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double x) { return std::isfinite(x); });
}

bool BitwiseEqual(const ParamVector& a, const ParamVector& b) {
  if (a.shapes() != b.shapes() || a.size() != b.size()) return false;
  return std::memcmp(a.values().data(), b.values().data(),
                     a.size() * sizeof(double)) == 0;
}

Mask::Mask(std::size_t size, bool fill) : bits_(size, fill ? 1 : 0) {}

Mask::Mask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t Mask::Count() const {
  return static_cast<std::size_t>(
      std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double Mask::Density() const {
  if (bits_.empty()) return 0.0;
  return static_cast<double>(Count()) / static_cast<double>(bits_.size());
}

bool Mask::IsSubsetOf(const Mask& other) const {
  Require(size() == other.size(), "Mask::IsSubsetOf: length mismatch");
  for (std::size_t k = 0; k < bits_.size(); ++k) {
    if (bits_[k] && !other.bits_[k]) return false;
  }
  return true;
}

void Dataset::Validate() const {
  Require(num_classes > 0, "Dataset: num_classes must be positive");
  Require(features.size() == labels.size() * dims,
          "Dataset: feature rows do not match label count");
  for (int y : labels) {
    Require(y >= 0 && y < num_classes, "Dataset: label out of range");
  }
}

Dataset Dataset::Subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.dims = dims;
  out.num_classes = num_classes;
  out.features.reserve(indices.size() * dims);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    auto row = Row(i);
    out.features.insert(out.features.end(), row.begin(), row.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

double LearningRateSchedule::Rate(std::int64_t round) const {
  if (decay_period <= 0.0 || decay_base == 1.0) return base;
  return base * std::pow(decay_base, static_cast<double>(round) / decay_period);
}

std::vector<LayerShape> MlpShapes(std::size_t inputs,
                                  const std::vector<std::size_t>& hidden,
                                  std::size_t classes) {
  std::vector<LayerShape> shapes;
  std::size_t prev = inputs;
  for (std::size_t h : hidden) {
    shapes.push_back({prev, h});
    shapes.push_back({h});
    prev = h;
  }
  shapes.push_back({prev, classes});
  shapes.push_back({classes});
  return shapes;
}

ParamVector InitModel(const std::vector<LayerShape>& shapes,
                      std::uint64_t seed) {
  if (shapes.empty()) throw ConfigError("InitModel: no layer shapes");
  for (const auto& s : shapes) {
    if (s.empty()) throw ConfigError("InitModel: empty layer shape");
    for (std::size_t d : s) {
      if (d == 0) throw ConfigError("InitModel: non-positive dimension");
    }
  }
  ParamVector w(shapes);
  Rng rng(seed);
  std::size_t offset = 0;
  for (const auto& s : shapes) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    if (s.size() >= 2) {
      const double fan_in = static_cast<double>(s[0]);
      const double fan_out = static_cast<double>(n / s[0]);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (std::size_t k = 0; k < n; ++k) w[offset + k] = dist(rng);
    }
    offset += n;
  }
  return w;
}

ParamVector ApplyMask(const ParamVector& w, const Mask& m) {
  Require(w.size() == m.size(), "ApplyMask: length mismatch");
  ParamVector out = w;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (!m[k]) out[k] = 0.0;
  }
  return out;
}

Mask MaskOf(const ParamVector& w) {
  std::vector<std::uint8_t> bits(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) bits[k] = w[k] != 0.0 ? 1 : 0;
  return Mask(std::move(bits));
}

std::vector<double> Logits(const ParamVector& w, std::span<const double> x) {
  const auto layers = ParseMlp(w.shapes());
  Require(x.size() == layers.front().in, "Logits: input width mismatch");
  return ForwardAll(w, layers, x).back();
}

LossGradient ComputeLossGradient(const ParamVector& w, const Dataset& data,
                                 std::span<const std::size_t> batch) {
  const auto layers = ParseMlp(w.shapes());
  Require(!batch.empty(), "ComputeLossGradient: empty batch");
  Require(data.dims == layers.front().in,
          "ComputeLossGradient: input width mismatch");
  Require(static_cast<std::size_t>(data.num_classes) == layers.back().out,
          "ComputeLossGradient: class count mismatch");

  LossGradient result{0.0, ParamVector(w.shapes())};
  auto grad = result.gradient.values();
  const auto v = w.values();
  const double scale = 1.0 / static_cast<double>(batch.size());

  for (std::size_t idx : batch) {
    const auto acts = ForwardAll(w, layers, data.Row(idx));
    const auto& logits = acts.back();
    const double peak = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - peak);
    const int label = data.labels[idx];
    result.loss += (std::log(denom) - (logits[label] - peak)) * scale;

    // dL/dz for the output layer: softmax - onehot.
    std::vector<double> delta(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) {
      delta[j] = std::exp(logits[j] - peak) / denom;
    }
    delta[label] -= 1.0;

    for (std::size_t l = layers.size(); l-- > 0;) {
      const auto& layer = layers[l];
      const auto& in = acts[l];
      for (std::size_t j = 0; j < layer.out; ++j) {
        grad[layer.bias_offset + j] += delta[j] * scale;
      }
      for (std::size_t i = 0; i < layer.in; ++i) {
        if (in[i] == 0.0) continue;
        double* row = grad.data() + layer.weight_offset + i * layer.out;
        for (std::size_t j = 0; j < layer.out; ++j) {
          row[j] += in[i] * delta[j] * scale;
        }
      }
      if (l == 0) break;
      std::vector<double> prev(layer.in, 0.0);
      for (std::size_t i = 0; i < layer.in; ++i) {
        if (in[i] <= 0.0) continue;  // ReLU gate
        const double* row = v.data() + layer.weight_offset + i * layer.out;
        double s = 0.0;
        for (std::size_t j = 0; j < layer.out; ++j) s += row[j] * delta[j];
        prev[i] = s;
      }
      delta = std::move(prev);
    }
  }
  return result;
}

ParamVector LocalTrain(const ParamVector& w, const Mask& m, const Dataset& data,
                       const TrainSpec& spec, std::int64_t round,
                       std::uint64_t seed) {
  Require(w.size() == m.size(), "LocalTrain: mask length mismatch");
  Require(!data.empty(), "LocalTrain: empty dataset");
  Require(spec.batch_size > 0, "LocalTrain: batch size must be positive");

  ParamVector out = ApplyMask(w, m);
  const double eta = spec.schedule.Rate(round);
  Rng rng(seed);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  std::vector<std::size_t> batch(std::min(spec.batch_size, data.size()));
  for (std::size_t it = 0; it < spec.local_iterations; ++it) {
    for (auto& b : batch) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      b = order[cursor++];
    }
    const auto lg = ComputeLossGradient(out, data, batch);
    if (!std::isfinite(lg.loss)) {
      throw TrainingDiverged("LocalTrain: non-finite loss at iteration " +
                             std::to_string(it));
    }
    auto values = out.values();
    const auto g = lg.gradient.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      values[k] = m[k] ? values[k] - eta * g[k] : 0.0;
    }
  }
  if (!out.AllFinite()) {
    throw TrainingDiverged("LocalTrain: parameters became non-finite");
  }
  return out;
}

double TestAccuracy(const ParamVector& w, const Dataset& data) {
  Require(!data.empty(), "TestAccuracy: empty dataset");
  const auto layers = ParseMlp(w.shapes());
  Require(data.dims == layers.front().in, "TestAccuracy: input width mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto acts = ForwardAll(w, layers, data.Row(i));
    if (static_cast<int>(ArgMax(acts.back())) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace prfl
