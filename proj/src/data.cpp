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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "prfl/error.hpp"
#include "prfl/rng.hpp"

namespace prfl {

Dataset GenerateDataset(int classes, std::size_t dims, std::size_t samples,
                        std::uint64_t seed, const ClusterSpec& clusters) {
  if (classes <= 0 || dims == 0 || samples == 0 ||
      clusters.clusters_per_class == 0) {
    throw ConfigError("GenerateDataset: classes, dims, samples must be positive");
  }
  Rng rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  const std::size_t num_centers =
      static_cast<std::size_t>(classes) * clusters.clusters_per_class;
  std::vector<double> centers(num_centers * dims);
  for (std::size_t c = 0; c < num_centers; ++c) {
    double norm = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      centers[c * dims + d] = unit(rng);
      norm += centers[c * dims + d] * centers[c * dims + d];
    }
    norm = std::sqrt(norm);
    for (std::size_t d = 0; d < dims; ++d) {
      centers[c * dims + d] *= clusters.separation / norm;
    }
  }

  Dataset out;
  out.dims = dims;
  out.num_classes = classes;
  out.labels.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    out.labels[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
  }
  std::shuffle(out.labels.begin(), out.labels.end(), rng);

  std::uniform_int_distribution<std::size_t> pick_cluster(
      0, clusters.clusters_per_class - 1);
  out.features.resize(samples * dims);
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t c =
        static_cast<std::size_t>(out.labels[i]) * clusters.clusters_per_class +
        pick_cluster(rng);
    for (std::size_t d = 0; d < dims; ++d) {
      out.features[i * dims + d] =
          centers[c * dims + d] + clusters.noise * unit(rng);
    }
  }
  return out;
}

const char* PartitionModeName(PartitionMode mode) {
  return mode == PartitionMode::kIid ? "iid" : "label-skew";
}

PartitionMode ParsePartitionMode(const std::string& name) {
  if (name == "iid") return PartitionMode::kIid;
  if (name == "label-skew") return PartitionMode::kLabelSkew;
  throw ConfigError("unknown partition mode '" + name + "'");
}

std::vector<std::vector<std::size_t>> PartitionIndices(
    const Dataset& data, std::size_t clients, const PartitionSpec& spec) {
  if (clients == 0) throw ConfigError("Partition: need at least one client");
  if (clients > data.size()) {
    throw ConfigError("Partition: more clients than samples");
  }
  Rng rng(spec.seed);
  std::vector<std::size_t> quota(clients, data.size() / clients);
  for (std::size_t i = 0; i < data.size() % clients; ++i) ++quota[i];

  std::vector<std::vector<std::size_t>> parts(clients);
  if (spec.mode == PartitionMode::kIid) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t at = 0;
    for (std::size_t c = 0; c < clients; ++c) {
      parts[c].assign(order.begin() + at, order.begin() + at + quota[c]);
      at += quota[c];
    }
    return parts;
  }

  if (!(spec.skew_alpha > 0.0)) {
    throw ConfigError("Partition: skew_alpha must be positive");
  }
  const auto classes = static_cast<std::size_t>(data.num_classes);
  std::vector<std::vector<std::size_t>> pools(classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    pools[static_cast<std::size_t>(data.labels[i])].push_back(i);
  }
  for (auto& pool : pools) std::shuffle(pool.begin(), pool.end(), rng);

  std::gamma_distribution<double> gamma(spec.skew_alpha, 1.0);
  std::vector<double> share(classes);
  for (std::size_t c = 0; c < clients; ++c) {
    double total = 0.0;
    for (auto& s : share) total += (s = gamma(rng));
    if (!(total > 0.0)) {
      // Every draw underflowed: the limit of a tiny alpha is one class.
      std::fill(share.begin(), share.end(), 0.0);
      share[std::uniform_int_distribution<std::size_t>(0, classes - 1)(rng)] = 1.0;
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t slot = 0; slot < quota[c]; ++slot) {
      double live = 0.0;
      for (std::size_t k = 0; k < classes; ++k) {
        if (!pools[k].empty()) live += share[k];
      }
      std::size_t chosen = classes;
      if (live > 0.0) {
        double r = u(rng) * live;
        for (std::size_t k = 0; k < classes; ++k) {
          if (pools[k].empty()) continue;
          chosen = k;
          r -= share[k];
          if (r < 0.0) break;
        }
      } else {
        // The client's preferred classes are exhausted; take the largest pool.
        chosen = static_cast<std::size_t>(
            std::max_element(pools.begin(), pools.end(),
                             [](const auto& a, const auto& b) {
                               return a.size() < b.size();
                             }) -
            pools.begin());
      }
      parts[c].push_back(pools[chosen].back());
      pools[chosen].pop_back();
    }
  }
  return parts;
}

std::vector<Dataset> Partition(const Dataset& data, std::size_t clients,
                               const PartitionSpec& spec) {
  std::vector<Dataset> out;
  for (const auto& idx : PartitionIndices(data, clients, spec)) {
    out.push_back(data.Subset(idx));
  }
  return out;
}

}  // namespace prfl
