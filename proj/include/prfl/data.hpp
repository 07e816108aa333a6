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
#include <string>
#include <vector>

#include "prfl/model.hpp"

namespace prfl {

struct ClusterSpec {
  double separation = 3.0;             // radius of the class-cluster centers
  std::size_t clusters_per_class = 2;  // > 1 makes classes non-convex
  double noise = 1.0;                  // per-dimension std-dev around a center
  bool operator==(const ClusterSpec&) const = default;
};

// Gaussian class-cluster data with balanced labels. Each class owns
// `clusters_per_class` centers drawn at distance `separation` from the origin;
// samples are a center plus isotropic noise. Deterministic in `seed`.
Dataset GenerateDataset(int classes, std::size_t dims, std::size_t samples,
                        std::uint64_t seed, const ClusterSpec& clusters = {});

enum class PartitionMode { kIid, kLabelSkew };

const char* PartitionModeName(PartitionMode mode);
PartitionMode ParsePartitionMode(const std::string& name);

struct PartitionSpec {
  PartitionMode mode = PartitionMode::kIid;
  double skew_alpha = 0.5;  // Dirichlet concentration; ignored for IID
  std::uint64_t seed = 0;
};

// Row indices per client. The lists are disjoint and cover every row; client
// sizes differ by at most one. Label-skew draws each client's class
// proportions from Dirichlet(skew_alpha) and fills its quota from those
// classes while rows remain. Throws ConfigError when clients > rows.
std::vector<std::vector<std::size_t>> PartitionIndices(const Dataset& data,
                                                       std::size_t clients,
                                                       const PartitionSpec& spec);

std::vector<Dataset> Partition(const Dataset& data, std::size_t clients,
                               const PartitionSpec& spec);

}  // namespace prfl
