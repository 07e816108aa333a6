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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "prfl/data.hpp"
#include "prfl/density.hpp"
#include "prfl/model.hpp"
#include "prfl/netsim.hpp"
#include "prfl/variant.hpp"

namespace prfl {

inline constexpr int kConfigSchemaVersion = 1;

struct NetworkProfile {
  double server_upload = 20.0;     // MB/s
  double server_download = 100.0;  // MB/s
  double server_sigma = 0.1;
  std::vector<double> client_upload = {5.0, 4.0, 3.0, 2.5, 1.5,
                                       1.0, 0.6, 0.5, 0.5, 0.4};
  std::vector<double> client_download = {20.0, 18.0, 16.0, 14.0, 12.0,
                                         10.0, 8.0,  6.0,  5.0,  4.0};
  std::vector<double> client_sigma = std::vector<double>(10, 0.3);
  double model_size_mb = 26.5;  // size of the dense model on the wire

  bool operator==(const NetworkProfile&) const = default;
};

struct ComputeProfile {
  double seconds_per_iteration = 0.02;  // dense model, compute factor 1
  std::vector<double> factors = std::vector<double>(10, 1.0);

  bool operator==(const ComputeProfile&) const = default;
};

struct DensityParams {
  std::vector<double> rho_min = std::vector<double>(10, 0.05);
  double delta_rho = 0.2;
  std::size_t pruning_interval = 50;
  std::size_t queue_capacity = 10;  // round-time history per client
  PruningPolicy policy = PruningPolicy::kGlobalMagnitude;
  std::size_t patience = 10;
  double min_delta = 0.001;

  bool operator==(const DensityParams&) const = default;
};

struct AggregationParams {
  double beta = 0.5;   // freshness exponent
  double eta_g = 1.0;  // global learning rate
  double alpha = 0.6;  // per-arrival mixing rate

  bool operator==(const AggregationParams&) const = default;
};

struct ScheduleParams {
  double delta_t = 0.0;  // 0: median first-round latency
  double t_merge = 0.0;
  double t_max = 14000.0;
  std::size_t max_rounds = 100;
  bool stop_on_plateau = true;

  bool operator==(const ScheduleParams&) const = default;
};

struct DataParams {
  std::size_t dims = 16;
  int classes = 4;
  std::size_t samples_per_client = 200;
  std::size_t test_samples = 1000;
  ClusterSpec clusters;
  PartitionMode partition = PartitionMode::kLabelSkew;
  double skew_alpha = 0.5;
  std::optional<std::uint64_t> seed;  // defaults to one derived from RunConfig::seed

  bool operator==(const DataParams&) const = default;
};

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  Variant variant = Variant::kPrFl;
  std::optional<VariantToggles> toggles;  // overrides the variant's defaults
  std::size_t clients = 10;
  NetworkProfile network;
  ComputeProfile compute;
  std::vector<std::size_t> hidden = {32};
  TrainSpec train{{0.25, 0.5, 100.0}, 20, 5};
  DensityParams density;
  AggregationParams aggregation;
  ScheduleParams schedule;
  DataParams data;
  std::uint64_t seed = 1;
  std::string output = "runs/default";

  VariantToggles EffectiveToggles() const;
  std::uint64_t DataSeed() const;
  std::vector<LayerShape> ModelShapes() const;
  Endpoint ServerEndpoint() const;
  std::vector<Endpoint> ClientEndpoints() const;

  bool operator==(const RunConfig&) const = default;
};

// Throws ConfigError describing the first invalid field.
void Validate(const RunConfig& cfg);

// Missing keys take defaults; unknown keys are rejected. Per-client lists may
// be given as a single number, which is repeated for every client.
RunConfig ConfigFromJson(const nlohmann::json& j);
nlohmann::json ConfigToJson(const RunConfig& cfg);

RunConfig LoadConfig(const std::string& path);

}  // namespace prfl
