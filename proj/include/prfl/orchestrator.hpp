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
#include <functional>
#include <map>
#include <vector>

#include "prfl/config.hpp"
#include "prfl/distribute.hpp"
#include "prfl/model.hpp"
#include "prfl/netsim.hpp"

namespace prfl {

struct ClientReport {
  double density = 1.0;
  std::size_t rounds_completed = 0;
  std::int64_t staleness_age = -1;  // -1 until the client has a buffered model
  std::size_t bytes_up = 0;
  std::size_t bytes_down = 0;

  bool operator==(const ClientReport&) const = default;
};

struct RoundReport {
  std::int64_t round = 0;
  double sim_time = 0.0;
  double global_acc = 0.0;
  std::map<ClientId, ClientReport> per_client;
  std::size_t server_bytes_sent = 0;  // as accounted by the distribution scheme
  std::size_t server_bytes_received = 0;

  bool operator==(const RoundReport&) const = default;
};

struct ExperimentData {
  std::vector<Dataset> client_data;
  Dataset test;
};

// Synthesizes the task described by cfg.data and splits it into a shared test
// set and one training shard per client.
ExperimentData BuildExperimentData(const RunConfig& cfg);

// Seed streams of one run, exposed so tests can replay a client by hand.
std::uint64_t ModelInitSeed(std::uint64_t master);
std::uint64_t TrainingSeed(std::uint64_t master, ClientId client, std::uint64_t cycle);

struct RunHooks {
  // Every processed event: time, kind, client, bytes moved (0 if none).
  std::function<void(double, EventKind, ClientId, std::size_t)> trace;
  // Every batch of packets the server distributes.
  std::function<void(const std::vector<DeltaPacket>&)> packets;
  // Called after each report is appended.
  std::function<void(const RoundReport&)> report;
};

// Runs one experiment to completion. Throws ConfigError for an invalid config
// and ContractViolation when an internal invariant breaks.
std::vector<RoundReport> Run(const RunConfig& cfg, const ExperimentData& data,
                             const RunHooks& hooks = {});
std::vector<RoundReport> Run(const RunConfig& cfg);

}  // namespace prfl
