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
#include <map>
#include <optional>
#include <queue>
#include <vector>

#include "prfl/density.hpp"
#include "prfl/rng.hpp"

namespace prfl {

// Link capacities in MB/s. fluctuation_sigma is the standard deviation of the
// normal in log space; each transfer draws its speed as base * exp(N(0, s^2)).
struct Endpoint {
  double upload_speed = 1.0;
  double download_speed = 1.0;
  double fluctuation_sigma = 0.0;
};

enum class Direction {
  kUplink,    // client -> server
  kDownlink,  // server -> client
};

struct Transfer {
  std::uint64_t id = 0;
  ClientId client = 0;
  Direction direction = Direction::kUplink;
  double payload_mb = 0.0;
  std::size_t payload_bytes = 0;  // wire bytes, for accounting
  double start_time = 0.0;
  double finish_time = -1.0;
  // Per-transfer sampled speeds of the client and server side, MB/s.
  double client_speed = 0.0;
  double server_speed = 0.0;
};

// Earlier kinds run first when timestamps tie, so a model arriving exactly at
// an aggregation tick is part of that tick.
enum class EventKind : int {
  kTransferComplete = 0,
  kTrainingComplete = 1,
  kAggregationTick = 2,
};

const char* EventKindName(EventKind kind);

struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::kAggregationTick;
  ClientId client = 0;
  std::uint64_t ref = 0;  // transfer id or tick number
  std::uint64_t generation = 0;
  std::uint64_t seq = 0;  // insertion order, the final tie-break
};

// Virtual clock plus a time-ordered event heap. Ties are broken by
// (kind, insertion sequence).
class EventQueue {
 public:
  // Throws ContractViolation for an event in the past.
  const SimEvent& Push(SimEvent ev);

  // Pops the earliest event and moves the clock to it; nullopt once empty.
  std::optional<SimEvent> Advance();

  double now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const;
  };
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  double now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  SimEvent last_pushed_;
};

// base * exp(Z), Z ~ Normal(0, sigma^2). sigma == 0 returns base exactly.
double SampleSpeed(double base, double sigma, Rng& rng);

// Rate of a transfer whose server end is shared by `server_load` transfers.
double TransferRate(double client_speed, double server_speed,
                    std::size_t server_load);

// Samples both ends, fixes the rate at min(client side, server side / load)
// and enqueues the completion at now + payload / rate.
SimEvent ScheduleTransfer(EventQueue& q, Transfer& t, const Endpoint& sender,
                          const Endpoint& receiver, std::size_t server_load,
                          Rng& rng);

// Processor-sharing model of the server's two links. Every active transfer in
// a direction gets min(its client speed, server speed / active count); shares
// are recomputed whenever a transfer in that direction starts or finishes and
// completion events are re-issued with a new generation.
class Network {
 public:
  Network(Endpoint server, std::vector<Endpoint> clients, std::uint64_t seed);

  // Starts a transfer at q.now() and returns its id.
  std::uint64_t Start(EventQueue& q, ClientId client, Direction direction,
                       double payload_mb, std::size_t payload_bytes);

  // Handles a kTransferComplete event. Returns the finished transfer, or
  // nullopt when the event was superseded by a later reschedule.
  std::optional<Transfer> Complete(EventQueue& q, const SimEvent& ev);

  std::size_t active(Direction d) const;

  std::size_t client_bytes_sent(ClientId c) const { return client_sent_.at(c); }
  std::size_t client_bytes_received(ClientId c) const {
    return client_received_.at(c);
  }
  std::size_t server_bytes_sent() const { return server_sent_; }
  std::size_t server_bytes_received() const { return server_received_; }

  const Endpoint& server() const { return server_; }
  const Endpoint& client(ClientId c) const { return clients_.at(c); }

 private:
  struct Active {
    Transfer transfer;
    double remaining_mb = 0.0;
    double rate = 0.0;
    double last_update = 0.0;
    std::uint64_t generation = 0;
  };

  void Rebalance(EventQueue& q, Direction d);

  Endpoint server_;
  std::vector<Endpoint> clients_;
  Rng rng_;
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, Active> active_;
  std::vector<std::size_t> client_sent_;
  std::vector<std::size_t> client_received_;
  std::size_t server_sent_ = 0;
  std::size_t server_received_ = 0;
};

// Aggregation instants: first at T^0, then T^n = T^(n-1) + delta_t + t_merge.
class TickSchedule {
 public:
  TickSchedule(double first, double delta_t, double t_merge);

  // Returns T^0 on the first call, then T^1, T^2, ...
  double Next();

 private:
  double first_;
  double step_;
  std::uint64_t issued_ = 0;
};

}  // namespace prfl
