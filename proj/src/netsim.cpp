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

#include "prfl/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prfl/error.hpp"

namespace prfl {

const char* EventKindName(EventKind kind) {
  switch (kind) {
    case EventKind::kTransferComplete:
      return "transfer";
    case EventKind::kTrainingComplete:
      return "train";
    case EventKind::kAggregationTick:
      return "tick";
  }
  return "?";
}

bool EventQueue::Later::operator()(const SimEvent& a, const SimEvent& b) const {
  if (a.time != b.time) return a.time > b.time;
  if (a.kind != b.kind) return a.kind > b.kind;
  return a.seq > b.seq;
}

const SimEvent& EventQueue::Push(SimEvent ev) {
  Require(std::isfinite(ev.time), "EventQueue: non-finite timestamp");
  Require(ev.time >= now_, "EventQueue: event scheduled before the clock");
  ev.seq = next_seq_++;
  heap_.push(ev);
  last_pushed_ = ev;
  return last_pushed_;
}

std::optional<SimEvent> EventQueue::Advance() {
  if (heap_.empty()) return std::nullopt;
  SimEvent ev = heap_.top();
  heap_.pop();
  now_ = ev.time;
  return ev;
}

double SampleSpeed(double base, double sigma, Rng& rng) {
  Require(base > 0.0, "SampleSpeed: base speed must be positive");
  Require(sigma >= 0.0, "SampleSpeed: sigma must be non-negative");
  if (sigma == 0.0) return base;
  std::normal_distribution<double> z(0.0, sigma);
  return base * std::exp(z(rng));
}

double TransferRate(double client_speed, double server_speed,
                    std::size_t server_load) {
  Require(server_load > 0, "TransferRate: server load must count this transfer");
  return std::min(client_speed,
                  server_speed / static_cast<double>(server_load));
}

SimEvent ScheduleTransfer(EventQueue& q, Transfer& t, const Endpoint& sender,
                          const Endpoint& receiver, std::size_t server_load,
                          Rng& rng) {
  Require(t.payload_mb >= 0.0, "ScheduleTransfer: negative payload");
  const bool uplink = t.direction == Direction::kUplink;
  const Endpoint& client = uplink ? sender : receiver;
  const Endpoint& server = uplink ? receiver : sender;
  t.client_speed = SampleSpeed(
      uplink ? client.upload_speed : client.download_speed,
      client.fluctuation_sigma, rng);
  t.server_speed = SampleSpeed(
      uplink ? server.download_speed : server.upload_speed,
      server.fluctuation_sigma, rng);
  t.start_time = q.now();
  const double rate = TransferRate(t.client_speed, t.server_speed, server_load);
  t.finish_time = t.payload_mb == 0.0 ? t.start_time
                                      : t.start_time + t.payload_mb / rate;
  return q.Push({t.finish_time, EventKind::kTransferComplete, t.client, t.id, 0});
}

Network::Network(Endpoint server, std::vector<Endpoint> clients,
                 std::uint64_t seed)
    : server_(server),
      clients_(std::move(clients)),
      rng_(seed),
      client_sent_(clients_.size(), 0),
      client_received_(clients_.size(), 0) {}

std::size_t Network::active(Direction d) const {
  return static_cast<std::size_t>(
      std::count_if(active_.begin(), active_.end(), [d](const auto& kv) {
        return kv.second.transfer.direction == d;
      }));
}

std::uint64_t Network::Start(EventQueue& q, ClientId client,
                             Direction direction, double payload_mb,
                             std::size_t payload_bytes) {
  Require(client < clients_.size(), "Network::Start: unknown client");
  Require(payload_mb >= 0.0, "Network::Start: negative payload");
  const Endpoint& c = clients_[client];
  const bool uplink = direction == Direction::kUplink;

  Active a;
  a.transfer.id = next_id_++;
  a.transfer.client = client;
  a.transfer.direction = direction;
  a.transfer.payload_mb = payload_mb;
  a.transfer.payload_bytes = payload_bytes;
  a.transfer.start_time = q.now();
  a.transfer.client_speed = SampleSpeed(
      uplink ? c.upload_speed : c.download_speed, c.fluctuation_sigma, rng_);
  a.transfer.server_speed =
      SampleSpeed(uplink ? server_.download_speed : server_.upload_speed,
                  server_.fluctuation_sigma, rng_);
  a.remaining_mb = payload_mb;
  a.last_update = q.now();
  const std::uint64_t id = a.transfer.id;

  if (payload_mb == 0.0) {
    // Nothing to move; completes immediately without taking a share.
    a.rate = 0.0;
    active_.emplace(id, a);
    q.Push({q.now(), EventKind::kTransferComplete, client, id, 0});
    return id;
  }
  active_.emplace(id, a);
  Rebalance(q, direction);
  return id;
}

void Network::Rebalance(EventQueue& q, Direction d) {
  const double now = q.now();
  std::size_t load = 0;
  for (const auto& [id, a] : active_) {
    if (a.transfer.direction == d && a.remaining_mb > 0.0) ++load;
  }
  for (auto& [id, a] : active_) {
    if (a.transfer.direction != d || a.remaining_mb <= 0.0) continue;
    const double rate =
        TransferRate(a.transfer.client_speed, a.transfer.server_speed, load);
    if (rate == a.rate) continue;
    if (a.rate > 0.0) {
      a.remaining_mb = std::max(0.0, a.remaining_mb - a.rate * (now - a.last_update));
    }
    a.last_update = now;
    a.rate = rate;
    ++a.generation;
    q.Push({now + a.remaining_mb / rate, EventKind::kTransferComplete,
            a.transfer.client, id, a.generation});
  }
}

std::optional<Transfer> Network::Complete(EventQueue& q, const SimEvent& ev) {
  Require(ev.kind == EventKind::kTransferComplete,
          "Network::Complete: not a transfer event");
  auto it = active_.find(ev.ref);
  if (it == active_.end() || it->second.generation != ev.generation) {
    return std::nullopt;
  }
  Transfer t = it->second.transfer;
  t.finish_time = q.now();
  const bool had_share = it->second.rate > 0.0;
  active_.erase(it);

  if (t.direction == Direction::kUplink) {
    client_sent_[t.client] += t.payload_bytes;
    server_received_ += t.payload_bytes;
  } else {
    server_sent_ += t.payload_bytes;
    client_received_[t.client] += t.payload_bytes;
  }
  if (had_share) Rebalance(q, t.direction);
  return t;
}

TickSchedule::TickSchedule(double first, double delta_t, double t_merge)
    : first_(first), step_(delta_t + t_merge) {
  Require(delta_t > 0.0, "TickSchedule: delta_t must be positive");
  Require(t_merge >= 0.0, "TickSchedule: t_merge must be non-negative");
}

double TickSchedule::Next() {
  return first_ + static_cast<double>(issued_++) * step_;
}

}  // namespace prfl
