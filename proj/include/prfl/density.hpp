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
#include <deque>
#include <map>
#include <optional>
#include <utility>

#include "prfl/model.hpp"

namespace prfl {

using ClientId = std::size_t;

// Bounded FIFO of a client's recent round times (seconds). Pushing at
// capacity evicts the oldest entry.
class TimeQueue {
 public:
  TimeQueue() = default;
  explicit TimeQueue(std::size_t capacity);

  void Push(double seconds);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<double>& entries() const { return entries_; }

  bool operator==(const TimeQueue&) const = default;

 private:
  std::size_t capacity_ = 1;
  std::deque<double> entries_;
};

// Per-client density controller state.
struct DensityState {
  double rho = 1.0;        // currently assigned density
  double rho_min = 1.0;    // floor; only ever raised by recovery
  double delta_rho = 0.2;  // recovery increment
  TimeQueue queue;
};

// Patience-based plateau detector over an accuracy stream.
struct EarlyStopper {
  double best = -1.0;
  std::size_t patience = 10;
  std::size_t stall_count = 0;
  double min_delta = 0.001;
};

enum class PruningPolicy {
  kGlobalMagnitude,     // keep the ceil(rho * len) largest |w| overall
  kLayerwiseMagnitude,  // keep ceil(rho * layer_len) largest |w| per tensor
};

// Arithmetic mean of the queue, or nullopt when the client has no history yet
// (the caller then treats the client as provisional density 1.0).
std::optional<double> MeanRoundTime(const TimeQueue& q);

// clamp(min_j mean_j / mean_i, state.rho_min, 1).
double ComputeDensity(const std::map<ClientId, double>& all_means, ClientId i,
                      const DensityState& state);

// Number of positions kept at density rho over `len` elements: ceil(rho*len),
// at least one.
std::size_t KeptCount(double rho, std::size_t len);

// Magnitude pruning. Ties in |w| keep the lower index first, so masks drawn
// from the same vector at different densities are nested.
Mask PruneToDensity(const ParamVector& w, double rho,
                    PruningPolicy policy = PruningPolicy::kGlobalMagnitude);

// Feeds one accuracy sample. Returns the updated stopper and whether it fired;
// a firing stopper resets its stall counter so it can fire again later.
std::pair<EarlyStopper, bool> ObserveAccuracy(EarlyStopper s, double acc);

// rho_min <- min(rho + delta_rho, 1), then rho is raised to the new floor.
// A client already at full density is returned unchanged.
DensityState RecoverDensity(DensityState state);

// True iff every density is 1 and the global-model stopper fired.
bool ShouldTerminate(const std::map<ClientId, double>& densities,
                     bool global_stopper_triggered);

}  // namespace prfl
