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

#include "prfl/density.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "prfl/error.hpp"

namespace prfl {

namespace {

// Marks the `keep` largest-|w| positions of values[begin, end).
void KeepTopMagnitude(std::span<const double> values, std::size_t begin,
                      std::size_t end, std::size_t keep, Mask& mask) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  auto before = [&](std::size_t a, std::size_t b) {
    const double ma = std::fabs(values[a]);
    const double mb = std::fabs(values[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  };
  keep = std::min(keep, idx.size());
  std::nth_element(idx.begin(), idx.begin() + keep, idx.end(), before);
  for (std::size_t r = 0; r < keep; ++r) mask.Set(idx[r], true);
}

}  // namespace

TimeQueue::TimeQueue(std::size_t capacity) : capacity_(capacity) {
  Require(capacity > 0, "TimeQueue: capacity must be positive");
}

void TimeQueue::Push(double seconds) {
  Require(seconds > 0.0 && std::isfinite(seconds),
          "TimeQueue: round times must be positive");
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(seconds);
}

std::optional<double> MeanRoundTime(const TimeQueue& q) {
  if (q.empty()) return std::nullopt;
  double sum = 0.0;
  for (double t : q.entries()) sum += t;
  return sum / static_cast<double>(q.size());
}

double ComputeDensity(const std::map<ClientId, double>& all_means, ClientId i,
                      const DensityState& state) {
  Require(!all_means.empty(), "ComputeDensity: no client means");
  auto it = all_means.find(i);
  Require(it != all_means.end(), "ComputeDensity: client has no mean");
  double fastest = it->second;
  for (const auto& [id, mean] : all_means) {
    Require(mean > 0.0, "ComputeDensity: non-positive mean round time");
    fastest = std::min(fastest, mean);
  }
  const double ratio = fastest / it->second;
  return std::clamp(ratio, state.rho_min, 1.0);
}

std::size_t KeptCount(double rho, std::size_t len) {
  Require(rho > 0.0 && rho <= 1.0, "KeptCount: density outside (0, 1]");
  // Absorb representation error so that e.g. 0.3 * 10 keeps 3, not 4.
  const double exact = rho * static_cast<double>(len);
  auto keep = static_cast<std::size_t>(std::ceil(exact - 1e-9 * exact));
  return std::clamp<std::size_t>(keep, len == 0 ? 0 : 1, len);
}

Mask PruneToDensity(const ParamVector& w, double rho, PruningPolicy policy) {
  Mask mask(w.size(), false);
  if (rho >= 1.0) return Mask(w.size(), true);
  const auto values = w.values();
  if (policy == PruningPolicy::kGlobalMagnitude) {
    KeepTopMagnitude(values, 0, w.size(), KeptCount(rho, w.size()), mask);
    return mask;
  }
  std::size_t offset = 0;
  for (const auto& shape : w.shapes()) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    KeepTopMagnitude(values, offset, offset + n, KeptCount(rho, n), mask);
    offset += n;
  }
  return mask;
}

std::pair<EarlyStopper, bool> ObserveAccuracy(EarlyStopper s, double acc) {
  if (acc > s.best + s.min_delta) {
    s.best = acc;
    s.stall_count = 0;
    return {s, false};
  }
  ++s.stall_count;
  if (s.stall_count >= s.patience) {
    s.stall_count = 0;
    return {s, true};
  }
  return {s, false};
}

DensityState RecoverDensity(DensityState state) {
  if (state.rho >= 1.0) return state;
  state.rho_min = std::max(state.rho_min,
                           std::min(state.rho + state.delta_rho, 1.0));
  state.rho = std::max(state.rho, state.rho_min);
  return state;
}

bool ShouldTerminate(const std::map<ClientId, double>& densities,
                     bool global_stopper_triggered) {
  if (!global_stopper_triggered) return false;
  return std::all_of(densities.begin(), densities.end(),
                     [](const auto& kv) { return kv.second >= 1.0; });
}

}  // namespace prfl
