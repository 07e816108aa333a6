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

#include "prfl/aggregate.hpp"

#include <cmath>

#include "prfl/error.hpp"

namespace prfl {

namespace {

void CheckWeightsCoverBuffer(const ServerBuffer& buf,
                             const StalenessWeights& wts) {
  Require(wts.weights.size() == buf.records.size(),
          "aggregation weights do not cover the buffer");
  for (const auto& [id, rec] : buf.records) {
    Require(wts.weights.count(id) == 1,
            "aggregation weights missing a buffered client");
  }
}

}  // namespace

ServerBuffer UpdateBuffer(ServerBuffer buf, ClientId i, ClientRecord rec) {
  Require(rec.dispatch_round <= buf.round,
          "UpdateBuffer: record dispatched in a future round");
  Require(rec.density > 0.0 && rec.density <= 1.0,
          "UpdateBuffer: record density outside (0, 1]");
  rec.queue.Push(rec.round_time / rec.density);
  buf.records[i] = std::move(rec);
  return buf;
}

double FreshnessScore(std::int64_t round, std::int64_t dispatch_round,
                      double beta) {
  const double age = 1.0 + static_cast<double>(round - dispatch_round);
  return std::pow(age, -beta);
}

StalenessWeights ComputeStalenessWeights(const ServerBuffer& buf,
                                         double beta) {
  Require(!buf.records.empty(), "ComputeStalenessWeights: empty buffer");
  Require(beta >= 0.0, "ComputeStalenessWeights: beta must be non-negative");
  StalenessWeights out;
  double total = 0.0;
  for (const auto& [id, rec] : buf.records) {
    const double s = FreshnessScore(buf.round, rec.dispatch_round, beta);
    out.weights[id] = s;
    total += s;
  }
  for (auto& [id, w] : out.weights) w /= total;
  return out;
}

ParamVector MaskFedAvg(const ServerBuffer& buf, const ParamVector& prev,
                       const StalenessWeights& wts, double eta_g) {
  Require(eta_g > 0.0 && eta_g <= 1.0, "MaskFedAvg: eta_g outside (0, 1]");
  if (buf.records.empty()) return prev;
  CheckWeightsCoverBuffer(buf, wts);

  const std::size_t len = prev.size();
  std::vector<double> w_acc(len, 0.0);
  std::vector<double> mask_acc(len, 0.0);
  for (const auto& [id, rec] : buf.records) {
    Require(rec.model.size() == len, "MaskFedAvg: model length mismatch");
    const double p = wts.weights.at(id);
    const auto v = rec.model.values();
    for (std::size_t k = 0; k < len; ++k) {
      w_acc[k] += p * v[k];
      if (v[k] != 0.0) mask_acc[k] += p;
    }
  }

  ParamVector out = prev;
  for (std::size_t k = 0; k < len; ++k) {
    // Uncovered positions keep prev bit-for-bit rather than through the mix.
    if (mask_acc[k] == 0.0) continue;
    out[k] = (1.0 - eta_g) * prev[k] + eta_g * (w_acc[k] / mask_acc[k]);
  }
  return out;
}

ParamVector FedAvg(const ServerBuffer& buf, const StalenessWeights& wts) {
  Require(!buf.records.empty(), "FedAvg: empty buffer");
  CheckWeightsCoverBuffer(buf, wts);
  const auto& first = buf.records.begin()->second.model;
  ParamVector out(first.shapes());
  for (const auto& [id, rec] : buf.records) {
    Require(rec.model.size() == out.size(), "FedAvg: model length mismatch");
    const double p = wts.weights.at(id);
    const auto v = rec.model.values();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += p * v[k];
  }
  return out;
}

}  // namespace prfl
