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

#include <cstdint>
#include <map>

#include "prfl/density.hpp"
#include "prfl/model.hpp"

namespace prfl {

// The server's slot for one client: the latest model it returned plus the
// bookkeeping needed for staleness weighting and density control.
struct ClientRecord {
  ParamVector model;
  std::int64_t dispatch_round = 0;  // server round whose model it trained
  double arrival_time = 0.0;
  double round_time = 0.0;  // download + compute + upload, seconds
  TimeQueue queue;
  double density = 1.0;  // density the model was dispatched at
};

// Latest model per client, plus the current server round.
struct ServerBuffer {
  std::map<ClientId, ClientRecord> records;
  std::int64_t round = 0;
};

// Normalized aggregation weights, one per buffered client.
struct StalenessWeights {
  std::map<ClientId, double> weights;
};

// Stores `rec` as client i's record (overwriting any previous one) and pushes
// its round time onto the record's queue. The queue holds full-model
// equivalent times, round_time / density, so that the density controller
// compares clients independently of the density they currently run at.
ServerBuffer UpdateBuffer(ServerBuffer buf, ClientId i, ClientRecord rec);

// Freshness score (1 + n - n'(i))^(-beta), normalized over the buffer.
double FreshnessScore(std::int64_t round, std::int64_t dispatch_round,
                      double beta);
StalenessWeights ComputeStalenessWeights(const ServerBuffer& buf, double beta);

// Masked, staleness-weighted average. For each position the weighted sum of
// client values is divided by the weighted share of clients whose model is
// nonzero there; positions no client covers keep the previous global value.
// The result is then mixed with `prev` at global rate eta_g. An empty buffer
// returns `prev`.
ParamVector MaskFedAvg(const ServerBuffer& buf, const ParamVector& prev,
                       const StalenessWeights& wts, double eta_g);

// Plain weighted average of the buffered models, no mask normalization.
ParamVector FedAvg(const ServerBuffer& buf, const StalenessWeights& wts);

}  // namespace prfl
