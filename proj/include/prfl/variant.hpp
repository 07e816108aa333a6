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

#include <string>
#include <vector>

namespace prfl {

enum class Variant {
  kPrFl,
  kFedAvg,
  kFedAsyn,
  kFedFix,
  kSynPrFl,
  kNoBuffPrFl,
  kFedAvgPrFl,
  kNoResPrFl,
  kNoRecoverPrFl,
};

// The switches a variant is made of. Exactly one aggregation schedule applies:
//   synchronous            barrier: wait for every client each round
//   thresholded + buffered fixed-interval ticks over the latest-model buffer
//   thresholded only       fixed-interval ticks over the models that arrived
//                          inside the window (FedFix)
//   neither                per-arrival mixing (FedAsyn style)
struct VariantToggles {
  bool buffered = true;
  bool thresholded = true;
  bool masked_aggregation = true;
  bool differential = true;
  bool recovery = true;
  bool synchronous = false;
  bool pruning = true;

  bool operator==(const VariantToggles&) const = default;
};

const std::vector<Variant>& AllVariants();
const char* VariantName(Variant v);
// Throws ConfigError for an unknown name.
Variant ParseVariant(const std::string& name);
VariantToggles TogglesFor(Variant v);

// Throws ConfigError for combinations the simulator has no semantics for.
void ValidateToggles(const VariantToggles& t);

}  // namespace prfl
