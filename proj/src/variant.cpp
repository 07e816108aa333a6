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

#include "prfl/variant.hpp"

#include "prfl/error.hpp"

namespace prfl {

const std::vector<Variant>& AllVariants() {
  static const std::vector<Variant> all = {
      Variant::kPrFl,       Variant::kFedAvg,     Variant::kFedAsyn,
      Variant::kFedFix,     Variant::kSynPrFl,    Variant::kNoBuffPrFl,
      Variant::kFedAvgPrFl, Variant::kNoResPrFl,  Variant::kNoRecoverPrFl,
  };
  return all;
}

const char* VariantName(Variant v) {
  switch (v) {
    case Variant::kPrFl: return "PR-FL";
    case Variant::kFedAvg: return "FedAvg";
    case Variant::kFedAsyn: return "FedAsyn";
    case Variant::kFedFix: return "FedFix";
    case Variant::kSynPrFl: return "syn-PR-FL";
    case Variant::kNoBuffPrFl: return "nobuff-PR-FL";
    case Variant::kFedAvgPrFl: return "fedavg-PR-FL";
    case Variant::kNoResPrFl: return "noRes-PR-FL";
    case Variant::kNoRecoverPrFl: return "noRecover-PR-FL";
  }
  return "?";
}

Variant ParseVariant(const std::string& name) {
  for (Variant v : AllVariants()) {
    if (name == VariantName(v)) return v;
  }
  throw ConfigError("unknown variant '" + name + "'");
}

VariantToggles TogglesFor(Variant v) {
  VariantToggles t;  // PR-FL
  switch (v) {
    case Variant::kPrFl:
      break;
    case Variant::kSynPrFl:
      t.thresholded = false;
      t.synchronous = true;
      break;
    case Variant::kNoBuffPrFl:
      t.buffered = false;
      t.thresholded = false;
      break;
    case Variant::kFedAvgPrFl:
      t.masked_aggregation = false;
      break;
    case Variant::kNoResPrFl:
      t.differential = false;
      break;
    case Variant::kNoRecoverPrFl:
      t.recovery = false;
      break;
    case Variant::kFedAvg:
      t = {true, false, false, false, false, true, false};
      break;
    case Variant::kFedAsyn:
      t = {false, false, false, false, false, false, false};
      break;
    case Variant::kFedFix:
      t = {false, true, false, false, false, false, false};
      break;
  }
  return t;
}

void ValidateToggles(const VariantToggles& t) {
  if (t.synchronous && t.thresholded) {
    throw ConfigError("toggles: a synchronous barrier cannot also use ticks");
  }
  if (t.buffered && !t.synchronous && !t.thresholded) {
    throw ConfigError("toggles: the model buffer needs ticks or a barrier");
  }
  if (t.recovery && !t.pruning) {
    throw ConfigError("toggles: recovery requires pruning");
  }
  if (t.thresholded && !t.buffered && (t.pruning || t.masked_aggregation)) {
    throw ConfigError("toggles: windowed aggregation only supports dense models");
  }
}

}  // namespace prfl
