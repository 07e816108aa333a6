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

#include "prfl/distribute.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>
#include <string>

#include "prfl/error.hpp"

namespace prfl {

namespace {

void CheckRange(std::span<const DeltaPacket> packets, IndexRange range) {
  if (range.lo != 1 || range.hi < range.lo) {
    throw std::invalid_argument("index range must be [1, hi] with hi >= 1");
  }
  if (range.hi > packets.size()) {
    throw IncompleteDownload("have " + std::to_string(packets.size()) +
                             " packets, range needs " +
                             std::to_string(range.hi));
  }
  for (std::size_t j = 0; j < range.hi; ++j) {
    if (packets[j].position_in_order != j + 1) {
      throw IncompleteDownload("packet " + std::to_string(j + 1) +
                               " missing from download");
    }
  }
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void PutF64(std::vector<std::uint8_t>& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t GetU32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[at + b]) << (8 * b);
  return v;
}

double GetF64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(in[at + b]) << (8 * b);
  return std::bit_cast<double>(v);
}

}  // namespace

std::pair<SubmodelSet, std::vector<ClientId>> BuildSubmodels(
    const ParamVector& global,
    const std::map<ClientId, Mask>& masks_by_client) {
  std::vector<std::pair<std::size_t, ClientId>> ranked;
  for (const auto& [id, mask] : masks_by_client) {
    Require(mask.size() == global.size(), "BuildSubmodels: mask length mismatch");
    ranked.emplace_back(mask.Count(), id);
  }
  std::sort(ranked.begin(), ranked.end());

  SubmodelSet set;
  std::vector<ClientId> order;
  for (const auto& [count, id] : ranked) {
    const Mask& mask = masks_by_client.at(id);
    set.submodels.push_back(ApplyMask(global, mask));
    set.masks.push_back(mask);
    order.push_back(id);
  }
  return {std::move(set), std::move(order)};
}

std::vector<DeltaPacket> EncodeDeltas(const SubmodelSet& set,
                                      std::uint32_t round) {
  Require(set.submodels.size() == set.masks.size(),
          "EncodeDeltas: submodel/mask count mismatch");
  std::vector<DeltaPacket> packets;
  packets.reserve(set.masks.size());
  for (std::size_t i = 0; i < set.masks.size(); ++i) {
    const Mask& mask = set.masks[i];
    const ParamVector& sub = set.submodels[i];
    Require(sub.size() == mask.size(), "EncodeDeltas: submodel length mismatch");
    const Mask* below = i > 0 ? &set.masks[i - 1] : nullptr;
    if (below != nullptr) {
      Require(below->IsSubsetOf(mask),
              "EncodeDeltas: masks are not nested at position " +
                  std::to_string(i + 1));
    }
    DeltaPacket p;
    p.round = round;
    p.position_in_order = static_cast<std::uint32_t>(i + 1);
    for (std::size_t k = 0; k < mask.size(); ++k) {
      if (!mask[k] || (below != nullptr && (*below)[k])) continue;
      p.positions.push_back(static_cast<std::uint32_t>(k));
      // The previous submodel is +0.0 here, so the difference is sub[k].
      p.values.push_back(below != nullptr ? sub[k] - set.submodels[i - 1][k]
                                          : sub[k]);
    }
    packets.push_back(std::move(p));
  }
  return packets;
}

IndexRange IndexFor(const std::vector<ClientId>& order, ClientId i) {
  auto it = std::find(order.begin(), order.end(), i);
  if (it == order.end()) {
    throw std::invalid_argument("IndexFor: client " + std::to_string(i) +
                                " not in distribution order");
  }
  return {1, static_cast<std::size_t>(it - order.begin()) + 1};
}

ParamVector Reconstruct(std::span<const DeltaPacket> packets, IndexRange range,
                        const std::vector<LayerShape>& shapes) {
  CheckRange(packets, range);
  ParamVector out(shapes);
  for (std::size_t j = 0; j < range.hi; ++j) {
    const auto& p = packets[j];
    for (std::size_t e = 0; e < p.positions.size(); ++e) {
      Require(p.positions[e] < out.size(), "Reconstruct: position out of range");
      // Supports are disjoint, so assignment is the sum and keeps the sign of
      // zero intact.
      out[p.positions[e]] = p.values[e];
    }
  }
  return out;
}

Mask ReconstructMask(std::span<const DeltaPacket> packets, IndexRange range,
                     std::size_t len) {
  CheckRange(packets, range);
  Mask mask(len, false);
  for (std::size_t j = 0; j < range.hi; ++j) {
    for (std::uint32_t pos : packets[j].positions) {
      Require(pos < len, "ReconstructMask: position out of range");
      mask.Set(pos, true);
    }
  }
  return mask;
}

std::size_t DifferentialBytes(std::span<const DeltaPacket> packets) {
  std::size_t total = 0;
  for (const auto& p : packets) total += p.byte_size();
  return total;
}

std::size_t NaiveBytes(const SubmodelSet& set) {
  std::size_t total = 0;
  for (const auto& m : set.masks) total += SparseBytes(m.Count());
  return total;
}

std::vector<std::uint8_t> SerializePacket(const DeltaPacket& packet) {
  Require(packet.positions.size() == packet.values.size(),
          "SerializePacket: positions/values length mismatch");
  std::vector<std::uint8_t> out;
  out.reserve(packet.byte_size());
  PutU32(out, packet.round);
  PutU32(out, packet.position_in_order);
  PutU32(out, static_cast<std::uint32_t>(packet.nonzero_count()));
  PutU32(out, 0);
  for (std::size_t e = 0; e < packet.positions.size(); ++e) {
    PutU32(out, packet.positions[e]);
    PutF64(out, packet.values[e]);
  }
  return out;
}

DeltaPacket ParsePacket(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPacketHeaderBytes) {
    throw std::invalid_argument("ParsePacket: truncated header");
  }
  DeltaPacket p;
  p.round = GetU32(bytes, 0);
  p.position_in_order = GetU32(bytes, 4);
  const std::size_t count = GetU32(bytes, 8);
  if (bytes.size() != SparseBytes(count)) {
    throw std::invalid_argument("ParsePacket: body size does not match count");
  }
  p.positions.reserve(count);
  p.values.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    const std::size_t at = kPacketHeaderBytes + e * kPacketEntryBytes;
    p.positions.push_back(GetU32(bytes, at));
    p.values.push_back(GetF64(bytes, at + 4));
  }
  return p;
}

}  // namespace prfl
