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
#include <span>
#include <utility>
#include <vector>

#include "prfl/density.hpp"
#include "prfl/model.hpp"

namespace prfl {

// Wire format of a delta packet, little-endian:
//   header: round u32 | position_in_order u32 | nonzero_count u32 | reserved u32
//   body:   nonzero_count x (position u32 | value f64)
inline constexpr std::size_t kPacketHeaderBytes = 16;
inline constexpr std::size_t kPacketEntryBytes = 12;

// Bytes needed to ship `entries` coordinates in the sparse wire format.
inline constexpr std::size_t SparseBytes(std::size_t entries) {
  return kPacketHeaderBytes + kPacketEntryBytes * entries;
}

// Per-client submodels ordered by ascending density. submodels[i] is the
// global model restricted to masks[i].
struct SubmodelSet {
  std::vector<ParamVector> submodels;
  std::vector<Mask> masks;
};

// Sparse difference between consecutive submodels. position_in_order is
// 1-based, matching the index ranges handed to clients.
struct DeltaPacket {
  std::uint32_t round = 0;
  std::uint32_t position_in_order = 0;
  std::vector<std::uint32_t> positions;
  std::vector<double> values;

  std::size_t nonzero_count() const { return positions.size(); }
  std::size_t byte_size() const { return SparseBytes(positions.size()); }
  bool operator==(const DeltaPacket&) const = default;
};

// The packets a client must fetch: always [1, hi].
struct IndexRange {
  std::size_t lo = 1;
  std::size_t hi = 1;
  bool operator==(const IndexRange&) const = default;
};

// Orders clients by ascending mask popcount (ties: ascending client id) and
// masks the global model for each. Returns the set and the client order.
std::pair<SubmodelSet, std::vector<ClientId>> BuildSubmodels(
    const ParamVector& global, const std::map<ClientId, Mask>& masks_by_client);

// Packet 1 carries the smallest submodel; packet i > 1 carries the positions
// in mask i but not in mask i - 1. Throws ContractViolation if the masks are
// not nested.
std::vector<DeltaPacket> EncodeDeltas(const SubmodelSet& set,
                                      std::uint32_t round = 0);

// Throws std::invalid_argument for a client that is not in `order`.
IndexRange IndexFor(const std::vector<ClientId>& order, ClientId i);

// Scatters packets lo..hi into a zero vector of the given shapes. Throws
// IncompleteDownload if any packet of the range is missing.
ParamVector Reconstruct(std::span<const DeltaPacket> packets, IndexRange range,
                        const std::vector<LayerShape>& shapes);

// The mask implied by packets lo..hi (their combined support).
Mask ReconstructMask(std::span<const DeltaPacket> packets, IndexRange range,
                     std::size_t len);

// Bytes the server sends with differential distribution (every packet once)
// and with one full sparse submodel per client.
std::size_t DifferentialBytes(std::span<const DeltaPacket> packets);
std::size_t NaiveBytes(const SubmodelSet& set);

std::vector<std::uint8_t> SerializePacket(const DeltaPacket& packet);
// Throws std::invalid_argument on a truncated or inconsistent buffer.
DeltaPacket ParsePacket(std::span<const std::uint8_t> bytes);

}  // namespace prfl
