// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deapsim/rng.hpp"

namespace deapsim {

using ChipId = int;

enum class TopologyKind { Torus2D, Torus3D, Mesh2D, Disconnected, Random, Custom };

/// File spelling, e.g. "2D-torus".
std::string_view to_string(TopologyKind kind);
TopologyKind topology_kind_from_string(std::string_view name);

struct ChipNode {
  ChipId chip_id = 0;
  std::vector<ChipId> connected_chip_id;
  std::vector<double> connected_chip_distance;

  bool operator==(const ChipNode&) const = default;
};

struct Topology {
  TopologyKind kind = TopologyKind::Custom;
  int dimension = 0;
  std::vector<ChipNode> chips;  // chips[i].chip_id == i

  int size() const { return static_cast<int>(chips.size()); }
  int degree(ChipId chip) const { return static_cast<int>(chips.at(chip).connected_chip_id.size()); }
  int undirected_link_count() const;

  /// Throws ParseError on id-range, list-length, self-link or symmetry violations.
  void validate() const;

  bool operator==(const Topology&) const = default;
};

/// Regular topologies with unit distances. Chips are numbered in row-major
/// boustrophedon order so a 2x2 torus is the ring 0-1-2-3. Torus2D and Mesh2D
/// need two dims, Torus3D three; Disconnected accepts any dims.
Topology generate_topology(TopologyKind kind, std::span<const int> dims);

/// Connected random graph: chip count uniform in [2, max_chips], a random
/// spanning tree, then extra edges while both endpoints have fewer than
/// link_budget links.
Topology random_topology(int max_chips, int link_budget, Rng& rng);

/// Per-link bandwidth in GB/s keyed by how many links the chip has.
struct LinkBandwidthTable {
  double nic_GBps = 1.0;
  std::map<int, double> by_link_count{{1, 180.0}, {3, 64.0}, {12, 25.0}};

  bool operator==(const LinkBandwidthTable&) const = default;
};

/// 0 links -> NIC bandwidth; otherwise the entry with the largest key <= links.
double link_bandwidth(const LinkBandwidthTable& table, int links_on_chip);

struct Path {
  double distance = 0.0;
  std::vector<ChipId> chips;
};

/// Minimum-distance path; ties go to the lexicographically smallest chip
/// sequence. nullopt when dst is unreachable.
std::optional<Path> shortest_path(const Topology& topology, ChipId src, ChipId dst);

/// All-pairs shortest distances, computed once per topology.
class RoutingTable {
 public:
  explicit RoutingTable(const Topology& topology);

  std::optional<double> distance(ChipId src, ChipId dst) const;
  int size() const { return size_; }

 private:
  int size_;
  std::vector<double> dist_;  // negative = unreachable
};

/// Text form: a header block {Topology, Size, Dimension} followed by one block
/// per chip {Chip_id, Connected_chip_id, Connected_chip_distance}.
std::string emit_topology(const Topology& topology);
Topology parse_topology(std::string_view text);

/// Short human label, e.g. "Torus2D:2x4" or "Random:17".
std::string describe_topology(TopologyKind kind, std::span<const int> dims);

}  // namespace deapsim
