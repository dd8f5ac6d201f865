// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "deapsim/engine.hpp"
#include "deapsim/exec.hpp"
#include "deapsim/partition.hpp"
#include "deapsim/procmodel.hpp"
#include "deapsim/topology.hpp"
#include "deapsim/workload.hpp"

namespace deapsim {

/// A pruned layer graph plus how to split it for a given chip count.
struct Workload {
  std::string name;
  LayerGraph graph;
  Count microbatches = 1;
  /// 0 shards every layer across all chips of the candidate system.
  Count tensor_shards = 0;
  Count bytes_per_element = 1;

  Count shards_for(int chips) const { return tensor_shards == 0 ? static_cast<Count>(std::max(chips, 1)) : tensor_shards; }
};

Workload make_workload(const LLMConfig& config, PruneOptions prune = {}, Count microbatches = 1,
                       Count tensor_shards = 0, std::string name = {});

struct TopologySpace {
  enum class Mode { Random, Standard };
  Mode mode = Mode::Random;
  int max_chips = 50;
  int link_budget = 4;  // random mode
  std::vector<TopologyKind> kinds{TopologyKind::Torus2D, TopologyKind::Torus3D, TopologyKind::Mesh2D};
};

struct HwSpace {
  ChipConfig base;  // fields not searched come from here
  std::vector<Count> pe_dims{4, 8, 16, 32};
  std::vector<Count> scratchpad_bytes{64 * 1024, 128 * 1024, 256 * 1024, 512 * 1024};
  std::vector<double> onchip_mem_bw_Bps{25e9, 50e9, 100e9, 200e9};
  std::vector<Count> onchip_mem_bytes{32ull * 1024 * 1024};
};

struct SearchSpace {
  TopologySpace topology;
  HwSpace hw;
  std::size_t mapping_samples = 1000;
  std::size_t hw_samples = 200;
  std::size_t topology_candidates = 250;
  std::size_t outer_iters = 1;
  std::uint64_t seed = 0;
  LinkBandwidthTable link_table;

  /// Throws ConfigError on empty choice lists, zero budgets or max_chips > 50 in random mode.
  void validate() const;
};

/// A fully evaluated design point.
struct Evaluation {
  bool feasible = false;
  std::string error;  // why the point is infeasible
  std::string descriptor;
  Topology topology;
  ChipConfig chip;
  std::vector<Task> tasks;
  Schedule schedule;
  SimReport report;

  /// Total cycles, or +inf when infeasible.
  double latency_cycles() const;
};

/// Partition for the topology's chip count, schedule, simulate. Simulation
/// and configuration failures yield an infeasible Evaluation instead of throwing.
Evaluation evaluate_point(const Workload& workload, const Topology& topology, const ChipConfig& chip,
                          const CostProvider& provider, const SearchSpace& space, std::string descriptor = {});

struct TraceEntry {
  std::size_t candidate = 0;
  std::string descriptor;
  double latency_cycles = 0.0;  // +inf when infeasible
  double power_W = 0.0;
  double best_so_far = 0.0;
};

struct DSETrace {
  std::vector<TraceEntry> entries;

  /// Index of the first entry attaining the minimum latency; nullopt if none is feasible.
  std::optional<std::size_t> best_index() const;
};

/// Columns: candidate,descriptor,latency_cycles,log10_latency,power_W,best_so_far.
void write_trace_csv(std::ostream& out, const DSETrace& trace);

struct DSEResult {
  DSETrace trace;
  std::optional<Evaluation> best;
  std::size_t points_evaluated = 0;   // (topology, chip config) simulations
  std::size_t cost_evaluations = 0;  // distinct (payload, chip) pricings performed
};

/// Draws the index-th topology of the space (pure in seed and index).
Topology sample_topology(const TopologySpace& space, std::uint64_t seed, std::size_t index, std::string* descriptor = nullptr);

/// Draws one chip configuration from the space. A set `fixed_memory` pins onchip_mem_bytes.
ChipConfig sample_chip_config(const HwSpace& space, std::uint64_t seed, std::size_t index,
                              std::optional<Count> fixed_memory = std::nullopt);

/// Random topology search with the base chip configuration.
DSEResult search_topologies(const Workload& workload, const SearchSpace& space, Exec exec = Exec::Serial);

/// No-Connection, 2D torus, 3D torus and 2D mesh with `chip_count` chips.
DSEResult compare_standard_topologies(const Workload& workload, int chip_count, const SearchSpace& space,
                                      Exec exec = Exec::Serial);

/// Grid shape closest to square (rows <= cols) / cube for n chips.
std::vector<int> squarest_2d(int n);
std::vector<int> cubest_3d(int n);

/// All ordered (r, c) with r * c == n.
std::vector<std::vector<int>> factorizations_2d(int n);

struct SweepRow {
  int chips = 0;
  std::vector<std::pair<std::string, double>> shapes;  // descriptor, latency cycles
  std::size_t best_shape = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  DSETrace trace;  // one entry per chip count, best shape
};

/// For each chip count 1..max_chips, every r x c shape of `kind`; keeps the best.
SweepResult sweep_chip_count(const Workload& workload, TopologyKind kind, int max_chips, const SearchSpace& space,
                             Exec exec = Exec::Serial);

enum class FlowOrder { MemoryFirst, TopologyFirst };

/// Smallest power-of-two shard count whose largest task working set fits in `memory_bytes`.
Count shards_for_memory(const Workload& workload, Count memory_bytes);

/// Co-design loop. MemoryFirst fixes on-chip memory and derives the shard count
/// from it before sampling a topology; TopologyFirst samples the topology
/// first and shards across all its chips. Each outer iteration then searches
/// hw_samples chip configurations, each with a mapping_samples mapping search.
DSEResult dual_flow(FlowOrder order, const SearchSpace& space, const Workload& workload, Exec exec = Exec::Serial);

}  // namespace deapsim
