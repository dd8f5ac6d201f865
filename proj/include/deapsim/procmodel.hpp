// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "deapsim/exec.hpp"
#include "deapsim/payload.hpp"
#include "deapsim/rng.hpp"

namespace deapsim {

/// Per-operation energy constants. Defaults are order-of-magnitude int8
/// figures, not measurements.
struct EnergyModel {
  double mac_J = 0.2e-12;
  double sram_byte_J = 1.0e-12;
  double dram_byte_J = 20.0e-12;
  double link_W = 1.0;  // constant power of one active inter-chip connection

  bool operator==(const EnergyModel&) const = default;
};

/// One systolic-array accelerator (Gemmini-like defaults at 700 MHz).
struct ChipConfig {
  Count pe_rows = 16;
  Count pe_cols = 16;
  double frequency_hz = 700e6;
  Count scratchpad_bytes = 256 * 1024;
  Count onchip_mem_bytes = 32ull * 1024 * 1024;
  double onchip_mem_bw_Bps = 100e9;
  double dram_bw_Bps = 16e9;
  Count element_bytes = 1;
  EnergyModel energy;

  /// Throws ConfigError on non-positive fields or scratchpad > on-chip memory.
  void validate() const;
  bool operator==(const ChipConfig&) const = default;
};

enum class Dim : std::uint8_t { M, N, K };

/// Tile loop nest, outermost first.
using LoopOrder = std::array<Dim, 3>;

const std::array<LoopOrder, 6>& all_loop_orders();
std::string to_string(const LoopOrder& order);  // e.g. "mnk"
LoopOrder loop_order_from_string(std::string_view text);

struct Mapping {
  Count tile_m = 1;
  Count tile_n = 1;
  Count tile_k = 1;
  LoopOrder loop_order{Dim::M, Dim::N, Dim::K};

  bool operator==(const Mapping&) const = default;
};

struct ProcCost {
  Count cycles = 0;
  double seconds = 0.0;  // cycles / frequency
  double energy_J = 0.0;

  bool operator==(const ProcCost&) const = default;
};

/// Intermediate quantities of the roofline model.
struct CostBreakdown {
  Count macs = 0;
  Count tiles = 0;
  Count compute_cycles = 0;
  Count memory_cycles = 0;
  Count bytes_moved = 0;
  Count dram_spill_bytes = 0;
  ProcCost cost;
};

/// Throws ConfigError naming the first violated bound.
void validate_mapping(const GemmShape& gemm, const ChipConfig& chip, const Mapping& mapping);

/// Roofline model of one GEMM tile schedule:
///   compute = tiles * (tile_k + pe_rows + pe_cols - 2)
///   memory  = ceil(bytes_moved * f / onchip_bw + spill * f / dram_bw)
///   cycles  = max(compute, memory)
/// where an operand is refetched each time a loop at or above its innermost
/// indexing loop advances, and output partial sums are written back and
/// re-read whenever the K loop sits above that point.
CostBreakdown analyze(const GemmShape& gemm, const ChipConfig& chip, const Mapping& mapping);

/// NOP payloads cost nothing.
ProcCost process_cost(const WorkloadPayload& payload, const ChipConfig& chip, const Mapping& mapping);

/// Tile sizes of the form ceil(dim / count) that do not exceed `bound`, ascending.
std::vector<Count> balanced_tile_sizes(Count dim, Count bound);

/// Every balanced mapping that fits the array and the scratchpad.
std::vector<Mapping> enumerate_mapspace(const WorkloadPayload& payload, const ChipConfig& chip);

/// Uniform over balanced tile sizes within bounds and over loop orders.
/// Throws ConfigError when not even a 1x1x1 tile fits in the scratchpad.
Mapping random_mapping(const WorkloadPayload& payload, const ChipConfig& chip, Rng& rng);

struct MappingSearchOptions {
  std::size_t samples = 1000;
  /// Sample the enumerated mapspace without replacement instead of with it.
  bool exhaustive_dedup = false;
  Exec exec = Exec::Serial;
};

struct MappingResult {
  Mapping mapping;
  ProcCost cost;
  std::size_t sample_index = 0;
};

/// Lowest cycles over `samples` random mappings; ties by energy, then sample index.
MappingResult best_mapping(const WorkloadPayload& payload, const ChipConfig& chip, Rng& rng,
                           const MappingSearchOptions& options = {});

}  // namespace deapsim
