// SPDX-License-Identifier: Apache-2.0
#include "deapsim/procmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "deapsim/error.hpp"

namespace deapsim {
namespace {

Count ceil_div(Count a, Count b) { return (a + b - 1) / b; }

std::size_t position_of(const LoopOrder& order, Dim d) {
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), d) - order.begin());
}

// How many times an operand indexed by `dims` is streamed in full, given the
// per-dimension tile counts. Loops with a single trip never change a tile.
Count refetch_factor(const LoopOrder& order, const std::array<Count, 3>& trips, std::initializer_list<Dim> dims) {
  long deepest = -1;
  for (Dim d : dims) {
    if (trips[static_cast<std::size_t>(d)] > 1) deepest = std::max(deepest, static_cast<long>(position_of(order, d)));
  }
  Count factor = 1;
  for (long p = 0; p < deepest; ++p) {
    const Dim d = order[static_cast<std::size_t>(p)];
    if (std::find(dims.begin(), dims.end(), d) == dims.end()) factor *= trips[static_cast<std::size_t>(d)];
  }
  return factor;
}

struct SearchBounds {
  GemmShape gemm;
  Count capacity_elems;
  std::vector<Count> m_sizes;
};

// Largest tile_n for a given tile_m with tile_k = 1.
Count max_tile_n(const SearchBounds& b, const ChipConfig& chip, Count tm) {
  if (b.capacity_elems < tm) return 0;
  const Count by_scratch = (b.capacity_elems - tm) / (tm + 1);
  return std::min({b.gemm.out, chip.pe_cols, by_scratch});
}

Count max_tile_k(const SearchBounds& b, Count tm, Count tn) {
  if (b.capacity_elems < tm * tn) return 0;
  return std::min(b.gemm.in, (b.capacity_elems - tm * tn) / (tm + tn));
}

SearchBounds search_bounds(const GemmShape& gemm, const ChipConfig& chip) {
  SearchBounds b{gemm, chip.scratchpad_bytes / chip.element_bytes, {}};
  if (b.capacity_elems < 3) {
    throw ConfigError(fmt::format("scratchpad of {} bytes cannot hold a 1x1x1 tile", chip.scratchpad_bytes));
  }
  for (Count tm : balanced_tile_sizes(gemm.rows, chip.pe_rows)) {
    if (max_tile_n(b, chip, tm) >= 1) b.m_sizes.push_back(tm);
  }
  return b;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[uniform_int<std::size_t>(rng, 0, v.size() - 1)];
}

Mapping sample_mapping(const SearchBounds& b, const ChipConfig& chip, Rng& rng) {
  Mapping m;
  m.tile_m = pick(b.m_sizes, rng);
  m.tile_n = pick(balanced_tile_sizes(b.gemm.out, max_tile_n(b, chip, m.tile_m)), rng);
  m.tile_k = pick(balanced_tile_sizes(b.gemm.in, max_tile_k(b, m.tile_m, m.tile_n)), rng);
  m.loop_order = all_loop_orders()[uniform_int<std::size_t>(rng, 0, all_loop_orders().size() - 1)];
  return m;
}

bool better(const ProcCost& a, const ProcCost& b) {
  if (a.cycles != b.cycles) return a.cycles < b.cycles;
  return a.energy_J < b.energy_J;
}

}  // namespace

void ChipConfig::validate() const {
  if (pe_rows < 1 || pe_cols < 1) throw ConfigError("PE array dims must be >= 1");
  if (!(frequency_hz > 0)) throw ConfigError("frequency_hz must be positive");
  if (scratchpad_bytes < 1 || onchip_mem_bytes < 1) throw ConfigError("memory sizes must be >= 1");
  if (scratchpad_bytes > onchip_mem_bytes) throw ConfigError("scratchpad_bytes must not exceed onchip_mem_bytes");
  if (!(onchip_mem_bw_Bps > 0) || !(dram_bw_Bps > 0)) throw ConfigError("bandwidths must be positive");
  if (element_bytes < 1) throw ConfigError("element_bytes must be >= 1");
  if (energy.mac_J < 0 || energy.sram_byte_J < 0 || energy.dram_byte_J < 0 || energy.link_W < 0) {
    throw ConfigError("energy constants must be non-negative");
  }
}

const std::array<LoopOrder, 6>& all_loop_orders() {
  static const std::array<LoopOrder, 6> orders{{
      {Dim::M, Dim::N, Dim::K},
      {Dim::M, Dim::K, Dim::N},
      {Dim::N, Dim::M, Dim::K},
      {Dim::N, Dim::K, Dim::M},
      {Dim::K, Dim::M, Dim::N},
      {Dim::K, Dim::N, Dim::M},
  }};
  return orders;
}

std::string to_string(const LoopOrder& order) {
  std::string s;
  for (Dim d : order) s += d == Dim::M ? 'm' : d == Dim::N ? 'n' : 'k';
  return s;
}

LoopOrder loop_order_from_string(std::string_view text) {
  for (const auto& order : all_loop_orders()) {
    if (to_string(order) == text) return order;
  }
  throw ParseError("invalid loop order '" + std::string(text) + "'");
}

void validate_mapping(const GemmShape& gemm, const ChipConfig& chip, const Mapping& mapping) {
  if (mapping.tile_m < 1 || mapping.tile_n < 1 || mapping.tile_k < 1) throw ConfigError("tile sizes must be >= 1");
  if (mapping.tile_m > gemm.rows) throw ConfigError(fmt::format("tile_m {} exceeds rows {}", mapping.tile_m, gemm.rows));
  if (mapping.tile_n > gemm.out) throw ConfigError(fmt::format("tile_n {} exceeds out features {}", mapping.tile_n, gemm.out));
  if (mapping.tile_k > gemm.in) throw ConfigError(fmt::format("tile_k {} exceeds in features {}", mapping.tile_k, gemm.in));
  if (mapping.tile_m > chip.pe_rows) throw ConfigError(fmt::format("tile_m {} exceeds pe_rows {}", mapping.tile_m, chip.pe_rows));
  if (mapping.tile_n > chip.pe_cols) throw ConfigError(fmt::format("tile_n {} exceeds pe_cols {}", mapping.tile_n, chip.pe_cols));
  const Count working_set = (mapping.tile_m * mapping.tile_k + mapping.tile_k * mapping.tile_n +
                             mapping.tile_m * mapping.tile_n) * chip.element_bytes;
  if (working_set > chip.scratchpad_bytes) {
    throw ConfigError(fmt::format("tile working set {} B exceeds scratchpad {} B", working_set, chip.scratchpad_bytes));
  }
  const auto& o = mapping.loop_order;
  if (o[0] == o[1] || o[0] == o[2] || o[1] == o[2]) throw ConfigError("loop order must be a permutation of m, n, k");
}

CostBreakdown analyze(const GemmShape& gemm, const ChipConfig& chip, const Mapping& mapping) {
  validate_mapping(gemm, chip, mapping);
  const std::array<Count, 3> trips{ceil_div(gemm.rows, mapping.tile_m), ceil_div(gemm.out, mapping.tile_n),
                                   ceil_div(gemm.in, mapping.tile_k)};
  const auto& order = mapping.loop_order;

  CostBreakdown r;
  r.macs = gemm.rows * gemm.out * gemm.in;
  r.tiles = trips[0] * trips[1] * trips[2];
  r.compute_cycles = r.tiles * (mapping.tile_k + chip.pe_rows + chip.pe_cols - 2);

  const Count a_elems = gemm.rows * gemm.in * refetch_factor(order, trips, {Dim::M, Dim::K});
  const Count b_elems = gemm.in * gemm.out * refetch_factor(order, trips, {Dim::K, Dim::N});
  const Count c_passes = refetch_factor(order, trips, {Dim::M, Dim::N});
  const Count c_elems = gemm.rows * gemm.out * (2 * c_passes - 1);
  r.bytes_moved = (a_elems + b_elems + c_elems) * chip.element_bytes;

  const Count footprint = (gemm.rows * gemm.in + gemm.in * gemm.out + gemm.rows * gemm.out) * chip.element_bytes;
  r.dram_spill_bytes = footprint > chip.onchip_mem_bytes ? footprint - chip.onchip_mem_bytes : 0;

  const double mem_seconds = static_cast<double>(r.bytes_moved) / chip.onchip_mem_bw_Bps +
                             static_cast<double>(r.dram_spill_bytes) / chip.dram_bw_Bps;
  r.memory_cycles = static_cast<Count>(std::ceil(mem_seconds * chip.frequency_hz));

  r.cost.cycles = std::max(r.compute_cycles, r.memory_cycles);
  r.cost.seconds = static_cast<double>(r.cost.cycles) / chip.frequency_hz;
  r.cost.energy_J = static_cast<double>(r.macs) * chip.energy.mac_J +
                    static_cast<double>(r.bytes_moved) * chip.energy.sram_byte_J +
                    static_cast<double>(r.dram_spill_bytes) * chip.energy.dram_byte_J;
  return r;
}

ProcCost process_cost(const WorkloadPayload& payload, const ChipConfig& chip, const Mapping& mapping) {
  if (payload.is_nop()) return {};
  return analyze(gemm_shape(payload), chip, mapping).cost;
}

std::vector<Count> balanced_tile_sizes(Count dim, Count bound) {
  // Walk the O(sqrt(dim)) distinct values of ceil(dim / c), largest first.
  std::vector<Count> sizes;
  Count c = 1;
  while (c <= dim) {
    const Count v = ceil_div(dim, c);
    if (v <= bound) sizes.push_back(v);
    if (v == 1) break;
    c = (dim - 1) / (v - 1) + 1;
  }
  std::reverse(sizes.begin(), sizes.end());
  return sizes;
}

std::vector<Mapping> enumerate_mapspace(const WorkloadPayload& payload, const ChipConfig& chip) {
  const SearchBounds b = search_bounds(gemm_shape(payload), chip);
  std::vector<Mapping> space;
  for (Count tm : b.m_sizes) {
    for (Count tn : balanced_tile_sizes(b.gemm.out, max_tile_n(b, chip, tm))) {
      for (Count tk : balanced_tile_sizes(b.gemm.in, max_tile_k(b, tm, tn))) {
        for (const auto& order : all_loop_orders()) space.push_back({tm, tn, tk, order});
      }
    }
  }
  return space;
}

Mapping random_mapping(const WorkloadPayload& payload, const ChipConfig& chip, Rng& rng) {
  return sample_mapping(search_bounds(gemm_shape(payload), chip), chip, rng);
}

MappingResult best_mapping(const WorkloadPayload& payload, const ChipConfig& chip, Rng& rng,
                           const MappingSearchOptions& options) {
  if (options.samples < 1) throw ConfigError("mapping samples must be >= 1");
  if (payload.is_nop()) return {};
  const GemmShape gemm = gemm_shape(payload);

  std::vector<Mapping> candidates;
  if (options.exhaustive_dedup) {
    candidates = enumerate_mapspace(payload, chip);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    if (candidates.size() > options.samples) candidates.resize(options.samples);
  } else {
    const SearchBounds b = search_bounds(gemm, chip);
    candidates.reserve(options.samples);
    for (std::size_t i = 0; i < options.samples; ++i) candidates.push_back(sample_mapping(b, chip, rng));
  }

  if (options.exec == Exec::Serial) {
    MappingResult best{candidates.front(), analyze(gemm, chip, candidates.front()).cost, 0};
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      const ProcCost c = analyze(gemm, chip, candidates[i]).cost;
      if (better(c, best.cost)) best = {candidates[i], c, i};
    }
    return best;
  }

  std::vector<ProcCost> costs(candidates.size());
  for_each_index(Exec::Parallel, candidates.size(),
                 [&](std::size_t i) { costs[i] = analyze(gemm, chip, candidates[i]).cost; });
  std::size_t best = 0;
  for (std::size_t i = 1; i < costs.size(); ++i) {
    if (better(costs[i], costs[best])) best = i;
  }
  return {candidates[best], costs[best], best};
}

}  // namespace deapsim
