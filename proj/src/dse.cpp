// SPDX-License-Identifier: Apache-2.0
#include "deapsim/dse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>

#include <fmt/format.h>

#include "deapsim/cost_provider.hpp"
#include "deapsim/csv.hpp"
#include "deapsim/error.hpp"
#include "deapsim/scheduler.hpp"

namespace deapsim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <typename T>
const T& pick(const std::vector<T>& choices, Rng& rng) {
  return choices[uniform_int<std::size_t>(rng, 0, choices.size() - 1)];
}

std::string describe_chip(const ChipConfig& c) {
  return fmt::format("pe{}x{}/sp{}K/bw{}G/mem{}M", c.pe_rows, c.pe_cols, c.scratchpad_bytes / 1024,
                     c.onchip_mem_bw_Bps / 1e9, c.onchip_mem_bytes / (1024 * 1024));
}

// Lightweight per-candidate record; full bundles are rebuilt only for the winner.
struct PointSummary {
  std::string descriptor;
  Topology topology;
  ChipConfig chip;
  double latency_cycles = kInf;
  double power_W = 0.0;
};

PointSummary summarize(const Evaluation& ev) {
  return {ev.descriptor, ev.topology, ev.chip, ev.latency_cycles(), ev.feasible ? ev.report.average_power_W() : 0.0};
}

void append_trace(DSETrace& trace, const std::vector<PointSummary>& points) {
  double best = trace.entries.empty() ? kInf : trace.entries.back().best_so_far;
  for (const PointSummary& p : points) {
    best = std::min(best, p.latency_cycles);
    trace.entries.push_back({trace.entries.size(), p.descriptor, p.latency_cycles, p.power_W, best});
  }
}

std::unique_ptr<CostProvider> analytical(const SearchSpace& space) {
  return std::make_unique<AnalyticalCostProvider>(MappingSearchOptions{space.mapping_samples, false, Exec::Serial});
}

// Evaluates fixed points in parallel, then re-evaluates the winner for its full bundle.
DSEResult evaluate_all(const Workload& workload, const std::vector<PointSummary>& points, const SearchSpace& space,
                       Exec exec) {
  const auto inner = analytical(space);
  MemoizingCostProvider provider(*inner);
  std::vector<PointSummary> out(points.size());
  for_each_index(exec, points.size(), [&](std::size_t i) {
    out[i] = summarize(evaluate_point(workload, points[i].topology, points[i].chip, provider, space,
                                      points[i].descriptor));
  });
  DSEResult result;
  append_trace(result.trace, out);
  if (auto b = result.trace.best_index()) {
    result.best = evaluate_point(workload, out[*b].topology, out[*b].chip, provider, space, out[*b].descriptor);
  }
  result.points_evaluated = points.size();
  result.cost_evaluations = provider.evaluations();
  return result;
}

void validate_workload(const Workload& workload) {
  if (workload.graph.layers.empty()) throw ConfigError("workload has no layers");
  if (workload.microbatches < 1) throw ConfigError("microbatches must be >= 1");
  if (workload.bytes_per_element < 1) throw ConfigError("bytes per element must be >= 1");
}

}  // namespace

Workload make_workload(const LLMConfig& config, PruneOptions prune, Count microbatches, Count tensor_shards,
                       std::string name) {
  Workload w;
  w.name = std::move(name);
  w.graph = prune_inference_layers(build_llm(config), prune);
  w.microbatches = microbatches;
  w.tensor_shards = tensor_shards;
  return w;
}

void SearchSpace::validate() const {
  if (mapping_samples < 1) throw ConfigError("mapping_samples must be >= 1");
  if (hw_samples < 1) throw ConfigError("hw_samples must be >= 1");
  if (topology_candidates < 1) throw ConfigError("topology_candidates must be >= 1");
  if (outer_iters < 1) throw ConfigError("outer_iters must be >= 1");
  if (topology.max_chips < 2) throw ConfigError("max_chips must be >= 2");
  if (topology.mode == TopologySpace::Mode::Random) {
    if (topology.max_chips > 50) throw ConfigError("max_chips must be <= 50 for random topologies");
    if (topology.link_budget < 1) throw ConfigError("link_budget must be >= 1");
  } else {
    if (topology.kinds.empty()) throw ConfigError("topology kinds must not be empty");
    for (TopologyKind k : topology.kinds) {
      if (k == TopologyKind::Random || k == TopologyKind::Custom) {
        throw ConfigError(fmt::format("topology kind {} cannot be sampled from dims", to_string(k)));
      }
    }
  }
  if (hw.pe_dims.empty() || hw.scratchpad_bytes.empty() || hw.onchip_mem_bw_Bps.empty() ||
      hw.onchip_mem_bytes.empty()) {
    throw ConfigError("hardware choice lists must not be empty");
  }
  hw.base.validate();
}

double Evaluation::latency_cycles() const {
  if (!feasible) return kInf;
  if (report.reference_hz > 0.0) return static_cast<double>(report.total_latency_cycles);
  return report.total_latency_s * chip.frequency_hz;
}

Evaluation evaluate_point(const Workload& workload, const Topology& topology, const ChipConfig& chip,
                          const CostProvider& provider, const SearchSpace& space, std::string descriptor) {
  Evaluation ev;
  ev.descriptor = std::move(descriptor);
  ev.topology = topology;
  ev.chip = chip;
  try {
    const int n = topology.size();
    ev.tasks = split(workload.graph, {workload.microbatches, workload.shards_for(n), workload.bytes_per_element});
    ev.schedule = schedule(ev.tasks, static_cast<std::size_t>(n));
    const auto chips = uniform_chips(chip, n);
    SimOptions options;
    options.seed = space.seed;
    options.link_table = space.link_table;
    ev.report = simulate(ev.schedule, ev.tasks, topology, chips, provider, options);
    ev.feasible = true;
  } catch (const SimulationError& e) {
    ev.error = e.what();
  } catch (const ConfigError& e) {
    ev.error = e.what();
  }
  return ev;
}

std::optional<std::size_t> DSETrace::best_index() const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!std::isfinite(entries[i].latency_cycles)) continue;
    if (!best || entries[i].latency_cycles < entries[*best].latency_cycles) best = i;
  }
  return best;
}

void write_trace_csv(std::ostream& out, const DSETrace& trace) {
  CsvWriter csv(out, {"candidate", "descriptor", "latency_cycles", "log10_latency", "power_W", "best_so_far"});
  for (const TraceEntry& e : trace.entries) {
    const double lg = std::isfinite(e.latency_cycles) && e.latency_cycles > 0 ? std::log10(e.latency_cycles)
                                                                              : e.latency_cycles;
    csv.row({csv_field(e.candidate), e.descriptor, csv_field(e.latency_cycles), csv_field(lg), csv_field(e.power_W),
             csv_field(e.best_so_far)});
  }
}

std::vector<std::vector<int>> factorizations_2d(int n) {
  std::vector<std::vector<int>> out;
  for (int r = 1; r <= n; ++r) {
    if (n % r == 0) out.push_back({r, n / r});
  }
  return out;
}

std::vector<int> squarest_2d(int n) {
  if (n < 1) throw ConfigError("chip count must be >= 1");
  int r = 1;
  for (int d = 1; d * d <= n; ++d) {
    if (n % d == 0) r = d;
  }
  return {r, n / r};
}

std::vector<int> cubest_3d(int n) {
  if (n < 1) throw ConfigError("chip count must be >= 1");
  std::vector<int> best{1, 1, n};
  for (int a = 1; a * a * a <= n; ++a) {
    if (n % a) continue;
    for (int b = a; a * b * b <= n; ++b) {
      if ((n / a) % b) continue;
      const int c = n / a / b;
      if (c - a < best[2] - best[0]) best = {a, b, c};
    }
  }
  return best;
}

Topology sample_topology(const TopologySpace& space, std::uint64_t seed, std::size_t index, std::string* descriptor) {
  Rng rng = make_rng(seed, "topology", index);
  if (space.mode == TopologySpace::Mode::Random) {
    Topology t = random_topology(space.max_chips, space.link_budget, rng);
    if (descriptor) {
      const std::vector<int> n{t.size()};
      *descriptor = fmt::format("{}/{}L", describe_topology(TopologyKind::Random, n), t.undirected_link_count());
    }
    return t;
  }
  if (space.kinds.empty()) throw ConfigError("topology kinds must not be empty");
  const TopologyKind kind = pick(space.kinds, rng);
  const int n = uniform_int(rng, 2, space.max_chips);
  std::vector<int> dims;
  if (kind == TopologyKind::Disconnected) {
    dims = {n};
  } else if (kind == TopologyKind::Torus3D) {
    std::vector<std::vector<int>> shapes;
    for (const auto& rc : factorizations_2d(n)) {
      for (const auto& ab : factorizations_2d(rc[0])) shapes.push_back({ab[0], ab[1], rc[1]});
    }
    dims = pick(shapes, rng);
  } else {
    dims = pick(factorizations_2d(n), rng);
  }
  if (descriptor) *descriptor = describe_topology(kind, dims);
  return generate_topology(kind, dims);
}

ChipConfig sample_chip_config(const HwSpace& space, std::uint64_t seed, std::size_t index,
                              std::optional<Count> fixed_memory) {
  if (space.pe_dims.empty() || space.scratchpad_bytes.empty() || space.onchip_mem_bw_Bps.empty() ||
      space.onchip_mem_bytes.empty()) {
    throw ConfigError("hardware choice lists must not be empty");
  }
  Rng rng = make_rng(seed, "hw", index);
  ChipConfig c = space.base;
  c.pe_rows = pick(space.pe_dims, rng);
  c.pe_cols = pick(space.pe_dims, rng);
  c.scratchpad_bytes = pick(space.scratchpad_bytes, rng);
  c.onchip_mem_bw_Bps = pick(space.onchip_mem_bw_Bps, rng);
  const Count memory = pick(space.onchip_mem_bytes, rng);
  c.onchip_mem_bytes = fixed_memory.value_or(memory);
  c.scratchpad_bytes = std::min(c.scratchpad_bytes, c.onchip_mem_bytes);
  c.validate();
  return c;
}

DSEResult search_topologies(const Workload& workload, const SearchSpace& space, Exec exec) {
  space.validate();
  validate_workload(workload);
  std::vector<PointSummary> points(space.topology_candidates);
  for (std::size_t i = 0; i < points.size(); ++i) {
    points[i].topology = sample_topology(space.topology, space.seed, i, &points[i].descriptor);
    points[i].chip = space.hw.base;
  }
  return evaluate_all(workload, points, space, exec);
}

DSEResult compare_standard_topologies(const Workload& workload, int chip_count, const SearchSpace& space,
                                      Exec exec) {
  space.validate();
  validate_workload(workload);
  const std::vector<std::pair<TopologyKind, std::vector<int>>> shapes{
      {TopologyKind::Disconnected, {chip_count}},
      {TopologyKind::Torus2D, squarest_2d(chip_count)},
      {TopologyKind::Torus3D, cubest_3d(chip_count)},
      {TopologyKind::Mesh2D, squarest_2d(chip_count)},
  };
  std::vector<PointSummary> points;
  for (const auto& [kind, dims] : shapes) {
    points.push_back({describe_topology(kind, dims), generate_topology(kind, dims), space.hw.base});
  }
  return evaluate_all(workload, points, space, exec);
}

SweepResult sweep_chip_count(const Workload& workload, TopologyKind kind, int max_chips, const SearchSpace& space,
                             Exec exec) {
  space.validate();
  validate_workload(workload);
  if (max_chips < 1) throw ConfigError("max chip count must be >= 1");
  if (kind != TopologyKind::Torus2D && kind != TopologyKind::Mesh2D) {
    throw ConfigError(fmt::format("chip-count sweep needs a 2D topology kind, got {}", to_string(kind)));
  }
  std::vector<PointSummary> points;
  std::vector<std::size_t> first;  // first point index per chip count
  for (int n = 1; n <= max_chips; ++n) {
    first.push_back(points.size());
    for (const auto& dims : factorizations_2d(n)) {
      points.push_back({describe_topology(kind, dims), generate_topology(kind, dims), space.hw.base});
    }
  }
  first.push_back(points.size());

  const auto inner = analytical(space);
  MemoizingCostProvider provider(*inner);
  std::vector<PointSummary> out(points.size());
  for_each_index(exec, points.size(), [&](std::size_t i) {
    out[i] = summarize(evaluate_point(workload, points[i].topology, points[i].chip, provider, space,
                                      points[i].descriptor));
  });

  SweepResult result;
  std::vector<PointSummary> best_per_count;
  for (int n = 1; n <= max_chips; ++n) {
    SweepRow row;
    row.chips = n;
    const std::size_t lo = first[n - 1], hi = first[n];
    for (std::size_t i = lo; i < hi; ++i) {
      row.shapes.emplace_back(out[i].descriptor, out[i].latency_cycles);
      if (out[i].latency_cycles < row.shapes[row.best_shape].second) row.best_shape = i - lo;
    }
    best_per_count.push_back(out[lo + row.best_shape]);
    result.rows.push_back(std::move(row));
  }
  append_trace(result.trace, best_per_count);
  return result;
}

Count shards_for_memory(const Workload& workload, Count memory_bytes) {
  validate_workload(workload);
  Count cap = std::numeric_limits<Count>::max();
  for (const Layer& l : workload.graph.layers) {
    if (is_task_bearing(l.kind) && is_gemm(l.kind)) cap = std::min(cap, l.out_features);
  }
  if (cap == std::numeric_limits<Count>::max()) cap = 1;
  auto fits = [&](Count s) {
    for (const Task& t : split(workload.graph, {workload.microbatches, s, workload.bytes_per_element})) {
      if (t.bytes_in() + t.bytes_out() > memory_bytes) return false;
    }
    return true;
  };
  Count s = 1;
  for (; s < cap; s *= 2) {
    if (fits(s)) return s;
  }
  return cap;
}

DSEResult dual_flow(FlowOrder order, const SearchSpace& space, const Workload& workload, Exec exec) {
  space.validate();
  validate_workload(workload);
  const auto inner = analytical(space);
  MemoizingCostProvider provider(*inner);

  DSEResult result;
  for (std::size_t iter = 0; iter < space.outer_iters; ++iter) {
    Workload wl = workload;
    std::optional<Count> memory;
    if (order == FlowOrder::MemoryFirst) {
      Rng rng = make_rng(space.seed, "memory", iter);
      memory = pick(space.hw.onchip_mem_bytes, rng);
      wl.tensor_shards = shards_for_memory(workload, *memory);
    }
    std::string topo_desc;
    const Topology topology = sample_topology(space.topology, space.seed, iter, &topo_desc);

    std::vector<PointSummary> out(space.hw_samples);
    for_each_index(exec, out.size(), [&](std::size_t k) {
      const ChipConfig chip = sample_chip_config(space.hw, space.seed, iter * space.hw_samples + k, memory);
      out[k] = summarize(
          evaluate_point(wl, topology, chip, provider, space, fmt::format("{};{}", topo_desc, describe_chip(chip))));
    });
    const std::size_t base = result.trace.entries.size();
    append_trace(result.trace, out);
    result.points_evaluated += out.size();

    // Rebuild the bundle only when this iteration improved the overall best.
    const auto b = result.trace.best_index();
    if (b && *b >= base) {
      const PointSummary& p = out[*b - base];
      result.best = evaluate_point(wl, p.topology, p.chip, provider, space, p.descriptor);
    }
  }
  result.cost_evaluations = provider.evaluations();
  return result;
}

}  // namespace deapsim
