// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <sstream>

#include "deapsim/dse.hpp"
#include "deapsim/error.hpp"

using namespace deapsim;

namespace {

Workload tiny_workload() {
  LLMConfig c;
  c.embedding_dim = 64;
  c.forward_dim = 256;
  c.num_heads = 4;
  c.num_decoder_layers = 2;
  c.vocab_size = 1000;
  c.seq_len = 16;
  return make_workload(c, {}, 1, 0, "tiny");
}

SearchSpace small_space() {
  SearchSpace s;
  s.mapping_samples = 5;
  s.hw_samples = 4;
  s.topology_candidates = 12;
  s.topology.max_chips = 12;
  s.seed = 17;
  return s;
}

std::string trace_csv(const DSETrace& trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  return out.str();
}

}  // namespace

TEST_CASE("a single candidate yields a one-row trace") {
  auto space = small_space();
  space.topology_candidates = 1;
  const DSEResult r = search_topologies(tiny_workload(), space);
  REQUIRE(r.trace.entries.size() == 1);
  CHECK(r.points_evaluated == 1);
  REQUIRE(r.best);
  CHECK(r.trace.entries[0].best_so_far == r.trace.entries[0].latency_cycles);
  CHECK(r.best->latency_cycles() == r.trace.entries[0].latency_cycles);
}

TEST_CASE("topology search trace is monotone and reproducible") {
  const auto space = small_space();
  const DSEResult a = search_topologies(tiny_workload(), space);
  const DSEResult b = search_topologies(tiny_workload(), space);
  REQUIRE(a.trace.entries.size() == space.topology_candidates);
  double running = std::numeric_limits<double>::infinity();
  for (const auto& e : a.trace.entries) {
    running = std::min(running, e.latency_cycles);
    CHECK(e.best_so_far == running);
  }
  CHECK(trace_csv(a.trace) == trace_csv(b.trace));
  REQUIRE(a.best);
  CHECK(a.best->latency_cycles() == running);
  CHECK(validate_schedule(a.best->schedule, a.best->tasks).empty());
  CHECK(a.cost_evaluations > 0);
}

TEST_CASE("serial and parallel searches agree") {
  const auto space = small_space();
  const auto wl = tiny_workload();
  CHECK(trace_csv(search_topologies(wl, space, Exec::Serial).trace) ==
        trace_csv(search_topologies(wl, space, Exec::Parallel).trace));
  CHECK(trace_csv(dual_flow(FlowOrder::TopologyFirst, space, wl, Exec::Serial).trace) ==
        trace_csv(dual_flow(FlowOrder::TopologyFirst, space, wl, Exec::Parallel).trace));
}

TEST_CASE("trace CSV layout") {
  DSETrace t;
  t.entries.push_back({0, "a", 100.0, 2.0, 100.0});
  t.entries.push_back({1, "b", std::numeric_limits<double>::infinity(), 0.0, 100.0});
  const std::string csv = trace_csv(t);
  CHECK(csv.rfind("candidate,descriptor,latency_cycles,log10_latency,power_W,best_so_far\n", 0) == 0);
  CHECK(csv.find("0,a,100,2,2,100") != std::string::npos);
  CHECK(csv.find("inf") != std::string::npos);
  CHECK(t.best_index() == 0u);
  CHECK_FALSE(DSETrace{}.best_index());
}

TEST_CASE("one chip makes every standard topology equivalent") {
  const DSEResult r = compare_standard_topologies(tiny_workload(), 1, small_space());
  REQUIRE(r.trace.entries.size() == 4);
  for (const auto& e : r.trace.entries) CHECK(e.latency_cycles == r.trace.entries[0].latency_cycles);
}

TEST_CASE("interconnected topologies beat isolated chips") {
  const DSEResult r = compare_standard_topologies(tiny_workload(), 8, small_space());
  REQUIRE(r.trace.entries.size() == 4);
  CHECK(r.trace.entries[0].descriptor == "No-Connection:8");
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(std::isfinite(r.trace.entries[i].latency_cycles));
    CHECK(r.trace.entries[i].latency_cycles < r.trace.entries[0].latency_cycles);
  }
}

TEST_CASE("grid shapes") {
  CHECK(factorizations_2d(4) == std::vector<std::vector<int>>{{1, 4}, {2, 2}, {4, 1}});
  CHECK(factorizations_2d(13) == std::vector<std::vector<int>>{{1, 13}, {13, 1}});
  CHECK(factorizations_2d(1) == std::vector<std::vector<int>>{{1, 1}});
  CHECK(squarest_2d(8) == std::vector<int>{2, 4});
  CHECK(squarest_2d(7) == std::vector<int>{1, 7});
  CHECK(cubest_3d(8) == std::vector<int>{2, 2, 2});
  CHECK(cubest_3d(12) == std::vector<int>{2, 2, 3});
  for (int n = 1; n <= 60; ++n) {
    const auto s = cubest_3d(n);
    CHECK(s[0] * s[1] * s[2] == n);
    CHECK(s[0] <= s[1]);
    CHECK(s[1] <= s[2]);
    const auto q = squarest_2d(n);
    CHECK(q[0] * q[1] == n);
    CHECK(q[0] <= q[1]);
  }
  CHECK_THROWS_AS(squarest_2d(0), ConfigError);
}

TEST_CASE("chip-count sweep") {
  const SweepResult r = sweep_chip_count(tiny_workload(), TopologyKind::Torus2D, 5, small_space());
  REQUIRE(r.rows.size() == 5);
  CHECK(r.trace.entries.size() == 5);
  CHECK(r.rows[2].shapes.size() == 2);  // 3 is prime
  CHECK(r.rows[3].shapes.size() == 3);
  for (const auto& row : r.rows) {
    for (const auto& [desc, lat] : row.shapes) CHECK(row.shapes[row.best_shape].second <= lat);
  }
  CHECK(r.rows[3].shapes[r.rows[3].best_shape].second <= r.rows[0].shapes[0].second);
  CHECK_THROWS_AS(sweep_chip_count(tiny_workload(), TopologyKind::Torus3D, 4, small_space()), ConfigError);
}

TEST_CASE("sampling is pure in seed and index") {
  const auto space = small_space();
  std::string d1, d2;
  CHECK(sample_topology(space.topology, 3, 7, &d1) == sample_topology(space.topology, 3, 7, &d2));
  CHECK(d1 == d2);
  CHECK(sample_chip_config(space.hw, 3, 7) == sample_chip_config(space.hw, 3, 7));
  const auto pinned = sample_chip_config(space.hw, 3, 7, Count{1} << 20);
  CHECK(pinned.onchip_mem_bytes == Count{1} << 20);
  CHECK(pinned.scratchpad_bytes <= pinned.onchip_mem_bytes);

  TopologySpace standard;
  standard.mode = TopologySpace::Mode::Standard;
  standard.max_chips = 16;
  std::set<TopologyKind> seen;
  for (std::size_t i = 0; i < 60; ++i) {
    const Topology t = sample_topology(standard, 1, i);
    CHECK(t.size() >= 2);
    CHECK(t.size() <= 16);
    seen.insert(t.kind);
  }
  CHECK(seen.size() == 3);
}

TEST_CASE("degenerate co-design equals a plain simulation") {
  auto space = small_space();
  space.hw_samples = 1;
  space.mapping_samples = 1;
  const auto wl = tiny_workload();
  const DSEResult r = dual_flow(FlowOrder::TopologyFirst, space, wl);
  REQUIRE(r.best);

  const Topology topo = sample_topology(space.topology, space.seed, 0);
  const ChipConfig chip = sample_chip_config(space.hw, space.seed, 0);
  const auto tasks = split(wl.graph, {1, static_cast<Count>(topo.size()), 1});
  const Schedule sched = schedule(tasks, static_cast<std::size_t>(topo.size()));
  const AnalyticalCostProvider provider(MappingSearchOptions{1});
  SimOptions opt;
  opt.seed = space.seed;
  const SimReport plain = simulate(sched, tasks, topo, uniform_chips(chip, topo.size()), provider, opt);
  CHECK(r.best->report.total_latency_cycles == plain.total_latency_cycles);
  CHECK(r.best->report.total_energy_J == plain.total_energy_J);
  CHECK(r.trace.entries.size() == 1);
}

TEST_CASE("both co-design orders produce valid bundles") {
  auto space = small_space();
  space.outer_iters = 3;
  space.hw.onchip_mem_bytes = {1u << 20, 4u << 20};
  for (FlowOrder order : {FlowOrder::MemoryFirst, FlowOrder::TopologyFirst}) {
    const DSEResult r = dual_flow(order, space, tiny_workload());
    CHECK(r.points_evaluated == space.hw_samples * space.outer_iters);
    CHECK(r.trace.entries.size() == r.points_evaluated);
    REQUIRE(r.best);
    CHECK(r.best->feasible);
    CHECK(validate_schedule(r.best->schedule, r.best->tasks).empty());
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& e : r.trace.entries) lowest = std::min(lowest, e.latency_cycles);
    CHECK(r.best->latency_cycles() == lowest);
    CHECK(r.trace.entries.back().best_so_far == lowest);
  }
}

TEST_CASE("memory-derived shard count") {
  const auto wl = tiny_workload();
  const Count roomy = shards_for_memory(wl, Count{1} << 30);
  CHECK(roomy == 1);
  const Count tight = shards_for_memory(wl, 40000);
  CHECK(tight > 1);
  CHECK((tight & (tight - 1)) == 0);
  for (const Task& t : split(wl.graph, {1, tight, 1})) CHECK(t.bytes_in() + t.bytes_out() <= 40000);
  if (tight > 1) {
    bool over = false;
    for (const Task& t : split(wl.graph, {1, tight / 2, 1})) over = over || t.bytes_in() + t.bytes_out() > 40000;
    CHECK(over);
  }
}

TEST_CASE("infeasible points are skipped") {
  auto space = small_space();
  space.hw.base.onchip_mem_bytes = 1024;  // vocab weights cannot fit
  space.hw.base.scratchpad_bytes = 1024;
  const DSEResult r = compare_standard_topologies(tiny_workload(), 4, space);
  CHECK_FALSE(r.best);
  for (const auto& e : r.trace.entries) CHECK(std::isinf(e.latency_cycles));
}

TEST_CASE("search space validation") {
  auto space = small_space();
  space.mapping_samples = 0;
  CHECK_THROWS_AS(space.validate(), ConfigError);
  space = small_space();
  space.topology.max_chips = 51;
  CHECK_THROWS_AS(space.validate(), ConfigError);
  space = small_space();
  space.hw.pe_dims.clear();
  CHECK_THROWS_AS(space.validate(), ConfigError);
  space = small_space();
  space.topology.mode = TopologySpace::Mode::Standard;
  space.topology.kinds = {TopologyKind::Random};
  CHECK_THROWS_AS(space.validate(), ConfigError);
  Workload empty;
  CHECK_THROWS_AS(search_topologies(empty, small_space()), ConfigError);
}
