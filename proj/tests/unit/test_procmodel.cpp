// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <set>

#include "deapsim/cost_provider.hpp"
#include "deapsim/error.hpp"
#include "deapsim/procmodel.hpp"

using namespace deapsim;

namespace {

Count ceil_div(Count a, Count b) { return (a + b - 1) / b; }

struct LoopNestCount {
  Count tiles = 0;
  Count compute_cycles = 0;
  Count bytes = 0;
};

// Walks the tile loop nest literally with one resident tile per operand.
// A tile is (re)fetched whenever its index changes; an output tile is
// written back when it is replaced and read back if it held partial sums.
LoopNestCount simulate_loop_nest(const GemmShape& g, const ChipConfig& chip, const Mapping& m) {
  const Count trips[3] = {ceil_div(g.rows, m.tile_m), ceil_div(g.out, m.tile_n), ceil_div(g.in, m.tile_k)};
  const Count tile[3] = {m.tile_m, m.tile_n, m.tile_k};
  const Count full[3] = {g.rows, g.out, g.in};
  auto extent = [&](int d, Count i) { return std::min(tile[d], full[d] - i * tile[d]); };

  LoopNestCount out;
  std::optional<std::pair<Count, Count>> a, b, c;
  std::set<std::pair<Count, Count>> c_seen;
  Count elems = 0;
  Count idx[3];
  const int o0 = static_cast<int>(m.loop_order[0]), o1 = static_cast<int>(m.loop_order[1]),
            o2 = static_cast<int>(m.loop_order[2]);
  for (idx[o0] = 0; idx[o0] < trips[o0]; ++idx[o0]) {
    for (idx[o1] = 0; idx[o1] < trips[o1]; ++idx[o1]) {
      for (idx[o2] = 0; idx[o2] < trips[o2]; ++idx[o2]) {
        const Count mi = idx[0], ni = idx[1], ki = idx[2];
        ++out.tiles;
        out.compute_cycles += m.tile_k + chip.pe_rows + chip.pe_cols - 2;
        if (a != std::pair{mi, ki}) {
          a = {mi, ki};
          elems += extent(0, mi) * extent(2, ki);
        }
        if (b != std::pair{ki, ni}) {
          b = {ki, ni};
          elems += extent(2, ki) * extent(1, ni);
        }
        if (c != std::pair{mi, ni}) {
          if (c) elems += extent(0, c->first) * extent(1, c->second);  // write back
          c = {mi, ni};
          if (!c_seen.insert(*c).second) elems += extent(0, mi) * extent(1, ni);  // read partials
        }
      }
    }
  }
  elems += extent(0, c->first) * extent(1, c->second);
  out.bytes = elems * chip.element_bytes;
  return out;
}

WorkloadPayload random_payload(Rng& rng, Count max_dim) {
  return gemm_payload({uniform_int<Count>(rng, 1, max_dim), uniform_int<Count>(rng, 1, max_dim),
                       uniform_int<Count>(rng, 1, max_dim)});
}

ChipConfig random_chip(Rng& rng) {
  ChipConfig c;
  const Count dims[] = {2, 4, 8, 16, 32};
  c.pe_rows = dims[uniform_int(rng, 0, 4)];
  c.pe_cols = dims[uniform_int(rng, 0, 4)];
  c.scratchpad_bytes = Count{1} << uniform_int(rng, 8, 18);
  c.onchip_mem_bw_Bps = std::pow(2.0, uniform_int(rng, 30, 37));
  return c;
}

bool better_or_equal(const ProcCost& a, const ProcCost& b) {
  return a.cycles < b.cycles || (a.cycles == b.cycles && a.energy_J <= b.energy_J);
}

}  // namespace

TEST_CASE("NOP payload is free") {
  const ProcCost c = process_cost(WorkloadPayload::nop(), ChipConfig{}, Mapping{});
  CHECK(c.cycles == 0);
  CHECK(c.energy_J == 0.0);
}

TEST_CASE("one 16x16x16 tile on a 16x16 array") {
  ChipConfig chip;
  chip.onchip_mem_bw_Bps = 1e15;
  const Mapping m{16, 16, 16, {Dim::M, Dim::N, Dim::K}};
  const CostBreakdown b = analyze({16, 16, 16}, chip, m);
  CHECK(b.tiles == 1);
  CHECK(b.compute_cycles == 46);
  CHECK(b.cost.cycles == 46);
  CHECK(simulate_loop_nest({16, 16, 16}, chip, m).compute_cycles == 46);
}

TEST_CASE("closed form matches the loop-nest walker") {
  Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    const WorkloadPayload p = random_payload(rng, 70);
    const ChipConfig chip = random_chip(rng);
    const Mapping m = random_mapping(p, chip, rng);
    const GemmShape g = gemm_shape(p);
    const CostBreakdown b = analyze(g, chip, m);
    const LoopNestCount oracle = simulate_loop_nest(g, chip, m);
    INFO("gemm " << g.rows << "x" << g.in << "x" << g.out << " tiles " << m.tile_m << "," << m.tile_n << ","
                 << m.tile_k << " order " << to_string(m.loop_order));
    CHECK(b.tiles == oracle.tiles);
    CHECK(b.compute_cycles == oracle.compute_cycles);
    CHECK(b.bytes_moved == oracle.bytes);
  }
}

TEST_CASE("roofline lower bounds hold") {
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    const WorkloadPayload p = random_payload(rng, 600);
    const ChipConfig chip = random_chip(rng);
    const Mapping m = random_mapping(p, chip, rng);
    const GemmShape g = gemm_shape(p);
    const CostBreakdown b = analyze(g, chip, m);
    CHECK(b.cost.cycles >= ceil_div(g.rows * g.in * g.out, chip.pe_rows * chip.pe_cols));
    const auto memory_bound =
        static_cast<Count>(std::ceil(static_cast<double>(b.bytes_moved) * chip.frequency_hz / chip.onchip_mem_bw_Bps));
    CHECK(b.cost.cycles >= memory_bound);
    CHECK(b.cost.seconds == static_cast<double>(b.cost.cycles) / chip.frequency_hz);
  }
}

TEST_CASE("more memory bandwidth never costs cycles") {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const WorkloadPayload p = random_payload(rng, 400);
    ChipConfig chip = random_chip(rng);
    const Mapping m = random_mapping(p, chip, rng);
    const Count before = process_cost(p, chip, m).cycles;
    chip.onchip_mem_bw_Bps *= 2;
    CHECK(process_cost(p, chip, m).cycles <= before);
  }
}

TEST_CASE("larger arrays never increase compute cycles at full-array tiling") {
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    const GemmShape g{32 * uniform_int<Count>(rng, 1, 8), uniform_int<Count>(rng, 1, 300),
                      32 * uniform_int<Count>(rng, 1, 8)};
    const Count tk = uniform_int<Count>(rng, 1, g.in);
    Count previous = std::numeric_limits<Count>::max();
    for (Count pe : {4, 8, 16, 32}) {
      ChipConfig chip;
      chip.pe_rows = chip.pe_cols = pe;
      chip.scratchpad_bytes = chip.onchip_mem_bytes;
      const Count cycles = analyze(g, chip, {pe, pe, tk, {Dim::M, Dim::N, Dim::K}}).compute_cycles;
      CHECK(cycles <= previous);
      previous = cycles;
    }
  }
}

TEST_CASE("energy does not depend on frequency") {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const WorkloadPayload p = random_payload(rng, 300);
    ChipConfig chip = random_chip(rng);
    const Mapping m = random_mapping(p, chip, rng);
    const double e = process_cost(p, chip, m).energy_J;
    chip.frequency_hz *= 3;
    CHECK(process_cost(p, chip, m).energy_J == e);
  }
}

TEST_CASE("random mappings respect every bound") {
  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    const WorkloadPayload p = random_payload(rng, 1000);
    const ChipConfig chip = random_chip(rng);
    const Mapping m = random_mapping(p, chip, rng);
    CHECK_NOTHROW(validate_mapping(gemm_shape(p), chip, m));
  }
  Rng one(1);
  CHECK(random_mapping(gemm_payload({1, 1, 1}), ChipConfig{}, one) ==
        Mapping{1, 1, 1, random_mapping(gemm_payload({1, 1, 1}), ChipConfig{}, one).loop_order});
}

TEST_CASE("random mappings explore loop orders") {
  const WorkloadPayload ff1 = gemm_payload({128, 768, 3072});
  std::set<std::string> orders;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    orders.insert(to_string(random_mapping(ff1, ChipConfig{}, rng).loop_order));
  }
  CHECK(orders.size() >= 2);
}

TEST_CASE("mapping validation names the violated bound") {
  const GemmShape g{8, 8, 8};
  ChipConfig chip;
  chip.pe_rows = chip.pe_cols = 4;
  CHECK_THROWS_WITH(validate_mapping(g, chip, {9, 1, 1, {Dim::M, Dim::N, Dim::K}}), Catch::Matchers::ContainsSubstring("tile_m"));
  CHECK_THROWS_WITH(validate_mapping(g, chip, {1, 5, 1, {Dim::M, Dim::N, Dim::K}}), Catch::Matchers::ContainsSubstring("pe_cols"));
  chip.scratchpad_bytes = 10;
  CHECK_THROWS_WITH(validate_mapping(g, chip, {2, 2, 2, {Dim::M, Dim::N, Dim::K}}), Catch::Matchers::ContainsSubstring("scratchpad"));
  CHECK_THROWS_AS(validate_mapping(g, ChipConfig{}, {1, 1, 1, {Dim::M, Dim::M, Dim::K}}), ConfigError);
}

TEST_CASE("balanced tile sizes match their definition") {
  for (Count dim = 1; dim <= 300; ++dim) {
    for (Count bound : {Count{1}, Count{3}, Count{16}, dim}) {
      std::vector<Count> oracle;
      for (Count t = 1; t <= std::min(dim, bound); ++t) {
        if (ceil_div(dim, ceil_div(dim, t)) == t) oracle.push_back(t);
      }
      CHECK(balanced_tile_sizes(dim, bound) == oracle);
    }
  }
}

TEST_CASE("best mapping is the minimum over its samples") {
  const WorkloadPayload p = gemm_payload({128, 768, 3072});
  const ChipConfig chip;
  Rng rng(5);
  const MappingResult best = best_mapping(p, chip, rng, {1000});
  Rng again(5);
  for (int i = 0; i < 1000; ++i) {
    CHECK(better_or_equal(best.cost, process_cost(p, chip, random_mapping(p, chip, again))));
  }
  Rng single(5), direct(5);
  const MappingResult one = best_mapping(p, chip, single, {1});
  CHECK(one.mapping == random_mapping(p, chip, direct));
  CHECK(one.cost == process_cost(p, chip, one.mapping));
}

TEST_CASE("exhaustive search equals brute-force enumeration on small payloads") {
  Rng rng(31);
  for (int i = 0; i < 60; ++i) {
    const GemmShape g{uniform_int<Count>(rng, 1, 8), uniform_int<Count>(rng, 1, 8), uniform_int<Count>(rng, 1, 8)};
    ChipConfig chip;
    chip.pe_rows = chip.pe_cols = 4;
    chip.scratchpad_bytes = uniform_int<Count>(rng, 3, 64);
    std::optional<ProcCost> oracle;
    for (Count tm = 1; tm <= std::min(g.rows, chip.pe_rows); ++tm) {
      for (Count tn = 1; tn <= std::min(g.out, chip.pe_cols); ++tn) {
        for (Count tk = 1; tk <= g.in; ++tk) {
          for (const auto& order : all_loop_orders()) {
            const Mapping m{tm, tn, tk, order};
            if (tm * tk + tk * tn + tm * tn > chip.scratchpad_bytes) continue;
            const ProcCost c = analyze(g, chip, m).cost;
            if (!oracle || !better_or_equal(*oracle, c)) oracle = c;
          }
        }
      }
    }
    const WorkloadPayload p = gemm_payload(g);
    const auto space = enumerate_mapspace(p, chip);
    Rng search(i);
    const MappingResult found = best_mapping(p, chip, search, {space.size(), true});
    REQUIRE(oracle.has_value());
    CHECK(found.cost == *oracle);
  }
}

TEST_CASE("serial and parallel mapping search agree") {
  Rng rng(71);
  for (int i = 0; i < 20; ++i) {
    const WorkloadPayload p = random_payload(rng, 2000);
    const ChipConfig chip = random_chip(rng);
    Rng a(i), b(i);
    const MappingResult s = best_mapping(p, chip, a, {300, false, Exec::Serial});
    const MappingResult q = best_mapping(p, chip, b, {300, false, Exec::Parallel});
    CHECK(s.mapping == q.mapping);
    CHECK(s.cost == q.cost);
    CHECK(s.sample_index == q.sample_index);
  }
}

TEST_CASE("chip config validation") {
  ChipConfig c;
  CHECK_NOTHROW(c.validate());
  c.scratchpad_bytes = c.onchip_mem_bytes + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.frequency_hz = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  Rng rng(1);
  CHECK_THROWS_AS(best_mapping(gemm_payload({4, 4, 4}), ChipConfig{}, rng, {0}), ConfigError);
}

TEST_CASE("loop order names") {
  for (const auto& o : all_loop_orders()) CHECK(loop_order_from_string(to_string(o)) == o);
  CHECK_THROWS_AS(loop_order_from_string("mmk"), ParseError);
}

TEST_CASE("providers") {
  const WorkloadPayload p = gemm_payload({64, 128, 256});
  const ChipConfig chip;
  const AnalyticalCostProvider analytical({50});
  Rng rng(123);
  const MappingResult direct = best_mapping(p, chip, rng, {50});
  CHECK(analytical.estimate(p, chip, 123) == process_cost(p, chip, direct.mapping));
  CHECK(analytical.estimate(WorkloadPayload::nop(), chip, 1) == ProcCost{});

  MockCostProvider mock;
  mock.set(p, {10, 1e-8, 2.0});
  CHECK(mock.estimate(p, chip, 0).cycles == 10);
  CHECK_THROWS_AS(mock.estimate(gemm_payload({1, 2, 3}), chip, 0), SimulationError);

  const MemoizingCostProvider memo(analytical);
  CHECK(memo.estimate(p, chip, 123) == analytical.estimate(p, chip, 123));
  CHECK(memo.estimate(p, chip, 123) == analytical.estimate(p, chip, 123));
  CHECK(memo.evaluations() == 1);
  ChipConfig other = chip;
  other.pe_rows = 8;
  memo.estimate(p, other, 123);
  CHECK(memo.evaluations() == 2);
}
