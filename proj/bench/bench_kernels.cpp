// SPDX-License-Identifier: Apache-2.0
// Serial reference vs OpenMP kernels: mapping search, per-step payload
// pricing inside the engine, and DSE candidate evaluation. Each pair is
// checked for identical results before timings are printed.
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <string>

#include <fmt/format.h>

#include "deapsim/cost_provider.hpp"
#include "deapsim/dse.hpp"
#include "deapsim/engine.hpp"
#include "deapsim/scheduler.hpp"

namespace {

using namespace deapsim;
using Clock = std::chrono::steady_clock;

template <typename F>
double time_ms(F&& f) {
  const auto t0 = Clock::now();
  f();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void report(const char* name, double serial_ms, double parallel_ms, bool same) {
  fmt::print("{:<22} serial {:>10.2f} ms  parallel {:>10.2f} ms  speedup {:>5.2f}x  {}\n", name, serial_ms,
             parallel_ms, serial_ms / parallel_ms, same ? "match" : "MISMATCH");
}

bool bench_mapping(std::size_t samples) {
  const WorkloadPayload payload = gemm_payload({128, 768, 3072});
  const ChipConfig chip;
  MappingResult serial, parallel;
  const double s = time_ms([&] {
    Rng rng(7);
    serial = best_mapping(payload, chip, rng, {samples, false, Exec::Serial});
  });
  const double p = time_ms([&] {
    Rng rng(7);
    parallel = best_mapping(payload, chip, rng, {samples, false, Exec::Parallel});
  });
  const bool same = serial.mapping == parallel.mapping && serial.cost == parallel.cost;
  report("mapping search", s, p, same);
  return same;
}

bool bench_engine(std::size_t samples) {
  const Workload w = make_workload(llm_preset("gpt2"), {}, 2, 8);
  const auto tasks = split(w.graph, {w.microbatches, 8, 1});
  const Schedule sched = schedule(tasks, 8);
  const Topology topo = generate_topology(TopologyKind::Torus2D, std::vector<int>{2, 4});
  const auto chips = uniform_chips(ChipConfig{}, 8);
  const AnalyticalCostProvider provider({samples, false, Exec::Serial});
  SimReport serial, parallel;
  SimOptions opt;
  const double s = time_ms([&] { serial = simulate(sched, tasks, topo, chips, provider, opt); });
  opt.exec = Exec::Parallel;
  const double p = time_ms([&] { parallel = simulate(sched, tasks, topo, chips, provider, opt); });
  const bool same = serial.total_latency_cycles == parallel.total_latency_cycles &&
                    serial.total_energy_J == parallel.total_energy_J;
  report("engine pricing", s, p, same);
  return same;
}

bool bench_dse(std::size_t candidates, std::size_t samples) {
  const Workload w = make_workload(llm_preset("bert"));
  SearchSpace space;
  space.topology_candidates = candidates;
  space.mapping_samples = samples;
  space.topology.max_chips = 16;
  DSEResult serial, parallel;
  const double s = time_ms([&] { serial = search_topologies(w, space, Exec::Serial); });
  const double p = time_ms([&] { parallel = search_topologies(w, space, Exec::Parallel); });
  bool same = serial.trace.entries.size() == parallel.trace.entries.size();
  for (std::size_t i = 0; same && i < serial.trace.entries.size(); ++i) {
    same = serial.trace.entries[i].latency_cycles == parallel.trace.entries[i].latency_cycles &&
           serial.trace.entries[i].best_so_far == parallel.trace.entries[i].best_so_far;
  }
  report("dse topology search", s, p, same);
  return same;
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--quick") == 0) {
      quick = true;
    } else {
      fmt::print(stderr, "usage: deapsim_bench [--quick]\n");
      return 1;
    }
  }
  bool ok = bench_mapping(quick ? 200 : 20000);
  ok = bench_engine(quick ? 20 : 1000) && ok;
  ok = bench_dse(quick ? 4 : 32, quick ? 10 : 200) && ok;
  return ok ? EXIT_SUCCESS : EXIT_FAILURE;
}
