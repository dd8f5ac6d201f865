// SPDX-License-Identifier: Apache-2.0
#include "deapsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "deapsim/csv.hpp"
#include "deapsim/error.hpp"
#include "deapsim/payload.hpp"

namespace deapsim {
namespace {

double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

double sum_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Index of each distinct chip configuration.
std::vector<std::size_t> dedup_chips(std::span<const ChipConfig> chips, std::vector<ChipConfig>& distinct) {
  std::vector<std::size_t> index;
  for (const auto& c : chips) {
    auto it = std::find(distinct.begin(), distinct.end(), c);
    if (it == distinct.end()) it = distinct.insert(distinct.end(), c);
    index.push_back(static_cast<std::size_t>(it - distinct.begin()));
  }
  return index;
}

}  // namespace

StepMetrics make_step_metrics(std::size_t step, std::vector<double> comm_latency_s, std::vector<double> proc_latency_s,
                              std::vector<double> comm_power_W, std::vector<double> proc_power_W,
                              double reference_hz) {
  StepMetrics m;
  m.step = step;
  m.overall_latency_s = max_of(comm_latency_s) + max_of(proc_latency_s);
  m.overall_power_W = sum_of(comm_power_W) + sum_of(proc_power_W);
  m.energy_J = m.overall_power_W * m.overall_latency_s;
  m.overall_latency_cycles =
      reference_hz > 0.0 ? static_cast<Count>(std::llround(m.overall_latency_s * reference_hz)) : 0;
  m.comm_latency_s = std::move(comm_latency_s);
  m.proc_latency_s = std::move(proc_latency_s);
  m.comm_power_W = std::move(comm_power_W);
  m.proc_power_W = std::move(proc_power_W);
  return m;
}

double SimReport::average_power_W() const { return total_latency_s > 0.0 ? total_energy_J / total_latency_s : 0.0; }

std::vector<ChipConfig> uniform_chips(const ChipConfig& chip, int n) {
  return std::vector<ChipConfig>(static_cast<std::size_t>(std::max(n, 0)), chip);
}

DataLog initial_data_log(std::span<const Task> tasks, std::span<const ChipConfig> chips) {
  std::vector<Count> capacity;
  for (const auto& c : chips) capacity.push_back(c.onchip_mem_bytes);
  DataLog log(chips.size(), std::move(capacity));
  std::unordered_set<std::string> produced;
  for (const auto& t : tasks) produced.insert(t.output.id.name);
  for (const auto& t : tasks) {
    for (const auto& in : t.inputs) {
      if (!produced.count(in.id.name)) log.put_hbm(in);
    }
  }
  return log;
}

SimReport simulate(const Schedule& schedule, std::span<const Task> tasks, const Topology& topology,
                   std::span<const ChipConfig> chips, const CostProvider& provider, const SimOptions& options) {
  const std::size_t n = chips.size();
  if (static_cast<std::size_t>(topology.size()) != n) {
    throw ConfigError(fmt::format("topology has {} chips but {} chip configs were given", topology.size(), n));
  }
  if (schedule.num_workers() != n && schedule.num_steps() > 0) {
    throw ConfigError(fmt::format("schedule has {} workers but the system has {} chips", schedule.num_workers(), n));
  }
  for (const auto& c : chips) c.validate();
  if (auto v = validate_schedule(schedule, tasks); !v.empty()) {
    throw SimulationError("invalid schedule: " + v.front());
  }

  std::unordered_map<TaskId, const Task*> by_id;
  for (const auto& t : tasks) by_id.emplace(t.id, &t);

  const bool uniform_freq = std::all_of(chips.begin(), chips.end(), [&](const ChipConfig& c) {
    return c.frequency_hz == chips.front().frequency_hz;
  });
  const double reference_hz = (n > 0 && uniform_freq) ? chips.front().frequency_hz : 0.0;

  // Price every distinct (payload, chip config) once, possibly in parallel.
  std::vector<ChipConfig> distinct_chips;
  const std::vector<std::size_t> chip_index = dedup_chips(chips, distinct_chips);
  struct PriceKey {
    WorkloadPayload payload;
    std::size_t chip;
    auto operator<=>(const PriceKey&) const = default;
  };
  std::map<PriceKey, std::size_t> key_slot;
  std::vector<PriceKey> keys;
  const std::size_t steps = schedule.num_steps();
  for (std::size_t c = 0; c < schedule.num_workers(); ++c) {
    for (const auto& a : schedule.workers[c]) {
      if (a.is_nop()) continue;
      const Task& task = *by_id.at(*a.task);
      if (!task.is_gemm()) continue;
      PriceKey key{to_payload(task), chip_index[c]};
      if (key_slot.emplace(key, keys.size()).second) keys.push_back(std::move(key));
    }
  }
  const std::uint64_t mapping_seed = derive_seed(options.seed, "mapping");
  std::vector<ProcCost> prices(keys.size());
  for_each_index(options.exec, keys.size(), [&](std::size_t i) {
    prices[i] = provider.estimate(keys[i].payload, distinct_chips[keys[i].chip], mapping_seed);
  });

  DataLog log = options.initial_log ? *options.initial_log : initial_data_log(tasks, chips);
  if (log.num_chips() != n) throw ConfigError("initial data log chip count does not match the system");
  RoutingTable routing(topology);
  const Interconnect net{topology, routing, options.link_table, options.bandwidth_policy};

  SimReport report;
  report.reference_hz = reference_hz;
  report.utilization.assign(n, 0.0);
  std::vector<const Task*> step_tasks(n, nullptr);

  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<std::optional<TaskId>> assignment(n);
    for (std::size_t c = 0; c < n; ++c) {
      const auto& a = schedule.workers[c][t];
      step_tasks[c] = a.is_nop() ? nullptr : by_id.at(*a.task);
      assignment[c] = a.task;
      if (!a.is_nop()) report.utilization[c] += 1.0;
    }

    const auto transfers = resolve_transfers(step_tasks, log, net);

    std::vector<double> comm_s(n), proc_s(n), comm_W(n), proc_W(n);
    std::vector<Count> proc_cycles(n, 0);
    for (std::size_t c = 0; c < n; ++c) {
      const auto chip = static_cast<ChipId>(c);
      comm_s[c] = chip_comm_latency(chip, transfers, chips[c].onchip_mem_bw_Bps);
      comm_W[c] = static_cast<double>(active_connections(chip, transfers)) * chips[c].energy.link_W;
      const Task* task = step_tasks[c];
      if (task && task->is_gemm()) {
        const ProcCost& cost = prices[key_slot.at({to_payload(*task), chip_index[c]})];
        proc_s[c] = cost.seconds;
        proc_cycles[c] = cost.cycles;
        proc_W[c] = cost.seconds > 0.0 ? cost.energy_J / cost.seconds : 0.0;
      }
    }

    StepMetrics m = make_step_metrics(t, std::move(comm_s), std::move(proc_s), std::move(comm_W),
                                      std::move(proc_W), reference_hz);
    m.assignment = std::move(assignment);
    m.proc_cycles = std::move(proc_cycles);
    m.num_transfers = transfers.size();

    if (options.trace_comm) {
      for (const auto& tr : transfers) report.comm_trace.push_back({t, tr, transfer_latency(tr)});
    }
    apply_step(log, step_tasks, transfers, static_cast<std::int64_t>(t));

    report.total_latency_s += m.overall_latency_s;
    report.total_latency_cycles += m.overall_latency_cycles;
    report.total_energy_J += m.energy_J;
    report.power_sum_W += m.overall_power_W;
    report.steps.push_back(std::move(m));
  }
  if (steps > 0) {
    for (auto& u : report.utilization) u /= static_cast<double>(steps);
  }
  return report;
}

void write_steps_csv(std::ostream& out, const SimReport& report) {
  CsvWriter csv(out, {"step", "chip", "assignment", "comm_s", "proc_s", "comm_W", "proc_W", "overall_s", "overall_W"});
  for (const auto& s : report.steps) {
    for (std::size_t c = 0; c < s.comm_latency_s.size(); ++c) {
      const std::string assignment = s.assignment.size() > c && s.assignment[c]
                                         ? fmt::format("task:{}", *s.assignment[c])
                                         : std::string("NOP");
      csv.row({csv_field(s.step), csv_field(c), assignment, csv_field(s.comm_latency_s[c]),
               csv_field(s.proc_latency_s[c]), csv_field(s.comm_power_W[c]), csv_field(s.proc_power_W[c]),
               csv_field(s.overall_latency_s), csv_field(s.overall_power_W)});
    }
  }
}

void write_comm_trace_csv(std::ostream& out, const SimReport& report) {
  CsvWriter csv(out, {"step", "tensor", "bytes", "source", "dest", "distance", "bandwidth_Bps", "latency_s"});
  for (const auto& r : report.comm_trace) {
    const auto& t = r.transfer;
    csv.row({csv_field(r.step), t.tensor.name, csv_field(t.bytes),
             t.source ? csv_field(*t.source) : std::string("HBM"), csv_field(t.dest), csv_field(t.distance),
             csv_field(t.bandwidth_Bps), csv_field(r.latency_s)});
  }
}

}  // namespace deapsim
