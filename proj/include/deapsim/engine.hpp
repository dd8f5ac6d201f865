// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "deapsim/commsim.hpp"
#include "deapsim/cost_provider.hpp"
#include "deapsim/exec.hpp"
#include "deapsim/scheduler.hpp"

namespace deapsim {

struct StepMetrics {
  std::size_t step = 0;
  std::vector<std::optional<TaskId>> assignment;  // per chip
  std::vector<double> comm_latency_s;
  std::vector<double> proc_latency_s;
  std::vector<Count> proc_cycles;
  std::vector<double> comm_power_W;
  std::vector<double> proc_power_W;
  double overall_latency_s = 0.0;    // max(comm) + max(proc)
  Count overall_latency_cycles = 0;  // at the reference frequency; 0 if chips differ
  double overall_power_W = 0.0;      // sum(comm) + sum(proc)
  double energy_J = 0.0;             // overall_power_W * overall_latency_s
  std::size_t num_transfers = 0;
};

/// Builds the synchronized per-step aggregate from per-chip figures.
StepMetrics make_step_metrics(std::size_t step, std::vector<double> comm_latency_s, std::vector<double> proc_latency_s,
                              std::vector<double> comm_power_W, std::vector<double> proc_power_W,
                              double reference_hz);

struct TransferRecord {
  std::size_t step = 0;
  Transfer transfer;
  double latency_s = 0.0;
};

struct SimReport {
  std::vector<StepMetrics> steps;
  double total_latency_s = 0.0;
  Count total_latency_cycles = 0;
  double total_energy_J = 0.0;
  /// Plain sum of per-step overall power (W summed over steps, kept for reference).
  double power_sum_W = 0.0;
  std::vector<double> utilization;  // fraction of non-NOP steps per chip
  double reference_hz = 0.0;        // 0 when chip frequencies differ
  std::vector<TransferRecord> comm_trace;

  /// total_energy_J / total_latency_s, or 0 for an empty run.
  double average_power_W() const;
};

struct SimOptions {
  std::uint64_t seed = 0;
  Exec exec = Exec::Serial;
  LinkBandwidthTable link_table;
  BandwidthPolicy bandwidth_policy = BandwidthPolicy::SourceSide;
  bool trace_comm = false;
  /// Starting residency; by default every unproduced input starts in HBM only.
  std::optional<DataLog> initial_log;
};

/// Runs the synchronous communicate-then-process step loop.
/// Throws ConfigError on shape mismatches (workers, chips, topology size) and
/// SimulationError on an invalid schedule or data-log violation.
SimReport simulate(const Schedule& schedule, std::span<const Task> tasks, const Topology& topology,
                   std::span<const ChipConfig> chips, const CostProvider& provider, const SimOptions& options = {});

/// `n` copies of one configuration.
std::vector<ChipConfig> uniform_chips(const ChipConfig& chip, int n);

/// Initial log for `tasks`: every input that no task produces starts in HBM.
DataLog initial_data_log(std::span<const Task> tasks, std::span<const ChipConfig> chips);

/// CSV rows "step,chip,assignment,comm_s,proc_s,comm_W,proc_W,overall_s,overall_W".
void write_steps_csv(std::ostream& out, const SimReport& report);
/// CSV rows "step,tensor,bytes,source,dest,distance,bandwidth_Bps,latency_s".
void write_comm_trace_csv(std::ostream& out, const SimReport& report);

}  // namespace deapsim
