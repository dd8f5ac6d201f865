// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deapsim/partition.hpp"

namespace deapsim {

/// One (worker, time step) cell: a task or a NOP.
struct Assignment {
  std::optional<TaskId> task;

  static Assignment nop() { return {}; }
  static Assignment of(TaskId id) { return {id}; }
  bool is_nop() const { return !task.has_value(); }
  bool operator==(const Assignment&) const = default;
};

/// workers[w][t] is what worker w does at step t. All rows share one length.
struct Schedule {
  std::vector<std::vector<Assignment>> workers;

  std::size_t num_workers() const { return workers.size(); }
  std::size_t num_steps() const { return workers.empty() ? 0 : workers.front().size(); }
  bool operator==(const Schedule&) const = default;
};

/// Greedy lock-step list scheduler.
///
/// Each step visits workers in index order; a worker takes the first remaining
/// task (by descending FLOPs, then ascending id) whose dependencies finished in
/// an earlier step, otherwise a NOP. Tasks finish at the end of their step.
/// Throws SimulationError naming a cycle member if the tasks are not a DAG.
Schedule schedule(std::span<const Task> tasks, std::size_t num_workers);

/// Empty when the schedule is rectangular, places every task exactly once,
/// and runs every task strictly after its dependencies.
std::vector<std::string> validate_schedule(const Schedule& schedule, std::span<const Task> tasks);

}  // namespace deapsim
