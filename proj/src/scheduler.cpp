// SPDX-License-Identifier: Apache-2.0
#include "deapsim/scheduler.hpp"

#include <algorithm>
#include <list>
#include <unordered_map>

#include <fmt/format.h>

#include "deapsim/error.hpp"

namespace deapsim {
namespace {

using IndexOf = std::unordered_map<TaskId, std::size_t>;

IndexOf index_tasks(std::span<const Task> tasks) {
  IndexOf index;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!index.emplace(tasks[i].id, i).second) {
      throw ConfigError(fmt::format("duplicate task id {}", tasks[i].id));
    }
  }
  return index;
}

// Walks unfinished dependencies from `start` until a task repeats.
TaskId find_cycle_member(std::span<const Task> tasks, const IndexOf& index, const std::vector<bool>& finished,
                         std::size_t start) {
  std::vector<int> seen(tasks.size(), 0);
  std::size_t cur = start;
  while (true) {
    if (seen[cur]) return tasks[cur].id;
    seen[cur] = 1;
    std::size_t next = cur;
    for (TaskId d : tasks[cur].deps) {
      const std::size_t di = index.at(d);
      if (!finished[di]) {
        next = di;
        break;
      }
    }
    if (next == cur) return tasks[cur].id;  // unreachable for a stuck task
    cur = next;
  }
}

}  // namespace

Schedule schedule(std::span<const Task> tasks, std::size_t num_workers) {
  if (num_workers < 1) throw ConfigError("number of workers must be >= 1");
  const IndexOf index = index_tasks(tasks);

  std::vector<std::size_t> pending_deps(tasks.size(), 0);
  std::vector<std::vector<std::size_t>> dependents(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (TaskId d : tasks[i].deps) {
      auto it = index.find(d);
      if (it == index.end()) {
        throw ConfigError(fmt::format("task {} depends on unknown task {}", tasks[i].id, d));
      }
      ++pending_deps[i];
      dependents[it->second].push_back(i);
    }
  }

  std::vector<std::size_t> order(tasks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (tasks[a].flops != tasks[b].flops) return tasks[a].flops > tasks[b].flops;
    return tasks[a].id < tasks[b].id;
  });
  std::list<std::size_t> remaining(order.begin(), order.end());

  Schedule out;
  out.workers.resize(num_workers);
  std::vector<bool> finished(tasks.size(), false);
  std::vector<std::size_t> step_done;

  while (!remaining.empty()) {
    step_done.clear();
    for (auto& row : out.workers) {
      auto it = std::find_if(remaining.begin(), remaining.end(),
                             [&](std::size_t i) { return pending_deps[i] == 0; });
      if (it == remaining.end()) {
        row.push_back(Assignment::nop());
        continue;
      }
      row.push_back(Assignment::of(tasks[*it].id));
      step_done.push_back(*it);
      remaining.erase(it);
    }
    if (step_done.empty()) {
      const TaskId member = find_cycle_member(tasks, index, finished, remaining.front());
      throw SimulationError(fmt::format("dependency cycle detected involving task {}", member));
    }
    for (std::size_t i : step_done) {
      finished[i] = true;
      for (std::size_t dep : dependents[i]) --pending_deps[dep];
    }
  }
  return out;
}

std::vector<std::string> validate_schedule(const Schedule& schedule, std::span<const Task> tasks) {
  std::vector<std::string> violations;
  const std::size_t steps = schedule.num_steps();
  for (std::size_t w = 0; w < schedule.workers.size(); ++w) {
    if (schedule.workers[w].size() != steps) {
      violations.push_back(fmt::format("worker {} has {} steps, expected {}", w, schedule.workers[w].size(), steps));
    }
  }

  std::unordered_map<TaskId, std::size_t> index;
  for (std::size_t i = 0; i < tasks.size(); ++i) index.emplace(tasks[i].id, i);

  struct Cell {
    std::size_t worker;
    std::size_t step;
  };
  std::unordered_map<TaskId, Cell> placed;
  for (std::size_t w = 0; w < schedule.workers.size(); ++w) {
    for (std::size_t t = 0; t < schedule.workers[w].size(); ++t) {
      const auto& a = schedule.workers[w][t];
      if (a.is_nop()) continue;
      const TaskId id = *a.task;
      if (!index.count(id)) {
        violations.push_back(fmt::format("cell (worker {}, step {}) references unknown task {}", w, t, id));
        continue;
      }
      auto [it, inserted] = placed.emplace(id, Cell{w, t});
      if (!inserted) {
        violations.push_back(fmt::format("task {} appears at (worker {}, step {}) and (worker {}, step {})", id,
                                         it->second.worker, it->second.step, w, t));
      }
    }
  }

  for (const auto& task : tasks) {
    auto it = placed.find(task.id);
    if (it == placed.end()) {
      violations.push_back(fmt::format("task {} is not scheduled", task.id));
      continue;
    }
    for (TaskId d : task.deps) {
      auto dit = placed.find(d);
      if (dit == placed.end()) continue;  // reported as unscheduled already
      if (dit->second.step >= it->second.step) {
        violations.push_back(fmt::format(
            "task {} at (worker {}, step {}) runs before its dependency {} at (worker {}, step {})", task.id,
            it->second.worker, it->second.step, d, dit->second.worker, dit->second.step));
      }
    }
  }
  return violations;
}

}  // namespace deapsim
