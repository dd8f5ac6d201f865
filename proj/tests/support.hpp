// SPDX-License-Identifier: Apache-2.0
// Helpers shared by the unit tests.
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "deapsim/partition.hpp"
#include "deapsim/rng.hpp"

namespace deapsim::testing {

/// A GEMM task with explicit deps; bytes are left at zero.
inline Task gemm_task(TaskId id, Count flops, std::vector<TaskId> deps = {}) {
  Task t;
  t.id = id;
  t.flops = flops;
  t.deps = std::move(deps);
  t.output = {{"T" + std::to_string(id)}, 0};
  return t;
}

/// Random DAG on n tasks: every edge goes from a lower to a higher id.
inline std::vector<Task> random_dag(Rng& rng, int n, double edge_prob) {
  std::bernoulli_distribution edge(edge_prob);
  std::vector<Task> tasks;
  for (int i = 0; i < n; ++i) {
    std::vector<TaskId> deps;
    for (int j = 0; j < i; ++j) {
      if (edge(rng)) deps.push_back(j);
    }
    tasks.push_back(gemm_task(i, uniform_int<Count>(rng, 0, 1000), std::move(deps)));
  }
  return tasks;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("deapsim_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace deapsim::testing
