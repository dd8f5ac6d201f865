// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <bit>
#include <chrono>
#include <map>
#include <queue>

#include "deapsim/error.hpp"
#include "deapsim/scheduler.hpp"
#include "support.hpp"

using namespace deapsim;
using deapsim::testing::gemm_task;
using deapsim::testing::random_dag;

namespace {

// Fewest lock-step steps to finish a small DAG on n workers, by BFS over finished sets.
int brute_force_min_steps(const std::vector<Task>& tasks, std::size_t workers) {
  const unsigned n = static_cast<unsigned>(tasks.size());
  const unsigned full = (1u << n) - 1;
  std::map<unsigned, int> dist{{0u, 0}};
  std::queue<unsigned> q;
  q.push(0);
  while (!q.empty()) {
    const unsigned done = q.front();
    q.pop();
    if (done == full) return dist[done];
    unsigned ready = 0;
    for (unsigned i = 0; i < n; ++i) {
      if (done & (1u << i)) continue;
      bool ok = true;
      for (TaskId d : tasks[i].deps) ok = ok && (done & (1u << d));
      if (ok) ready |= 1u << i;
    }
    for (unsigned pick = ready; pick; pick = (pick - 1) & ready) {
      if (static_cast<std::size_t>(std::popcount(pick)) > workers) continue;
      const unsigned next = done | pick;
      if (dist.emplace(next, dist[done] + 1).second) q.push(next);
    }
  }
  return -1;
}

std::vector<Task> diamond() {
  return {gemm_task(0, 10), gemm_task(1, 10, {0}), gemm_task(2, 10, {0}), gemm_task(3, 10, {1, 2})};
}

}  // namespace

TEST_CASE("chain runs on one worker") {
  const std::vector<Task> tasks{gemm_task(0, 5), gemm_task(1, 5, {0}), gemm_task(2, 5, {1})};
  const Schedule s = schedule(tasks, 2);
  REQUIRE(s.num_steps() == 3);
  CHECK(s.workers[0] == std::vector<Assignment>{Assignment::of(0), Assignment::of(1), Assignment::of(2)});
  CHECK(s.workers[1] == std::vector<Assignment>(3, Assignment::nop()));
}

TEST_CASE("independent tasks run in parallel") {
  const std::vector<Task> tasks{gemm_task(0, 5), gemm_task(1, 5)};
  const Schedule s = schedule(tasks, 2);
  REQUIRE(s.num_steps() == 1);
  CHECK(s.workers[0][0] == Assignment::of(0));
  CHECK(s.workers[1][0] == Assignment::of(1));
}

TEST_CASE("diamond attains the brute-force minimum") {
  const auto tasks = diamond();
  const Schedule s = schedule(tasks, 2);
  CHECK(brute_force_min_steps(tasks, 2) == 3);
  REQUIRE(s.num_steps() == 3);
  CHECK(s.workers[0][0] == Assignment::of(0));
  CHECK(s.workers[1][0].is_nop());
  CHECK(s.workers[0][1] == Assignment::of(1));
  CHECK(s.workers[1][1] == Assignment::of(2));
  CHECK(s.workers[0][2] == Assignment::of(3));
  CHECK(s.workers[1][2].is_nop());
}

TEST_CASE("higher flops are scanned first") {
  const std::vector<Task> tasks{gemm_task(0, 1), gemm_task(1, 100)};
  const Schedule s = schedule(tasks, 1);
  CHECK(s.workers[0] == std::vector<Assignment>{Assignment::of(1), Assignment::of(0)});
}

TEST_CASE("a single worker gives a topological order without NOPs") {
  Rng rng(9);
  const auto tasks = random_dag(rng, 40, 0.2);
  const Schedule s = schedule(tasks, 1);
  CHECK(s.num_steps() == tasks.size());
  for (const auto& a : s.workers[0]) CHECK_FALSE(a.is_nop());
  CHECK(validate_schedule(s, tasks).empty());
}

TEST_CASE("validator names both cells of a dependency violation") {
  const std::vector<Task> tasks{gemm_task(0, 1), gemm_task(1, 1, {0})};
  Schedule s;
  s.workers = {{Assignment::of(1), Assignment::of(0)}};
  const auto report = validate_schedule(s, tasks);
  REQUIRE(report.size() == 1);
  CHECK(report[0].find("task 1") != std::string::npos);
  CHECK(report[0].find("dependency 0") != std::string::npos);
  CHECK(report[0].find("step 0") != std::string::npos);
  CHECK(report[0].find("step 1") != std::string::npos);
}

TEST_CASE("validator catches missing, duplicate and ragged schedules") {
  const std::vector<Task> tasks{gemm_task(0, 1), gemm_task(1, 1)};
  Schedule missing;
  missing.workers = {{Assignment::of(0)}};
  CHECK_FALSE(validate_schedule(missing, tasks).empty());
  Schedule dup;
  dup.workers = {{Assignment::of(0), Assignment::of(0)}, {Assignment::of(1), Assignment::nop()}};
  CHECK_FALSE(validate_schedule(dup, tasks).empty());
  Schedule ragged;
  ragged.workers = {{Assignment::of(0), Assignment::nop()}, {Assignment::of(1)}};
  CHECK_FALSE(validate_schedule(ragged, tasks).empty());
  Schedule same_step;
  same_step.workers = {{Assignment::of(0)}, {Assignment::of(1)}};
  CHECK(validate_schedule(same_step, tasks).empty());
}

TEST_CASE("cycles and bad ids are rejected") {
  const std::vector<Task> cyclic{gemm_task(0, 1, {1}), gemm_task(1, 1, {0})};
  CHECK_THROWS_AS(schedule(cyclic, 2), SimulationError);
  const std::vector<Task> dangling{gemm_task(0, 1, {7})};
  CHECK_THROWS_AS(schedule(dangling, 1), ConfigError);
  const std::vector<Task> twice{gemm_task(0, 1), gemm_task(0, 1)};
  CHECK_THROWS_AS(schedule(twice, 1), ConfigError);
  CHECK_THROWS_AS(schedule(std::vector<Task>{gemm_task(0, 1)}, 0), ConfigError);
}

TEST_CASE("empty task list gives an empty schedule") {
  const Schedule s = schedule(std::vector<Task>{}, 3);
  CHECK(s.num_workers() == 3);
  CHECK(s.num_steps() == 0);
}

TEST_CASE("random DAG fuzz") {
  Rng rng(2024);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 500; ++i) {
    const int n = uniform_int(rng, 1, 200);
    const double p = std::uniform_real_distribution<double>(0.0, 0.1)(rng);
    const auto tasks = random_dag(rng, n, p);
    const std::size_t workers = uniform_int<std::size_t>(rng, 1, 8);
    const Schedule s = schedule(tasks, workers);
    INFO("dag " << i << " with " << n << " tasks on " << workers << " workers");
    CHECK(validate_schedule(s, tasks).empty());
    CHECK(s.num_steps() <= tasks.size());
    CHECK(s == schedule(tasks, workers));
  }
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(5));
}

TEST_CASE("small DAGs never beat the brute-force bound") {
  Rng rng(77);
  for (int i = 0; i < 60; ++i) {
    const auto tasks = random_dag(rng, uniform_int(rng, 1, 9), 0.3);
    const std::size_t workers = uniform_int<std::size_t>(rng, 1, 3);
    const Schedule s = schedule(tasks, workers);
    CHECK(static_cast<int>(s.num_steps()) >= brute_force_min_steps(tasks, workers));
  }
}
