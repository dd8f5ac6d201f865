// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <sstream>

#include "deapsim/cli.hpp"
#include "deapsim/serialize.hpp"
#include "support.hpp"

using namespace deapsim;
using deapsim::testing::slurp;
using deapsim::testing::spit;
using deapsim::testing::temp_dir;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

const char* kTorusFile = R"({
  Topology: 2D-torus
  Size: 4
  Dimension: 2
};
{
  Chip_id: 0
  Connected_chip_id: {1, 3}
  Connected_chip_distance: {1, 1}
}
{
  Chip_id: 1
  Connected_chip_id: {0, 2}
  Connected_chip_distance: {1, 1}
}
{
  Chip_id: 2
  Connected_chip_id: {1, 3}
  Connected_chip_distance: {1, 1}
}
{
  Chip_id: 3
  Connected_chip_id: {0, 2}
  Connected_chip_distance: {1, 1}
}
)";

const std::vector<std::string> kTinyModel{"--embedding-dimension", "32", "--forward-dimension", "64",
                                          "--num-heads",           "2",  "--num-decoder-layers", "1",
                                          "--vocab-size",          "100", "--seq-len",          "8"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("gen is byte-for-byte reproducible") {
  const auto a = temp_dir("gen_a"), b = temp_dir("gen_b");
  REQUIRE(cli_run({"gen", "--preset", "gpt2", "--tensor-shards", "4", "--out-dir", a.string()}).code == cli::kOk);
  REQUIRE(cli_run({"gen", "--preset", "gpt2", "--tensor-shards", "4", "--out-dir", b.string()}).code == cli::kOk);
  CHECK(slurp(a / "graph.json") == slurp(b / "graph.json"));
  CHECK(slurp(a / "tasks.json") == slurp(b / "tasks.json"));
  CHECK(tasks_from_json(parse_json(slurp(a / "tasks.json"))).size() > 0);
}

TEST_CASE("gen, sched and sim chain through files") {
  const auto dir = temp_dir("chain");
  const std::string d = dir.string();
  REQUIRE(cli_run(with({"gen", "--out-dir", d, "--tensor-shards", "2"}, kTinyModel)).code == cli::kOk);
  REQUIRE(cli_run({"sched", "--tasks", d + "/tasks.json", "--workers", "4", "--out-dir", d}).code == cli::kOk);
  spit(dir / "torus.txt", kTorusFile);
  const Run r = cli_run({"sim", "--schedule", d + "/schedule.json", "--topology-file", d + "/torus.txt",
                         "--mapping-samples", "5", "--trace-comm", "--out-dir", d});
  REQUIRE(r.code == cli::kOk);
  const Json summary = parse_json(slurp(dir / "summary.json"));
  CHECK(summary.at("total_latency_cycles").get<Count>() > 0);
  CHECK(slurp(dir / "steps.csv").rfind("step,chip,", 0) == 0);
  CHECK(slurp(dir / "comm_trace.csv").rfind("step,tensor,", 0) == 0);

  const auto again = temp_dir("chain_again");
  REQUIRE(cli_run({"sim", "--schedule", d + "/schedule.json", "--topology-file", d + "/torus.txt",
                   "--mapping-samples", "5", "--out-dir", again.string()})
              .code == cli::kOk);
  CHECK(slurp(again / "summary.json") == slurp(dir / "summary.json"));
}

TEST_CASE("sim with a cost table matches a hand computation") {
  const auto dir = temp_dir("hand");
  Task t0;
  t0.id = 0;
  t0.rows = 10;
  t0.in_features = 100;
  t0.out_features = 50;
  t0.flops = 50000;
  t0.inputs = {{{"X"}, 1000}};
  t0.output = {{"Y0"}, 500};
  Task t1 = t0;
  t1.id = 1;
  t1.in_features = 50;
  t1.out_features = 20;
  t1.flops = 10000;
  t1.deps = {0};
  t1.inputs = {{{"Y0"}, 500}};
  t1.output = {{"Y1"}, 200};
  const std::vector<Task> tasks{t0, t1};
  Schedule s;
  s.workers = {{Assignment::of(0), Assignment::nop()},
               {Assignment::nop(), Assignment::of(1)},
               {Assignment::nop(), Assignment::nop()},
               {Assignment::nop(), Assignment::nop()}};
  spit(dir / "schedule.json", schedule_to_json(s, tasks).dump());
  spit(dir / "torus.txt", kTorusFile);
  Json costs = Json::array();
  costs.push_back({{"payload", to_json(to_payload(t0))}, {"cycles", 700}, {"seconds", 1e-6}, {"energy_J", 1e-6}});
  costs.push_back({{"payload", to_json(to_payload(t1))}, {"cycles", 1400}, {"seconds", 2e-6}, {"energy_J", 1e-6}});
  spit(dir / "costs.json", Json{{"costs", costs}}.dump());

  const std::string d = dir.string();
  const Run r = cli_run({"sim", "--schedule", d + "/schedule.json", "--topology-file", d + "/torus.txt",
                         "--cost-table-file", d + "/costs.json", "--out-dir", d});
  REQUIRE(r.code == cli::kOk);
  const Json summary = parse_json(slurp(dir / "summary.json"));
  const double mem_bw = ChipConfig{}.onchip_mem_bw_Bps;
  const double step0 = 1000 / 1e9 + 1000 / mem_bw + 1e-6;
  const double step1 = 500 / 180e9 + 500 / mem_bw + 2e-6;
  CHECK(summary.at("total_latency_s").get<double>() == Catch::Approx(step0 + step1).epsilon(1e-12));
  CHECK(summary.at("num_steps") == 2);
}

TEST_CASE("dse standard writes one row per topology") {
  const auto dir = temp_dir("dse_std");
  const Run r = cli_run(with({"dse", "--search", "standard", "--chips", "4", "--mapping-samples", "3", "--out-dir",
                              dir.string()},
                             kTinyModel));
  REQUIRE(r.code == cli::kOk);
  const std::string csv = slurp(dir / "dse.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(csv.find("No-Connection:4") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "best_topology.txt"));
  CHECK(std::filesystem::exists(dir / "best_schedule.json"));
  const SearchSpace echoed = search_space_from_json(parse_json(slurp(dir / "search_space.json")));
  CHECK(echoed.mapping_samples == 3);
}

TEST_CASE("exit codes") {
  const auto dir = temp_dir("codes");
  const std::string d = dir.string();
  CHECK(cli_run({}).code == cli::kUsage);
  CHECK(cli_run({"gen", "--no-such-flag"}).code == cli::kUsage);
  CHECK(cli_run({"--help"}).code == cli::kOk);

  const Run bad_preset = cli_run({"gen", "--preset", "nope", "--out-dir", d});
  CHECK(bad_preset.code == cli::kConfig);
  CHECK_FALSE(bad_preset.err.empty());

  spit(dir / "tasks.json", "[]");
  CHECK(cli_run({"sched", "--tasks", d + "/tasks.json", "--preset", "gpt2", "--out-dir", d}).code == cli::kConfig);

  spit(dir / "broken.json", "{\n  \"a\": \n");
  CHECK(cli_run({"sched", "--tasks", d + "/broken.json", "--out-dir", d}).code == cli::kParse);
  CHECK(cli_run({"sched", "--tasks", d + "/missing.json", "--out-dir", d}).code == cli::kIo);

  spit(dir / "bad_topo.txt", "{ Topology: custom\n  Size: x\n}");
  CHECK(cli_run(with({"sim", "--topology-file", d + "/bad_topo.txt", "--out-dir", d}, kTinyModel)).code ==
        cli::kParse);
  CHECK(cli_run(with({"sim", "--topology", "2D-torus", "--out-dir", d}, kTinyModel)).code == cli::kConfig);
}

TEST_CASE("simulation failures map to their exit code") {
  const auto dir = temp_dir("simfail");
  const std::string d = dir.string();
  spit(dir / "chip.json", R"({"onchip_mem_bytes": 1024, "scratchpad_bytes": 1024})");
  const Run r = cli_run(with({"sim", "--topology", "2D-torus", "--dims", "2,2", "--hw-config-file",
                              d + "/chip.json", "--mapping-samples", "2", "--out-dir", d},
                             kTinyModel));
  CHECK(r.code == cli::kSimulation);
}
