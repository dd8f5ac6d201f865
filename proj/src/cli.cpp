// SPDX-License-Identifier: Apache-2.0
#include "deapsim/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "deapsim/cost_provider.hpp"
#include "deapsim/csv.hpp"
#include "deapsim/dse.hpp"
#include "deapsim/engine.hpp"
#include "deapsim/error.hpp"
#include "deapsim/serialize.hpp"

namespace deapsim::cli {
namespace {

namespace fs = std::filesystem;

class IoError : public Error {
 public:
  using Error::Error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::string& path) {
  try {
    return parse_json(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("DEAPSIM_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw ConfigError(fmt::format("DEAPSIM_SEED '{}' is not an unsigned integer", env));
    return v;
  }
  return 0;
}

// Model hyperparameters and parallelism flags shared by every subcommand.
struct WorkloadFlags {
  std::string preset;
  std::optional<Count> embedding_dim, forward_dim, num_heads, num_layers, vocab_size, seq_len, batch_size;
  bool attention_gemms = false;
  bool keep_layernorm = false;
  Count microbatches = 1;
  std::optional<Count> tensor_shards;
  std::vector<CLI::Option*> model_options;  // options that select the flag-built workload

  void add(CLI::App* app) {
    model_options = {
        app->add_option("--preset", preset, "Model preset (gpt2, bert, llm, llm-2)"),
        app->add_option("--embedding-dimension", embedding_dim),
        app->add_option("--forward-dimension", forward_dim),
        app->add_option("--num-heads", num_heads),
        app->add_option("--num-decoder-layers", num_layers),
        app->add_option("--vocab-size", vocab_size),
        app->add_option("--seq-len", seq_len),
        app->add_option("--batch-size", batch_size),
        app->add_flag("--model-attention-gemms", attention_gemms, "Add QK^T and AV GEMMs per block"),
        app->add_flag("--keep-layernorm", keep_layernorm, "Keep LayerNorm as zero-FLOP tasks"),
        app->add_option("--microbatches", microbatches, "Pipeline microbatches")->capture_default_str(),
        app->add_option("--tensor-shards", tensor_shards, "Output-column shards per layer"),
    };
  }

  bool given() const {
    return std::any_of(model_options.begin(), model_options.end(), [](const CLI::Option* o) { return o->count() > 0; });
  }

  LLMConfig config() const {
    LLMConfig c = preset.empty() ? LLMConfig{} : llm_preset(preset);
    if (embedding_dim) c.embedding_dim = *embedding_dim;
    if (forward_dim) c.forward_dim = *forward_dim;
    if (num_heads) c.num_heads = *num_heads;
    if (num_layers) c.num_decoder_layers = *num_layers;
    if (vocab_size) c.vocab_size = *vocab_size;
    if (seq_len) c.seq_len = *seq_len;
    if (batch_size) c.batch_size = *batch_size;
    c.model_attention_gemms = c.model_attention_gemms || attention_gemms;
    c.validate();
    return c;
  }

  LayerGraph pruned() const { return prune_inference_layers(build_llm(config()), {keep_layernorm}); }

  std::vector<Task> tasks(Count default_shards) const {
    return split(pruned(), {microbatches, tensor_shards.value_or(default_shards), 1});
  }
};

void require_single_source(bool a, bool b, std::string_view what) {
  if (a && b) throw ConfigError(fmt::format("conflicting {} sources given", what));
}

// ---- gen ----

struct GenArgs {
  WorkloadFlags workload;
  std::string out_dir = ".";
};

void run_gen(const GenArgs& a, std::ostream& out) {
  const LLMConfig config = a.workload.config();
  const auto dir = prepare_out_dir(a.out_dir);
  const auto tasks = a.workload.tasks(1);
  Json graph = to_json(build_llm(config));
  write_json(dir / "graph.json", graph);
  write_json(dir / "tasks.json", tasks_to_json(tasks));
  fmt::print(out, "wrote {} and {} ({} tasks)\n", (dir / "graph.json").string(), (dir / "tasks.json").string(),
             tasks.size());
}

// ---- sched ----

struct SchedArgs {
  WorkloadFlags workload;
  std::string tasks_file;
  std::size_t workers = 1;
  bool legacy_payload = false;
  std::string out_dir = ".";
};

void run_sched(const SchedArgs& a, std::ostream& out) {
  require_single_source(!a.tasks_file.empty(), a.workload.given(), "workload");
  const auto tasks =
      a.tasks_file.empty() ? a.workload.tasks(1) : tasks_from_json(read_json_file(a.tasks_file));
  const Schedule s = schedule(tasks, a.workers);
  const auto dir = prepare_out_dir(a.out_dir);
  write_json(dir / "schedule.json",
             schedule_to_json(s, tasks, a.legacy_payload ? PayloadConvention::Legacy : PayloadConvention::Canonical));
  fmt::print(out, "wrote {} ({} workers, {} steps)\n", (dir / "schedule.json").string(), s.num_workers(),
             s.num_steps());
}

// ---- sim ----

struct SimArgs {
  WorkloadFlags workload;
  std::string schedule_file;
  std::string tasks_file;
  std::string topology_file;
  std::string topology_kind;
  std::vector<int> dims;
  std::string hw_config_file;
  std::string link_table_file;
  std::string cost_table_file;
  std::string bandwidth_policy = "source";
  std::size_t mapping_samples = 1000;
  std::optional<std::uint64_t> seed;
  bool trace_comm = false;
  bool parallel = false;
  std::string out_dir = ".";
};

Topology load_topology(const std::string& file, const std::string& kind, const std::vector<int>& dims) {
  require_single_source(!file.empty(), !kind.empty(), "topology");
  if (!file.empty()) {
    const std::string text = read_file(file);
    try {
      return parse_topology(text);
    } catch (const ParseError& e) {
      throw ParseError(file + ": " + e.what());
    }
  }
  if (kind.empty()) throw ConfigError("no topology given (use --topology-file or --topology with --dims)");
  if (dims.empty()) throw ConfigError("--topology needs --dims");
  return generate_topology(topology_kind_from_string(kind), dims);
}

std::unique_ptr<MockCostProvider> load_cost_table(const std::string& path) {
  const Json j = read_json_file(path);
  if (!j.is_object() || !j.contains("costs") || !j.at("costs").is_array()) {
    throw ParseError(path + ": cost table must be an object with a 'costs' array");
  }
  auto mock = std::make_unique<MockCostProvider>();
  for (const Json& e : j.at("costs")) {
    if (!e.is_object() || !e.contains("payload")) throw ParseError(path + ": cost entry needs a 'payload'");
    ProcCost c;
    c.cycles = e.value("cycles", Count{0});
    c.seconds = e.value("seconds", 0.0);
    c.energy_J = e.value("energy_J", 0.0);
    mock->set(payload_from_json(e.at("payload")), c);
  }
  return mock;
}

BandwidthPolicy policy_from_string(const std::string& s) {
  if (s == "source") return BandwidthPolicy::SourceSide;
  if (s == "dest") return BandwidthPolicy::DestSide;
  if (s == "path-min") return BandwidthPolicy::PathMinimum;
  throw ConfigError("bandwidth policy must be source, dest or path-min");
}

void run_sim(const SimArgs& a, std::ostream& out) {
  const bool from_files = !a.schedule_file.empty() || !a.tasks_file.empty();
  require_single_source(!a.schedule_file.empty(), !a.tasks_file.empty(), "workload");
  require_single_source(from_files, a.workload.given(), "workload");

  const Topology topology = load_topology(a.topology_file, a.topology_kind, a.dims);
  const ChipConfig chip = a.hw_config_file.empty() ? ChipConfig{} : chip_config_from_json(read_json_file(a.hw_config_file));
  const auto chips = uniform_chips(chip, topology.size());

  ScheduledWorkload work;
  if (!a.schedule_file.empty()) {
    work = schedule_from_json(read_json_file(a.schedule_file));
  } else {
    work.tasks = a.tasks_file.empty() ? a.workload.tasks(1) : tasks_from_json(read_json_file(a.tasks_file));
    work.schedule = schedule(work.tasks, static_cast<std::size_t>(topology.size()));
  }

  SimOptions options;
  options.seed = resolve_seed(a.seed);
  options.exec = a.parallel ? Exec::Parallel : Exec::Serial;
  options.bandwidth_policy = policy_from_string(a.bandwidth_policy);
  options.trace_comm = a.trace_comm;
  if (!a.link_table_file.empty()) options.link_table = link_table_from_json(read_json_file(a.link_table_file));

  std::unique_ptr<CostProvider> provider;
  if (!a.cost_table_file.empty()) {
    provider = load_cost_table(a.cost_table_file);
  } else {
    if (a.mapping_samples < 1) throw ConfigError("--mapping-samples must be >= 1");
    provider = std::make_unique<AnalyticalCostProvider>(MappingSearchOptions{a.mapping_samples, false, options.exec});
  }

  const SimReport report = simulate(work.schedule, work.tasks, topology, chips, *provider, options);
  const auto dir = prepare_out_dir(a.out_dir);
  write_json(dir / "summary.json", report_summary_json(report));
  std::ostringstream steps;
  write_steps_csv(steps, report);
  write_file(dir / "steps.csv", steps.str());
  if (a.trace_comm) {
    std::ostringstream trace;
    write_comm_trace_csv(trace, report);
    write_file(dir / "comm_trace.csv", trace.str());
  }
  fmt::print(out, "{} steps, {} cycles ({} s), {} J\n", report.steps.size(), report.total_latency_cycles,
             report.total_latency_s, report.total_energy_J);
}

// ---- dse ----

struct DseArgs {
  WorkloadFlags workload;
  std::string search = "standard";
  std::string search_space_file;
  int chips = 8;
  int max_count = 36;
  std::string sweep_kind = "2D-torus";
  std::string order = "memory-first";
  std::optional<std::size_t> candidates, mapping_samples, hw_samples, outer_iters;
  std::optional<int> max_chips, link_budget;
  std::optional<std::uint64_t> seed;
  bool parallel = false;
  std::string out_dir = ".";
};

void write_bundle(const fs::path& dir, const Evaluation& best) {
  write_file(dir / "best_topology.txt", emit_topology(best.topology));
  write_json(dir / "best_chip.json", to_json(best.chip));
  write_json(dir / "best_schedule.json", schedule_to_json(best.schedule, best.tasks));
  write_json(dir / "best_summary.json", report_summary_json(best.report));
  std::ostringstream steps;
  write_steps_csv(steps, best.report);
  write_file(dir / "best_steps.csv", steps.str());
}

void run_dse(const DseArgs& a, std::ostream& out) {
  SearchSpace space;
  if (!a.search_space_file.empty()) space = search_space_from_json(read_json_file(a.search_space_file));
  if (a.candidates) space.topology_candidates = *a.candidates;
  if (a.mapping_samples) space.mapping_samples = *a.mapping_samples;
  if (a.hw_samples) space.hw_samples = *a.hw_samples;
  if (a.outer_iters) space.outer_iters = *a.outer_iters;
  if (a.max_chips) space.topology.max_chips = *a.max_chips;
  if (a.link_budget) space.topology.link_budget = *a.link_budget;
  if (a.seed || a.search_space_file.empty()) space.seed = resolve_seed(a.seed);
  space.validate();

  const LLMConfig config = a.workload.config();
  Workload workload = make_workload(config, {a.workload.keep_layernorm}, a.workload.microbatches,
                                    a.workload.tensor_shards.value_or(0), a.workload.preset);
  const Exec exec = a.parallel ? Exec::Parallel : Exec::Serial;
  const auto dir = prepare_out_dir(a.out_dir);

  DSEResult result;
  if (a.search == "topologies") {
    result = search_topologies(workload, space, exec);
  } else if (a.search == "standard") {
    result = compare_standard_topologies(workload, a.chips, space, exec);
  } else if (a.search == "sweep") {
    const SweepResult sweep = sweep_chip_count(workload, topology_kind_from_string(a.sweep_kind), a.max_count, space, exec);
    std::ostringstream shapes;
    CsvWriter csv(shapes, {"chips", "shape", "latency_cycles", "best"});
    for (const SweepRow& row : sweep.rows) {
      for (std::size_t i = 0; i < row.shapes.size(); ++i) {
        csv.row({csv_field(row.chips), row.shapes[i].first, csv_field(row.shapes[i].second),
                 i == row.best_shape ? "1" : "0"});
      }
    }
    write_file(dir / "sweep_shapes.csv", shapes.str());
    result.trace = sweep.trace;
  } else if (a.search == "dual") {
    FlowOrder order;
    if (a.order == "memory-first") {
      order = FlowOrder::MemoryFirst;
    } else if (a.order == "topology-first") {
      order = FlowOrder::TopologyFirst;
    } else {
      throw ConfigError("--order must be memory-first or topology-first");
    }
    result = dual_flow(order, space, workload, exec);
  }

  std::ostringstream csv;
  write_trace_csv(csv, result.trace);
  write_file(dir / "dse.csv", csv.str());
  write_json(dir / "search_space.json", to_json(space));
  if (result.best) write_bundle(dir, *result.best);

  const auto b = result.trace.best_index();
  if (b) {
    const TraceEntry& e = result.trace.entries[*b];
    fmt::print(out, "{} candidates, best {} at {} cycles\n", result.trace.entries.size(), e.descriptor,
               e.latency_cycles);
  } else {
    fmt::print(out, "{} candidates, none feasible\n", result.trace.entries.size());
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-chip LLM inference simulator and design-space explorer", "deapsim"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Emit the layer graph and partitioned tasks");
  gen.workload.add(gen_cmd);
  gen_cmd->add_option("--out-dir", gen.out_dir)->capture_default_str();

  SchedArgs sched;
  auto* sched_cmd = app.add_subcommand("sched", "Schedule tasks onto workers");
  sched.workload.add(sched_cmd);
  sched_cmd->add_option("--tasks", sched.tasks_file, "Tasks file from gen");
  sched_cmd->add_option("--workers", sched.workers)->capture_default_str()->check(CLI::PositiveNumber);
  sched_cmd->add_flag("--paper-payload", sched.legacy_payload, "Emit payloads in the C=K=rows, P=out convention");
  sched_cmd->add_option("--out-dir", sched.out_dir)->capture_default_str();

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("sim", "Simulate a schedule on a topology");
  sim.workload.add(sim_cmd);
  sim_cmd->add_option("--schedule", sim.schedule_file, "Schedule file from sched");
  sim_cmd->add_option("--tasks", sim.tasks_file, "Tasks file; scheduled onto every chip");
  sim_cmd->add_option("--topology-file", sim.topology_file);
  sim_cmd->add_option("--topology", sim.topology_kind, "2D-torus, 3D-torus, 2D-mesh or disconnected");
  sim_cmd->add_option("--dims", sim.dims, "Comma-separated dimensions")->delimiter(',');
  sim_cmd->add_option("--hw-config-file", sim.hw_config_file);
  sim_cmd->add_option("--link-table-file", sim.link_table_file);
  sim_cmd->add_option("--cost-table-file", sim.cost_table_file, "Fixed per-payload costs instead of mapping search");
  sim_cmd->add_option("--bandwidth-policy", sim.bandwidth_policy)
      ->check(CLI::IsMember({"source", "dest", "path-min"}))
      ->capture_default_str();
  sim_cmd->add_option("--mapping-samples", sim.mapping_samples)->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed);
  sim_cmd->add_flag("--trace-comm", sim.trace_comm, "Also write comm_trace.csv");
  sim_cmd->add_flag("--parallel", sim.parallel, "Price payloads with the OpenMP kernel");
  sim_cmd->add_option("--out-dir", sim.out_dir)->capture_default_str();

  DseArgs dse;
  auto* dse_cmd = app.add_subcommand("dse", "Design-space exploration");
  dse.workload.add(dse_cmd);
  dse_cmd->add_option("--search", dse.search)
      ->check(CLI::IsMember({"topologies", "standard", "sweep", "dual"}))
      ->capture_default_str();
  dse_cmd->add_option("--search-space-file", dse.search_space_file);
  dse_cmd->add_option("--chips", dse.chips, "Chip count for the standard comparison")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  dse_cmd->add_option("--max-count", dse.max_count, "Largest chip count of the sweep")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  dse_cmd->add_option("--sweep-topology", dse.sweep_kind)->capture_default_str();
  dse_cmd->add_option("--order", dse.order, "memory-first or topology-first")->capture_default_str();
  dse_cmd->add_option("--candidates", dse.candidates, "Random topology candidates");
  dse_cmd->add_option("--mapping-samples", dse.mapping_samples);
  dse_cmd->add_option("--hw-samples", dse.hw_samples);
  dse_cmd->add_option("--outer-iters", dse.outer_iters);
  dse_cmd->add_option("--max-chips", dse.max_chips);
  dse_cmd->add_option("--link-budget", dse.link_budget);
  dse_cmd->add_option("--seed", dse.seed);
  dse_cmd->add_flag("--parallel", dse.parallel, "Evaluate candidates with OpenMP");
  dse_cmd->add_option("--out-dir", dse.out_dir)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (gen_cmd->parsed()) run_gen(gen, out);
    if (sched_cmd->parsed()) run_sched(sched, out);
    if (sim_cmd->parsed()) run_sim(sim, out);
    if (dse_cmd->parsed()) run_dse(dse, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const SimulationError& e) {
    err << "simulation error: " << e.what() << "\n";
    return kSimulation;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "parse error: " << e.what() << "\n";
    return kParse;
  }
  return kOk;
}

}  // namespace deapsim::cli
