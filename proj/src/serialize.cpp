// SPDX-License-Identifier: Apache-2.0
#include "deapsim/serialize.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "deapsim/error.hpp"

namespace deapsim {
namespace {

const std::vector<std::string> kPayloadKeys{"C", "K", "N", "P", "Q", "R", "S",
                                            "Wdilation", "Wstride", "Hdilation", "Hstride", "type"};

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(fmt::format("missing field '{}'", key));
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("field '{}': {}", key, e.what()));
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& into) {
  if (j.contains(key)) into = get<T>(j, key);
}

Json tensor_json(const TensorRef& t) { return {{"id", t.id.name}, {"bytes", t.bytes}}; }

TensorRef tensor_from_json(const Json& j) { return {{get<std::string>(j, "id")}, get<Count>(j, "bytes")}; }

}  // namespace

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Convert the byte offset to a line number.
    int line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ParseError(e.what(), line);
  }
}

Json to_json(const LLMConfig& c) {
  return {{"embedding_dim", c.embedding_dim},   {"forward_dim", c.forward_dim},
          {"num_heads", c.num_heads},           {"num_decoder_layers", c.num_decoder_layers},
          {"vocab_size", c.vocab_size},         {"seq_len", c.seq_len},
          {"batch_size", c.batch_size},         {"model_attention_gemms", c.model_attention_gemms}};
}

Json to_json(const LayerGraph& graph) {
  Json layers = Json::array();
  for (const auto& l : graph.layers) {
    layers.push_back({{"id", l.id},
                      {"kind", std::string(to_string(l.kind))},
                      {"in_features", l.in_features},
                      {"out_features", l.out_features},
                      {"batch_rows", l.batch_rows},
                      {"flops", layer_flops(l)},
                      {"deps", l.deps}});
  }
  return {{"layers", layers}};
}

Json to_json(const Task& t) {
  Json inputs = Json::array();
  for (const auto& in : t.inputs) inputs.push_back(tensor_json(in));
  return {{"task", t.id},
          {"layer", t.layer_id},
          {"kind", std::string(to_string(t.kind))},
          {"microbatch", t.microbatch},
          {"shard", t.shard},
          {"rows", t.rows},
          {"in_features", t.in_features},
          {"out_features", t.out_features},
          {"flops", t.flops},
          {"deps", t.deps},
          {"inputs", inputs},
          {"output", tensor_json(t.output)}};
}

Task task_from_json(const Json& j) {
  Task t;
  t.id = get<TaskId>(j, "task");
  t.layer_id = get<LayerId>(j, "layer");
  t.kind = layer_kind_from_string(get<std::string>(j, "kind"));
  t.microbatch = get<Count>(j, "microbatch");
  t.shard = get<Count>(j, "shard");
  t.rows = get<Count>(j, "rows");
  t.in_features = get<Count>(j, "in_features");
  t.out_features = get<Count>(j, "out_features");
  t.flops = get<Count>(j, "flops");
  t.deps = get<std::vector<TaskId>>(j, "deps");
  for (const auto& in : get<Json>(j, "inputs")) t.inputs.push_back(tensor_from_json(in));
  t.output = tensor_from_json(get<Json>(j, "output"));
  return t;
}

Json tasks_to_json(const std::vector<Task>& tasks) {
  Json arr = Json::array();
  for (const auto& t : tasks) arr.push_back(to_json(t));
  return {{"tasks", arr}};
}

std::vector<Task> tasks_from_json(const Json& j) {
  std::vector<Task> tasks;
  for (const auto& t : get<Json>(j, "tasks")) tasks.push_back(task_from_json(t));
  return tasks;
}

Json to_json(const WorkloadPayload& p) {
  return {{"C", p.C},
          {"K", p.K},
          {"N", p.N},
          {"P", p.P},
          {"Q", p.Q},
          {"R", p.R},
          {"S", p.S},
          {"Wdilation", p.Wdilation},
          {"Wstride", p.Wstride},
          {"Hdilation", p.Hdilation},
          {"Hstride", p.Hstride},
          {"type", p.type}};
}

WorkloadPayload payload_from_json(const Json& j) {
  WorkloadPayload p;
  p.type = get<std::string>(j, "type");
  if (p.is_nop()) return WorkloadPayload::nop();
  p.C = get<Count>(j, "C");
  p.K = get<Count>(j, "K");
  p.N = get<Count>(j, "N");
  p.P = get<Count>(j, "P");
  p.Q = get<Count>(j, "Q");
  p.R = get<Count>(j, "R");
  p.S = get<Count>(j, "S");
  read_opt(j, "Wdilation", p.Wdilation);
  read_opt(j, "Wstride", p.Wstride);
  read_opt(j, "Hdilation", p.Hdilation);
  read_opt(j, "Hstride", p.Hstride);
  return p;
}

Json schedule_to_json(const Schedule& schedule, const std::vector<Task>& tasks, PayloadConvention convention) {
  std::unordered_map<TaskId, const Task*> by_id;
  for (const auto& t : tasks) by_id.emplace(t.id, &t);
  Json workers = Json::array();
  for (const auto& row : schedule.workers) {
    Json entries = Json::array();
    for (const auto& a : row) {
      if (a.is_nop()) {
        entries.push_back({{"type", kNopType}});
        continue;
      }
      const Task& task = *by_id.at(*a.task);
      Json entry = task.is_gemm() ? to_json(to_payload(task, convention)) : Json{{"type", std::string(to_string(task.kind))}};
      entry.update(to_json(task));
      entries.push_back(std::move(entry));
    }
    workers.push_back(std::move(entries));
  }
  return workers;
}

ScheduledWorkload schedule_from_json(const Json& j) {
  if (!j.is_array()) throw ParseError("schedule must be an array with one entry list per worker");
  ScheduledWorkload out;
  std::set<TaskId> seen;
  std::size_t steps = 0;
  for (std::size_t w = 0; w < j.size(); ++w) {
    const Json& row = j[w];
    if (!row.is_array()) throw ParseError(fmt::format("worker {} must be an array", w));
    if (w == 0) steps = row.size();
    if (row.size() != steps) throw ParseError(fmt::format("worker {} has {} steps, expected {}", w, row.size(), steps));
    std::vector<Assignment> assignments;
    for (const auto& entry : row) {
      if (get<std::string>(entry, "type") == kNopType) {
        assignments.push_back(Assignment::nop());
        continue;
      }
      Task task = task_from_json(entry);
      assignments.push_back(Assignment::of(task.id));
      if (seen.insert(task.id).second) out.tasks.push_back(std::move(task));
    }
    out.schedule.workers.push_back(std::move(assignments));
  }
  std::sort(out.tasks.begin(), out.tasks.end(), [](const Task& a, const Task& b) { return a.id < b.id; });
  return out;
}

Json to_json(const ChipConfig& c) {
  return {{"pe_rows", c.pe_rows},
          {"pe_cols", c.pe_cols},
          {"frequency_hz", c.frequency_hz},
          {"scratchpad_bytes", c.scratchpad_bytes},
          {"onchip_mem_bytes", c.onchip_mem_bytes},
          {"onchip_mem_bw_Bps", c.onchip_mem_bw_Bps},
          {"dram_bw_Bps", c.dram_bw_Bps},
          {"element_bytes", c.element_bytes},
          {"energy",
           {{"mac_J", c.energy.mac_J},
            {"sram_byte_J", c.energy.sram_byte_J},
            {"dram_byte_J", c.energy.dram_byte_J},
            {"link_W", c.energy.link_W}}}};
}

ChipConfig chip_config_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("chip config must be an object");
  static const std::set<std::string> known{"pe_rows",          "pe_cols",           "frequency_hz",
                                           "scratchpad_bytes", "onchip_mem_bytes",  "onchip_mem_bw_Bps",
                                           "dram_bw_Bps",      "element_bytes",     "energy"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ParseError("unknown chip config field '" + key + "'");
  }
  ChipConfig c;
  read_opt(j, "pe_rows", c.pe_rows);
  read_opt(j, "pe_cols", c.pe_cols);
  read_opt(j, "frequency_hz", c.frequency_hz);
  read_opt(j, "scratchpad_bytes", c.scratchpad_bytes);
  read_opt(j, "onchip_mem_bytes", c.onchip_mem_bytes);
  read_opt(j, "onchip_mem_bw_Bps", c.onchip_mem_bw_Bps);
  read_opt(j, "dram_bw_Bps", c.dram_bw_Bps);
  read_opt(j, "element_bytes", c.element_bytes);
  if (j.contains("energy")) {
    const Json& e = j.at("energy");
    read_opt(e, "mac_J", c.energy.mac_J);
    read_opt(e, "sram_byte_J", c.energy.sram_byte_J);
    read_opt(e, "dram_byte_J", c.energy.dram_byte_J);
    read_opt(e, "link_W", c.energy.link_W);
  }
  c.validate();
  return c;
}

Json to_json(const LinkBandwidthTable& table) {
  Json links = Json::object();
  for (const auto& [count, bw] : table.by_link_count) links[std::to_string(count)] = bw;
  return {{"nic_GBps", table.nic_GBps}, {"links_GBps", links}};
}

LinkBandwidthTable link_table_from_json(const Json& j) {
  LinkBandwidthTable t;
  read_opt(j, "nic_GBps", t.nic_GBps);
  if (j.contains("links_GBps")) {
    t.by_link_count.clear();
    for (const auto& [key, value] : j.at("links_GBps").items()) {
      int count = 0;
      try {
        count = std::stoi(key);
      } catch (const std::exception&) {
        throw ParseError("link count '" + key + "' is not an integer");
      }
      if (count < 1) throw ParseError("link counts must be >= 1");
      t.by_link_count[count] = value.get<double>();
    }
  }
  if (!(t.nic_GBps > 0)) throw ConfigError("NIC bandwidth must be positive");
  for (const auto& [count, bw] : t.by_link_count) {
    if (!(bw > 0)) throw ConfigError(fmt::format("bandwidth for {} links must be positive", count));
  }
  return t;
}

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, std::string_view what) {
  if (!j.is_object()) throw ParseError(fmt::format("{} must be an object", what));
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ParseError(fmt::format("unknown {} field '{}'", what, key));
  }
}

}  // namespace

Json to_json(const SearchSpace& s) {
  Json kinds = Json::array();
  for (TopologyKind k : s.topology.kinds) kinds.push_back(std::string(to_string(k)));
  return {{"topology",
           {{"mode", s.topology.mode == TopologySpace::Mode::Random ? "random" : "standard"},
            {"max_chips", s.topology.max_chips},
            {"link_budget", s.topology.link_budget},
            {"kinds", kinds}}},
          {"hw",
           {{"base", to_json(s.hw.base)},
            {"pe_dims", s.hw.pe_dims},
            {"scratchpad_bytes", s.hw.scratchpad_bytes},
            {"onchip_mem_bw_Bps", s.hw.onchip_mem_bw_Bps},
            {"onchip_mem_bytes", s.hw.onchip_mem_bytes}}},
          {"mapping_samples", s.mapping_samples},
          {"hw_samples", s.hw_samples},
          {"topology_candidates", s.topology_candidates},
          {"outer_iters", s.outer_iters},
          {"seed", s.seed},
          {"link_table", to_json(s.link_table)}};
}

SearchSpace search_space_from_json(const Json& j) {
  reject_unknown(j,
                 {"topology", "hw", "mapping_samples", "hw_samples", "topology_candidates", "outer_iters", "seed",
                  "link_table"},
                 "search space");
  SearchSpace s;
  if (j.contains("topology")) {
    const Json& t = j.at("topology");
    reject_unknown(t, {"mode", "max_chips", "link_budget", "kinds"}, "topology space");
    if (t.contains("mode")) {
      const auto mode = get<std::string>(t, "mode");
      if (mode == "random") {
        s.topology.mode = TopologySpace::Mode::Random;
      } else if (mode == "standard") {
        s.topology.mode = TopologySpace::Mode::Standard;
      } else {
        throw ParseError("topology mode must be 'random' or 'standard', got '" + mode + "'");
      }
    }
    read_opt(t, "max_chips", s.topology.max_chips);
    read_opt(t, "link_budget", s.topology.link_budget);
    if (t.contains("kinds")) {
      s.topology.kinds.clear();
      for (const auto& name : get<std::vector<std::string>>(t, "kinds")) {
        try {
          s.topology.kinds.push_back(topology_kind_from_string(name));
        } catch (const Error& e) {
          throw ParseError(e.what());
        }
      }
    }
  }
  if (j.contains("hw")) {
    const Json& h = j.at("hw");
    reject_unknown(h, {"base", "pe_dims", "scratchpad_bytes", "onchip_mem_bw_Bps", "onchip_mem_bytes"}, "hw space");
    if (h.contains("base")) s.hw.base = chip_config_from_json(h.at("base"));
    read_opt(h, "pe_dims", s.hw.pe_dims);
    read_opt(h, "scratchpad_bytes", s.hw.scratchpad_bytes);
    read_opt(h, "onchip_mem_bw_Bps", s.hw.onchip_mem_bw_Bps);
    read_opt(h, "onchip_mem_bytes", s.hw.onchip_mem_bytes);
  }
  read_opt(j, "mapping_samples", s.mapping_samples);
  read_opt(j, "hw_samples", s.hw_samples);
  read_opt(j, "topology_candidates", s.topology_candidates);
  read_opt(j, "outer_iters", s.outer_iters);
  read_opt(j, "seed", s.seed);
  if (j.contains("link_table")) s.link_table = link_table_from_json(j.at("link_table"));
  s.validate();
  return s;
}

Json report_summary_json(const SimReport& r) {
  Json steps = Json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"step", s.step},
                     {"overall_latency_s", s.overall_latency_s},
                     {"overall_latency_cycles", s.overall_latency_cycles},
                     {"overall_power_W", s.overall_power_W},
                     {"energy_J", s.energy_J},
                     {"transfers", s.num_transfers}});
  }
  return {{"num_steps", r.steps.size()},
          {"total_latency_s", r.total_latency_s},
          {"total_latency_cycles", r.total_latency_cycles},
          {"reference_frequency_hz", r.reference_hz},
          {"total_energy_J", r.total_energy_J},
          {"average_power_W", r.average_power_W()},
          {"power_sum_over_steps_W", r.power_sum_W},
          {"utilization", r.utilization},
          {"steps", steps}};
}

}  // namespace deapsim
