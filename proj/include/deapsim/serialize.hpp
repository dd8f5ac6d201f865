// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "deapsim/dse.hpp"
#include "deapsim/engine.hpp"
#include "deapsim/payload.hpp"
#include "deapsim/procmodel.hpp"
#include "deapsim/scheduler.hpp"
#include "deapsim/topology.hpp"
#include "deapsim/workload.hpp"

namespace deapsim {

using Json = nlohmann::json;

/// Reads a JSON document, mapping syntax errors to ParseError with a line number.
Json parse_json(const std::string& text);

Json to_json(const LLMConfig& config);
Json to_json(const LayerGraph& graph);

Json to_json(const Task& task);
Task task_from_json(const Json& j);
Json tasks_to_json(const std::vector<Task>& tasks);
std::vector<Task> tasks_from_json(const Json& j);

/// Exactly the payload fields, keys sorted.
Json to_json(const WorkloadPayload& payload);
WorkloadPayload payload_from_json(const Json& j);

/// Schedule file: one array per worker, one object per step. A task entry is
/// its payload fields plus the task record needed to replay it (task, layer,
/// kind, microbatch, shard, rows, in_features, out_features, flops, deps,
/// inputs, output); a NOP is {"type": "NOP"}.
Json schedule_to_json(const Schedule& schedule, const std::vector<Task>& tasks,
                      PayloadConvention convention = PayloadConvention::Canonical);

struct ScheduledWorkload {
  Schedule schedule;
  std::vector<Task> tasks;
};
ScheduledWorkload schedule_from_json(const Json& j);

Json to_json(const ChipConfig& chip);
/// Missing fields keep their defaults; unknown fields are rejected.
ChipConfig chip_config_from_json(const Json& j);

Json to_json(const LinkBandwidthTable& table);
LinkBandwidthTable link_table_from_json(const Json& j);

/// Search-space file. Every SearchSpace field may be given; missing ones keep
/// their defaults and unknown keys are rejected.
Json to_json(const SearchSpace& space);
SearchSpace search_space_from_json(const Json& j);

/// Structured summary of a run (totals, utilization, per-step aggregates).
Json report_summary_json(const SimReport& report);

}  // namespace deapsim
