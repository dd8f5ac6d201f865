// SPDX-License-Identifier: Apache-2.0
#include "deapsim/partition.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "deapsim/error.hpp"

namespace deapsim {
namespace {

bool is_pruned(LayerKind kind, const PruneOptions& options) {
  if (kind == LayerKind::Dropout) return true;
  return kind == LayerKind::LayerNorm && !options.keep_layernorm;
}

// Size of part `index` when `total` is cut into `parts`, remainder to the last.
Count slice_size(Count total, Count parts, Count index) {
  const Count base = total / parts;
  return index + 1 == parts ? total - base * (parts - 1) : base;
}

}  // namespace

Count Task::bytes_in() const {
  return std::accumulate(inputs.begin(), inputs.end(), Count{0},
                         [](Count acc, const TensorRef& t) { return acc + t.bytes; });
}

bool is_task_bearing(LayerKind kind) { return is_gemm(kind) || kind == LayerKind::LayerNorm; }

LayerGraph prune_inference_layers(const LayerGraph& graph, PruneOptions options) {
  // resolved[id] = deps of `id` expressed only in retained layers.
  std::map<LayerId, std::vector<LayerId>> resolved;
  LayerGraph out;
  for (const auto& layer : graph.layers) {
    std::vector<LayerId> deps;
    for (LayerId d : layer.deps) {
      auto it = resolved.find(d);
      if (it == resolved.end()) {
        deps.push_back(d);  // retained (or unknown) predecessor
      } else {
        deps.insert(deps.end(), it->second.begin(), it->second.end());
      }
    }
    std::sort(deps.begin(), deps.end());
    deps.erase(std::unique(deps.begin(), deps.end()), deps.end());

    if (is_pruned(layer.kind, options)) {
      resolved[layer.id] = std::move(deps);
    } else {
      Layer kept = layer;
      kept.deps = std::move(deps);
      out.layers.push_back(std::move(kept));
    }
  }
  return out;
}

std::vector<Task> split(const LayerGraph& graph, const SplitOptions& options) {
  const Count m_count = options.microbatches;
  const Count s_count = options.tensor_shards;
  if (m_count < 1) throw ConfigError("microbatches must be >= 1");
  if (s_count < 1) throw ConfigError("tensor shards must be >= 1");
  if (options.bytes_per_element < 1) throw ConfigError("bytes per element must be >= 1");
  const Count elem = options.bytes_per_element;

  for (const auto& layer : graph.layers) {
    if (!is_task_bearing(layer.kind)) continue;
    if (s_count > layer.out_features) {
      throw ConfigError(fmt::format("tensor shards ({}) exceed out_features ({}) of layer {}", s_count,
                                    layer.out_features, layer.id));
    }
    if (m_count > layer.batch_rows) {
      throw ConfigError(fmt::format("microbatches ({}) exceed batch rows ({}) of layer {}", m_count,
                                    layer.batch_rows, layer.id));
    }
  }

  // For every layer, the task-bearing layers it (transitively) feeds from.
  std::map<LayerId, std::vector<LayerId>> sources;
  // First task id of every task-bearing layer; tasks are laid out m-major.
  std::map<LayerId, TaskId> first_task;
  std::vector<Task> tasks;

  for (const auto& layer : graph.layers) {
    std::set<LayerId> producer_set;
    for (LayerId d : layer.deps) {
      if (first_task.count(d)) {
        producer_set.insert(d);
      } else if (auto it = sources.find(d); it != sources.end()) {
        producer_set.insert(it->second.begin(), it->second.end());
      }
    }
    std::vector<LayerId> producers(producer_set.begin(), producer_set.end());

    if (!is_task_bearing(layer.kind)) {
      sources[layer.id] = std::move(producers);
      continue;
    }

    first_task[layer.id] = static_cast<TaskId>(tasks.size());
    const bool gemm = is_gemm(layer.kind);
    for (Count m = 0; m < m_count; ++m) {
      const Count rows = slice_size(layer.batch_rows, m_count, m);
      for (Count s = 0; s < s_count; ++s) {
        Task t;
        t.id = static_cast<TaskId>(tasks.size());
        t.layer_id = layer.id;
        t.kind = layer.kind;
        t.microbatch = m;
        t.shard = s;
        t.rows = rows;
        t.in_features = layer.in_features;
        t.out_features = slice_size(layer.out_features, s_count, s);
        t.flops = gemm ? gemm_flops(t.rows, t.in_features, t.out_features) : 0;

        for (LayerId p : producers) {
          const TaskId base = first_task.at(p) + static_cast<TaskId>(m * s_count);
          for (Count ps = 0; ps < s_count; ++ps) {
            const Task& dep = tasks[static_cast<std::size_t>(base) + ps];
            t.deps.push_back(dep.id);
            t.inputs.push_back(dep.output);
          }
        }
        if (producers.empty()) {
          t.inputs.push_back({{fmt::format("X{}.m{}", layer.id, m)}, rows * layer.in_features * elem});
        }
        if (gemm) {
          t.inputs.push_back({{fmt::format("W{}.s{}", layer.id, s)}, layer.in_features * t.out_features * elem});
        }
        t.output = {{fmt::format("L{}.m{}.s{}", layer.id, m, s)}, t.out_features * rows * elem};
        tasks.push_back(std::move(t));
      }
    }
  }
  return tasks;
}

}  // namespace deapsim
