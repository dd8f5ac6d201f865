// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <string>
#include <vector>

#include "deapsim/workload.hpp"

namespace deapsim {

using TaskId = int;

/// Names one sub-layer output, or an initial weight/input that starts in HBM.
struct TensorId {
  std::string name;
  auto operator<=>(const TensorId&) const = default;
};

struct TensorRef {
  TensorId id;
  Count bytes = 0;
  bool operator==(const TensorRef&) const = default;
};

/// One schedulable sub-layer: a (microbatch, shard) slice of a layer.
struct Task {
  TaskId id = 0;
  LayerId layer_id = 0;
  LayerKind kind = LayerKind::Linear;
  Count microbatch = 0;
  Count shard = 0;
  // GEMM slice: rows x in -> rows x out.
  Count rows = 1;
  Count in_features = 1;
  Count out_features = 1;
  Count flops = 0;
  std::vector<TaskId> deps;
  std::vector<TensorRef> inputs;
  TensorRef output;

  bool is_gemm() const { return deapsim::is_gemm(kind); }
  Count bytes_in() const;
  Count bytes_out() const { return output.bytes; }
  bool operator==(const Task&) const = default;
};

struct PruneOptions {
  bool keep_layernorm = false;
};

/// Drops Dropout (and LayerNorm unless kept) and rewires deps through them.
LayerGraph prune_inference_layers(const LayerGraph& graph, PruneOptions options = {});

struct SplitOptions {
  Count microbatches = 1;
  Count tensor_shards = 1;
  Count bytes_per_element = 1;
};

/// Pipeline (row) and tensor (output-column) split of a pruned graph.
///
/// GEMM layers and LayerNorm produce M*S tasks each; Softmax and Dropout pass
/// dependencies through without tasks. Shard (m, s) of a layer depends on all
/// shards of microbatch m of its nearest task-bearing predecessors. Remainder
/// rows and columns go to the last microbatch and shard.
std::vector<Task> split(const LayerGraph& graph, const SplitOptions& options);

/// Layers that emit tasks under split().
bool is_task_bearing(LayerKind kind);

}  // namespace deapsim
