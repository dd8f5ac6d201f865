// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace deapsim {

using Count = std::uint64_t;
using LayerId = int;

enum class LayerKind {
  Linear,
  AttentionQkvProjection,
  AttentionOutputProjection,
  FeedForward1,
  FeedForward2,
  Embedding,
  LmHead,
  LayerNorm,
  Dropout,
  Softmax,
};

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

/// True for the kinds that lower to a single GEMM (the Linear family).
bool is_gemm(LayerKind kind);

/// Transformer hyperparameters. The first five mirror the classic
/// generator flags; seq_len and batch_size size the GEMM row dimension.
struct LLMConfig {
  Count embedding_dim = 768;
  Count forward_dim = 3072;
  Count num_heads = 12;
  Count num_decoder_layers = 12;
  Count vocab_size = 50257;
  Count seq_len = 128;
  Count batch_size = 1;
  /// Adds QK^T and AV score GEMMs to every block.
  bool model_attention_gemms = false;

  /// Throws ConfigError on non-positive fields or embedding_dim % num_heads != 0.
  void validate() const;

  bool operator==(const LLMConfig&) const = default;
};

/// Named stand-in configurations: "gpt2", "bert", "llm", "llm-2".
LLMConfig llm_preset(std::string_view name);
std::vector<std::string> llm_preset_names();

struct Layer {
  LayerId id = 0;
  LayerKind kind = LayerKind::Linear;
  Count in_features = 1;
  Count out_features = 1;
  Count batch_rows = 1;  // batch_size * seq_len
  std::vector<LayerId> deps;

  bool operator==(const Layer&) const = default;
};

/// Layers in topological order.
struct LayerGraph {
  std::vector<Layer> layers;

  const Layer* find(LayerId id) const;
  bool operator==(const LayerGraph&) const = default;
};

/// Embedding -> num_decoder_layers x block -> LMHead, where a block is
/// [QKV, Softmax, AttnOut, LayerNorm, FF1, FF2, LayerNorm, Dropout]
/// (plus QK^T/AV Linear layers around Softmax when attention GEMMs are modeled).
LayerGraph build_llm(const LLMConfig& config);

/// rows * (2 * in - 1) * out.
Count gemm_flops(Count rows, Count in_features, Count out_features);

/// FLOPs of a GEMM-shaped layer; 0 for every other kind.
Count layer_flops(const Layer& layer);

/// Sum of in*out over the GEMM-shaped layers.
Count linear_parameter_count(const LayerGraph& graph);

}  // namespace deapsim
