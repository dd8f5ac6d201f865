// SPDX-License-Identifier: Apache-2.0
#include "deapsim/workload.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "deapsim/error.hpp"

namespace deapsim {
namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 10> kKindNames{{
    {LayerKind::Linear, "Linear"},
    {LayerKind::AttentionQkvProjection, "AttentionQkvProjection"},
    {LayerKind::AttentionOutputProjection, "AttentionOutputProjection"},
    {LayerKind::FeedForward1, "FeedForward1"},
    {LayerKind::FeedForward2, "FeedForward2"},
    {LayerKind::Embedding, "Embedding"},
    {LayerKind::LmHead, "LMHead"},
    {LayerKind::LayerNorm, "LayerNorm"},
    {LayerKind::Dropout, "Dropout"},
    {LayerKind::Softmax, "Softmax"},
}};

class GraphBuilder {
 public:
  explicit GraphBuilder(Count rows) : rows_(rows) {}

  void add(LayerKind kind, Count in, Count out, Count rows = 0) {
    Layer layer;
    layer.id = static_cast<LayerId>(graph_.layers.size());
    layer.kind = kind;
    layer.in_features = in;
    layer.out_features = out;
    layer.batch_rows = rows == 0 ? rows_ : rows;
    if (!graph_.layers.empty()) layer.deps.push_back(graph_.layers.back().id);
    graph_.layers.push_back(std::move(layer));
  }

  LayerGraph take() { return std::move(graph_); }

 private:
  Count rows_;
  LayerGraph graph_;
};

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "Unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ParseError("unknown layer kind '" + std::string(name) + "'");
}

bool is_gemm(LayerKind kind) {
  switch (kind) {
    case LayerKind::Linear:
    case LayerKind::AttentionQkvProjection:
    case LayerKind::AttentionOutputProjection:
    case LayerKind::FeedForward1:
    case LayerKind::FeedForward2:
    case LayerKind::Embedding:
    case LayerKind::LmHead:
      return true;
    case LayerKind::LayerNorm:
    case LayerKind::Dropout:
    case LayerKind::Softmax:
      return false;
  }
  return false;
}

void LLMConfig::validate() const {
  const std::array<std::pair<std::string_view, Count>, 7> fields{{
      {"embedding_dim", embedding_dim},
      {"forward_dim", forward_dim},
      {"num_heads", num_heads},
      {"num_decoder_layers", num_decoder_layers},
      {"vocab_size", vocab_size},
      {"seq_len", seq_len},
      {"batch_size", batch_size},
  }};
  for (const auto& [name, value] : fields) {
    if (value < 1) throw ConfigError(std::string(name) + " must be >= 1");
  }
  if (embedding_dim % num_heads != 0) {
    throw ConfigError("embedding_dim (" + std::to_string(embedding_dim) +
                      ") must be divisible by num_heads (" + std::to_string(num_heads) + ")");
  }
}

LLMConfig llm_preset(std::string_view name) {
  LLMConfig c;
  if (name == "gpt2") return c;
  if (name == "bert") {
    c.vocab_size = 30522;
    return c;
  }
  if (name == "llm") {
    c.embedding_dim = 2048;
    c.forward_dim = 8192;
    c.num_heads = 16;
    c.num_decoder_layers = 24;
    return c;
  }
  if (name == "llm-2") {
    c.embedding_dim = 4096;
    c.forward_dim = 16384;
    c.num_heads = 32;
    c.num_decoder_layers = 36;
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> llm_preset_names() { return {"gpt2", "bert", "llm", "llm-2"}; }

const Layer* LayerGraph::find(LayerId id) const {
  auto it = std::find_if(layers.begin(), layers.end(), [id](const Layer& l) { return l.id == id; });
  return it == layers.end() ? nullptr : &*it;
}

LayerGraph build_llm(const LLMConfig& config) {
  config.validate();
  const Count e = config.embedding_dim;
  const Count head_dim = e / config.num_heads;
  const Count rows = config.batch_size * config.seq_len;
  const Count score_rows = config.batch_size * config.num_heads * config.seq_len;

  GraphBuilder b(rows);
  b.add(LayerKind::Embedding, config.vocab_size, e);
  for (Count block = 0; block < config.num_decoder_layers; ++block) {
    b.add(LayerKind::AttentionQkvProjection, e, 3 * e);
    if (config.model_attention_gemms) b.add(LayerKind::Linear, head_dim, config.seq_len, score_rows);
    b.add(LayerKind::Softmax, e, e);
    if (config.model_attention_gemms) b.add(LayerKind::Linear, config.seq_len, head_dim, score_rows);
    b.add(LayerKind::AttentionOutputProjection, e, e);
    b.add(LayerKind::LayerNorm, e, e);
    b.add(LayerKind::FeedForward1, e, config.forward_dim);
    b.add(LayerKind::FeedForward2, config.forward_dim, e);
    b.add(LayerKind::LayerNorm, e, e);
    b.add(LayerKind::Dropout, e, e);
  }
  b.add(LayerKind::LmHead, e, config.vocab_size);
  return b.take();
}

Count gemm_flops(Count rows, Count in_features, Count out_features) {
  if (in_features == 0) return 0;
  return rows * (2 * in_features - 1) * out_features;
}

Count layer_flops(const Layer& layer) {
  if (!is_gemm(layer.kind)) return 0;
  return gemm_flops(layer.batch_rows, layer.in_features, layer.out_features);
}

Count linear_parameter_count(const LayerGraph& graph) {
  Count total = 0;
  for (const auto& l : graph.layers) {
    if (is_gemm(l.kind)) total += l.in_features * l.out_features;
  }
  return total;
}

}  // namespace deapsim
