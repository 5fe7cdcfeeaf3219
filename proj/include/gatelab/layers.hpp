#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gatelab/autodiff.hpp"
#include "gatelab/graph.hpp"
#include "gatelab/tensor.hpp"

namespace gatelab {

/// gat / gat_s: e_uv = a^T phi(W_s h_u + W_t h_v), aggregation through W_s;
///              gat_s ties W_t to W_s.
/// gate / gate_s: e_uv = (u != v ? a_s : a_t)^T phi(U h_u + V h_v), aggregation
///              through W; gate_s ties U and V to W.
/// mlp: h' = phi(W h), no graph access.
enum class LayerKind { gat, gat_s, gate, gate_s, mlp };

std::string_view to_string(LayerKind kind);
/// Throws std::invalid_argument for unknown names.
LayerKind parse_layer_kind(std::string_view name);
bool has_attention(LayerKind kind);
bool shares_weights(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::gate;
  std::size_t width = 0;
  /// Output nonlinearity of hidden layers (0 = ReLU). Unused on the last layer.
  double activation_slope = 0.0;
  /// Nonlinearity inside the attention score (0 = ReLU).
  double score_slope = 0.0;
  /// Adds b to the aggregated output, before the nonlinearity.
  bool bias = false;
};

/// Per-kind defaults: LeakyReLU(0.2) output and score activations for the GAT
/// family, ReLU for GATE and MLP.
LayerSpec default_layer(LayerKind kind, std::size_t width);

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<LayerSpec> layers;

  std::size_t output_dim() const { return layers.empty() ? input_dim : layers.back().width; }
  std::size_t layer_input_dim(std::size_t l) const {
    return l == 0 ? input_dim : layers[l - 1].width;
  }
  /// Throws std::invalid_argument on an empty stack or a zero width.
  void validate() const;
};

/// Named architectures: gat, gat_s, gate, gate_s, mlp (all layers of one
/// kind) and mlp_gat (alternating gat / mlp layers, starting with gat).
/// Hidden layers get `width`, the last layer `classes`.
NetworkSpec make_network(std::string_view architecture, std::size_t depth, std::size_t input_dim,
                         std::size_t width, std::size_t classes, bool bias = false);
bool is_known_architecture(std::string_view architecture);

/// JSON fragment {"layers":[{"kind":"gate","width":64}, ...]}; optional
/// per-layer "activation_slope" and "score_slope" override the kind defaults,
/// and "bias" (default false) adds a bias vector.
nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec network_from_json(const nlohmann::json& fragment, std::size_t input_dim);

inline constexpr ad::ParamId kNoParam = std::numeric_limits<ad::ParamId>::max();

/// Parameter slots of one layer. Shared variants point several roles at the
/// same slot, so they also share one gradient accumulator.
struct LayerSlots {
  ad::ParamId message = kNoParam;  // W_s (gat) / W (gate, mlp), d_out x d_in
  ad::ParamId source = kNoParam;   // W_s (gat) / U (gate)
  ad::ParamId target = kNoParam;   // W_t (gat) / V (gate)
  ad::ParamId attn_neighbor = kNoParam;  // a (gat) / a_s (gate), d_out x 1
  ad::ParamId attn_self = kNoParam;      // a (gat) / a_t (gate)
  ad::ParamId bias = kNoParam;           // b, d_out x 1
};

struct NetworkParams {
  std::vector<Tensor> tensors;
  std::vector<std::string> names;
  std::vector<LayerSlots> layers;

  std::size_t size() const { return tensors.size(); }
  std::size_t count_scalars() const;
};

/// Zero-filled parameters with the slot layout implied by `spec`.
NetworkParams allocate_params(const NetworkSpec& spec);

/// Attention logits of one layer over every CSR entry of `g` (self-loops
/// required). `param_vars` indexes tape vars by parameter slot.
ad::Var attention_scores(ad::Tape& tape, const LayerSpec& layer, const LayerSlots& slots,
                         std::span<const ad::Var> param_vars, ad::Var h, const Graph& g);

struct LayerOutput {
  ad::Var h;
  ad::Var alpha;  // invalid for mlp layers
};

/// One layer: h'_v = phi(sum_{u in N(v)} alpha_uv M h_u [+ b]), or
/// phi(W h_v [+ b]) for mlp. `last` drops phi. Attention layers throw std::invalid_argument when
/// `g` lacks self-loops.
LayerOutput layer_forward(ad::Tape& tape, const LayerSpec& layer, const LayerSlots& slots,
                          std::span<const ad::Var> param_vars, ad::Var h, const Graph& g,
                          bool last);

struct ForwardPass {
  ad::Var logits;
  std::vector<ad::Var> params;   // tape var per parameter slot
  std::vector<ad::Var> outputs;  // per layer
  std::vector<ad::Var> alpha;    // per layer; invalid for mlp
};

ForwardPass network_forward(ad::Tape& tape, const NetworkSpec& spec, const NetworkParams& params,
                            const Tensor& features, const Graph& g);

/// Logits without keeping the tape.
Tensor evaluate_logits(const NetworkSpec& spec, const NetworkParams& params,
                       const Tensor& features, const Graph& g);

}  // namespace gatelab
