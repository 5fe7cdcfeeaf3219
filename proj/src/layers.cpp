#include "gatelab/layers.hpp"

#include "json.hpp"
#include <stdexcept>

namespace gatelab {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::gat: return "gat";
    case LayerKind::gat_s: return "gat_s";
    case LayerKind::gate: return "gate";
    case LayerKind::gate_s: return "gate_s";
    case LayerKind::mlp: return "mlp";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (auto k : {LayerKind::gat, LayerKind::gat_s, LayerKind::gate, LayerKind::gate_s, LayerKind::mlp})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown layer kind '" + std::string(name) + "'");
}

bool has_attention(LayerKind kind) { return kind != LayerKind::mlp; }

bool shares_weights(LayerKind kind) {
  return kind == LayerKind::gat_s || kind == LayerKind::gate_s;
}

LayerSpec default_layer(LayerKind kind, std::size_t width) {
  const bool gat_family = kind == LayerKind::gat || kind == LayerKind::gat_s;
  const double slope = gat_family ? 0.2 : 0.0;
  return LayerSpec{kind, width, slope, slope};
}

void NetworkSpec::validate() const {
  if (input_dim == 0) throw std::invalid_argument("network: input dimension must be positive");
  if (layers.empty()) throw std::invalid_argument("network: needs at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].width == 0)
      throw std::invalid_argument("network: layer " + std::to_string(l) + " has zero width");
    if (layers[l].activation_slope < 0 || layers[l].score_slope < 0)
      throw std::invalid_argument("network: layer " + std::to_string(l) + " has a negative slope");
  }
}

bool is_known_architecture(std::string_view architecture) {
  return architecture == "gat" || architecture == "gat_s" || architecture == "gate" ||
         architecture == "gate_s" || architecture == "mlp" || architecture == "mlp_gat";
}

NetworkSpec make_network(std::string_view architecture, std::size_t depth, std::size_t input_dim,
                         std::size_t width, std::size_t classes, bool bias) {
  if (!is_known_architecture(architecture))
    throw std::invalid_argument("unknown architecture '" + std::string(architecture) + "'");
  if (depth == 0) throw std::invalid_argument("architecture depth must be positive");
  NetworkSpec spec;
  spec.input_dim = input_dim;
  for (std::size_t l = 0; l < depth; ++l) {
    LayerKind kind;
    if (architecture == "mlp_gat")
      kind = l % 2 == 0 ? LayerKind::gat : LayerKind::mlp;
    else
      kind = parse_layer_kind(architecture);
    spec.layers.push_back(default_layer(kind, l + 1 == depth ? classes : width));
    spec.layers.back().bias = bias;
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const NetworkSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : spec.layers) {
    layers.push_back({{"kind", std::string(to_string(layer.kind))},
                      {"width", layer.width},
                      {"activation_slope", layer.activation_slope},
                      {"score_slope", layer.score_slope}});
    if (layer.bias) layers.back()["bias"] = true;
  }
  return {{"layers", layers}};
}

NetworkSpec network_from_json(const nlohmann::json& fragment, std::size_t input_dim) {
  if (!fragment.is_object() || !fragment.contains("layers") || !fragment["layers"].is_array())
    throw std::invalid_argument("layers: expected an array");
  NetworkSpec spec;
  spec.input_dim = input_dim;
  std::size_t i = 0;
  for (const auto& entry : fragment["layers"]) {
    const std::string where = "layers[" + std::to_string(i++) + "]";
    if (!entry.contains("kind") || !entry["kind"].is_string())
      throw std::invalid_argument(where + ".kind: missing");
    if (!entry.contains("width") || !entry["width"].is_number_integer() ||
        entry["width"].get<long long>() <= 0)
      throw std::invalid_argument(where + ".width: expected a positive integer");
    LayerKind kind;
    try {
      kind = parse_layer_kind(entry["kind"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + ".kind: " + e.what());
    }
    LayerSpec layer = default_layer(kind, entry["width"].get<std::size_t>());
    if (entry.contains("activation_slope")) layer.activation_slope = entry["activation_slope"].get<double>();
    if (entry.contains("score_slope")) layer.score_slope = entry["score_slope"].get<double>();
    if (entry.contains("bias")) {
      if (!entry["bias"].is_boolean()) throw std::invalid_argument(where + ".bias: expected a boolean");
      layer.bias = entry["bias"].get<bool>();
    }
    spec.layers.push_back(layer);
  }
  spec.validate();
  return spec;
}

std::size_t NetworkParams::count_scalars() const {
  std::size_t total = 0;
  for (const auto& t : tensors) total += static_cast<std::size_t>(t.size());
  return total;
}

NetworkParams allocate_params(const NetworkSpec& spec) {
  spec.validate();
  NetworkParams p;
  auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
    p.tensors.push_back(Tensor::Zero(rows, cols));
    p.names.push_back(std::move(name));
    return p.tensors.size() - 1;
  };
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& layer = spec.layers[l];
    const auto out = static_cast<Eigen::Index>(layer.width);
    const auto in = static_cast<Eigen::Index>(spec.layer_input_dim(l));
    const std::string pre = "l" + std::to_string(l) + ".";
    LayerSlots s;
    switch (layer.kind) {
      case LayerKind::mlp:
        s.message = add(pre + "W", out, in);
        break;
      case LayerKind::gat:
        s.message = s.source = add(pre + "W_s", out, in);
        s.target = add(pre + "W_t", out, in);
        s.attn_neighbor = s.attn_self = add(pre + "a", out, 1);
        break;
      case LayerKind::gat_s:
        s.message = s.source = s.target = add(pre + "W_s", out, in);
        s.attn_neighbor = s.attn_self = add(pre + "a", out, 1);
        break;
      case LayerKind::gate:
        s.message = add(pre + "W", out, in);
        s.source = add(pre + "U", out, in);
        s.target = add(pre + "V", out, in);
        s.attn_neighbor = add(pre + "a_s", out, 1);
        s.attn_self = add(pre + "a_t", out, 1);
        break;
      case LayerKind::gate_s:
        s.message = s.source = s.target = add(pre + "W", out, in);
        s.attn_neighbor = add(pre + "a_s", out, 1);
        s.attn_self = add(pre + "a_t", out, 1);
        break;
    }
    if (layer.bias) s.bias = add(pre + "b", out, 1);
    p.layers.push_back(s);
  }
  return p;
}

ad::Var attention_scores(ad::Tape& tape, const LayerSpec& layer, const LayerSlots& slots,
                         std::span<const ad::Var> param_vars, ad::Var h, const Graph& g) {
  if (!has_attention(layer.kind))
    throw std::invalid_argument("attention_scores: mlp layers have no attention");
  if (!g.has_self_loops())
    throw std::invalid_argument("attention layer requires a graph with self-loops");
  ad::Var s = ad::matmul_nt(tape, h, param_vars[slots.source]);
  ad::Var t = slots.target == slots.source ? s : ad::matmul_nt(tape, h, param_vars[slots.target]);
  return ad::edge_scores(tape, g, s, t, param_vars[slots.attn_neighbor],
                         param_vars[slots.attn_self], layer.score_slope);
}

LayerOutput layer_forward(ad::Tape& tape, const LayerSpec& layer, const LayerSlots& slots,
                          std::span<const ad::Var> param_vars, ad::Var h, const Graph& g,
                          bool last) {
  const Tensor& H = tape.value(h);
  const Tensor& M = tape.value(param_vars[slots.message]);
  if (H.cols() != M.cols())
    throw std::invalid_argument("layer_forward: input width " + std::to_string(H.cols()) +
                                " does not match weight width " + std::to_string(M.cols()));
  LayerOutput out;
  if (!has_attention(layer.kind)) {
    out.h = ad::matmul_nt(tape, h, param_vars[slots.message]);
  } else {
    if (!g.has_self_loops())
      throw std::invalid_argument("attention layer requires a graph with self-loops");
    if (static_cast<std::size_t>(H.rows()) != g.num_nodes())
      throw std::invalid_argument("layer_forward: feature rows do not match graph size");
    // Transform once and reuse for scores whenever the roles share a slot.
    ad::Var msg = ad::matmul_nt(tape, h, param_vars[slots.message]);
    ad::Var s = slots.source == slots.message ? msg : ad::matmul_nt(tape, h, param_vars[slots.source]);
    ad::Var t = slots.target == slots.source   ? s
                : slots.target == slots.message ? msg
                                                : ad::matmul_nt(tape, h, param_vars[slots.target]);
    ad::Var e = ad::edge_scores(tape, g, s, t, param_vars[slots.attn_neighbor],
                                param_vars[slots.attn_self], layer.score_slope);
    out.alpha = ad::graph_softmax(tape, g, e);
    out.h = ad::aggregate(tape, g, msg, out.alpha);
  }
  if (slots.bias != kNoParam) out.h = ad::add_bias(tape, out.h, param_vars[slots.bias]);
  if (!last) out.h = ad::leaky_relu(tape, out.h, layer.activation_slope);
  return out;
}

ForwardPass network_forward(ad::Tape& tape, const NetworkSpec& spec, const NetworkParams& params,
                            const Tensor& features, const Graph& g) {
  spec.validate();
  if (params.layers.size() != spec.layers.size())
    throw std::invalid_argument("network_forward: parameters do not match the network spec");
  if (static_cast<std::size_t>(features.cols()) != spec.input_dim)
    throw std::invalid_argument("network_forward: feature width " + std::to_string(features.cols()) +
                                " != input_dim " + std::to_string(spec.input_dim));
  ForwardPass pass;
  for (std::size_t i = 0; i < params.size(); ++i)
    pass.params.push_back(tape.parameter(params.tensors[i], i));
  ad::Var h = tape.constant(features);
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    auto out = layer_forward(tape, spec.layers[l], params.layers[l], pass.params, h, g,
                             l + 1 == spec.layers.size());
    pass.outputs.push_back(out.h);
    pass.alpha.push_back(out.alpha);
    h = out.h;
  }
  pass.logits = h;
  return pass;
}

Tensor evaluate_logits(const NetworkSpec& spec, const NetworkParams& params,
                       const Tensor& features, const Graph& g) {
  ad::Tape tape;
  auto pass = network_forward(tape, spec, params, features, g);
  return tape.value(pass.logits);
}

}  // namespace gatelab
