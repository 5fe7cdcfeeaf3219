#include "gatelab/conservation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gatelab {

std::string_view to_string(ConservationLaw law) {
  switch (law) {
    case ConservationLaw::gat_eq5: return "gat_eq5";
    case ConservationLaw::gat_unshared_ext: return "gat_unshared_ext";
    case ConservationLaw::gate_eq7: return "gate_eq7";
    case ConservationLaw::gate_eq8: return "gate_eq8";
    case ConservationLaw::mlp_balance: return "mlp_balance";
  }
  return "?";
}

double ConservationEntry::scale() const { return std::abs(lhs) + std::abs(rhs); }

double ConservationEntry::relative_residual() const {
  return std::abs(residual()) / std::max(scale(), 1e-30);
}

double ConservationReport::max_relative_residual() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.relative_residual());
  return worst;
}

ConservationLaw hidden_law(LayerKind kind) {
  switch (kind) {
    case LayerKind::gat_s: return ConservationLaw::gat_eq5;
    case LayerKind::gat: return ConservationLaw::gat_unshared_ext;
    case LayerKind::gate:
    case LayerKind::gate_s: return ConservationLaw::gate_eq7;
    case LayerKind::mlp: return ConservationLaw::mlp_balance;
  }
  return ConservationLaw::mlp_balance;
}

namespace {

// A row or column of one parameter tensor.
struct Slice {
  ad::ParamId slot;
  bool row;
};

struct Groups {
  std::vector<Slice> incoming;
  std::vector<Slice> outgoing;
};

void push_unique(std::vector<ad::ParamId>& ids, ad::ParamId id) {
  if (id != kNoParam && std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
}

std::vector<ad::ParamId> matrices_of(const LayerSlots& s) {
  std::vector<ad::ParamId> ids;
  push_unique(ids, s.message);
  push_unique(ids, s.source);
  push_unique(ids, s.target);
  return ids;
}

Groups groups_for(const NetworkSpec& spec, const NetworkParams& params, std::size_t l,
                  ConservationLaw law) {
  const auto& slots = params.layers[l];
  const auto kind = spec.layers[l].kind;
  Groups g;
  if (law == ConservationLaw::gate_eq8) {
    g.incoming = {{slots.source, true}, {slots.target, true}};
    g.outgoing = {{slots.attn_neighbor, true}, {slots.attn_self, true}};
    return g;
  }
  if (kind == LayerKind::gate) {
    g.incoming.push_back({slots.message, true});
  } else {
    for (auto id : matrices_of(slots)) g.incoming.push_back({id, true});
  }
  if (slots.bias != kNoParam) g.incoming.push_back({slots.bias, true});
  if (kind == LayerKind::gat || kind == LayerKind::gat_s) {
    g.outgoing.push_back({slots.attn_neighbor, true});
  } else if (kind == LayerKind::gate_s) {
    g.outgoing.push_back({slots.attn_neighbor, true});
    g.outgoing.push_back({slots.attn_self, true});
  }
  for (auto id : matrices_of(params.layers[l + 1])) g.outgoing.push_back({id, false});
  return g;
}

double theta(const NetworkParams& params, const ad::Gradients& grads, Slice s, std::size_t unit) {
  const Tensor& p = params.tensors[s.slot];
  const Tensor& g = grads.at(s.slot);
  if (s.row) return p.row(unit).dot(g.row(unit));
  return p.col(unit).dot(g.col(unit));
}

double theta_sum(const NetworkParams& params, const ad::Gradients& grads,
                 const std::vector<Slice>& slices, std::size_t unit) {
  double total = 0.0;
  for (auto s : slices) total += theta(params, grads, s, unit);
  return total;
}

void check_grads(const NetworkParams& params, const ad::Gradients& grads) {
  if (grads.size() < params.size())
    throw std::invalid_argument("conservation: gradient map does not cover every parameter");
}

ConservationReport build(const NetworkSpec& spec, const NetworkParams& params,
                         const ad::Gradients& grads, std::size_t l, ConservationLaw law) {
  ConservationReport report;
  report.law = law;
  report.layer = l;
  const auto groups = groups_for(spec, params, l, law);
  const bool attention_on_left = law == ConservationLaw::gate_eq8;
  for (std::size_t i = 0; i < spec.layers[l].width; ++i) {
    ConservationEntry e;
    e.layer = l;
    e.unit = i;
    e.law = law;
    const double in = theta_sum(params, grads, groups.incoming, i);
    const double out = theta_sum(params, grads, groups.outgoing, i);
    e.lhs = attention_on_left ? out : in;
    e.rhs = attention_on_left ? in : out;
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace

ConservationReport conservation_residual_gat(const NetworkSpec& spec, const NetworkParams& params,
                                             const ad::Gradients& grads, std::size_t l) {
  if (l + 1 >= spec.layers.size())
    throw std::out_of_range("conservation_residual_gat: layer " + std::to_string(l) +
                            " is not a hidden layer");
  const auto kind = spec.layers[l].kind;
  if (kind != LayerKind::gat && kind != LayerKind::gat_s)
    throw std::invalid_argument("conservation_residual_gat: layer is not a GAT layer");
  check_grads(params, grads);
  return build(spec, params, grads, l, hidden_law(kind));
}

std::pair<ConservationReport, ConservationReport> conservation_residual_gate(
    const NetworkSpec& spec, const NetworkParams& params, const ad::Gradients& grads,
    std::size_t l) {
  if (l >= spec.layers.size())
    throw std::out_of_range("conservation_residual_gate: layer " + std::to_string(l) +
                            " out of range");
  const auto kind = spec.layers[l].kind;
  if (kind != LayerKind::gate && kind != LayerKind::gate_s)
    throw std::invalid_argument("conservation_residual_gate: layer is not a GATE layer");
  check_grads(params, grads);
  ConservationReport eq7{ConservationLaw::gate_eq7, l, false, {}};
  ConservationReport eq8{ConservationLaw::gate_eq8, l, false, {}};
  if (l + 1 < spec.layers.size()) eq7 = build(spec, params, grads, l, ConservationLaw::gate_eq7);
  if (kind == LayerKind::gate) eq8 = build(spec, params, grads, l, ConservationLaw::gate_eq8);
  return {eq7, eq8};
}

std::vector<ConservationReport> conservation_reports(const NetworkSpec& spec,
                                                     const NetworkParams& params,
                                                     const ad::Gradients& grads) {
  check_grads(params, grads);
  std::vector<ConservationReport> out;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto kind = spec.layers[l].kind;
    if (l + 1 < spec.layers.size()) out.push_back(build(spec, params, grads, l, hidden_law(kind)));
    if (kind == LayerKind::gate) out.push_back(build(spec, params, grads, l, ConservationLaw::gate_eq8));
  }
  return out;
}

double max_relative_residual(const std::vector<ConservationReport>& reports,
                             std::initializer_list<ConservationLaw> exclude) {
  double worst = 0.0;
  for (const auto& r : reports) {
    if (!r.applicable) continue;
    if (std::find(exclude.begin(), exclude.end(), r.law) != exclude.end()) continue;
    worst = std::max(worst, r.max_relative_residual());
  }
  return worst;
}

void apply_rescaling(const NetworkSpec& spec, NetworkParams& params, std::size_t l,
                     std::size_t unit, ConservationLaw law, double lambda) {
  if (l >= spec.layers.size()) throw std::out_of_range("apply_rescaling: layer out of range");
  if (law == ConservationLaw::gate_eq8) {
    if (spec.layers[l].kind != LayerKind::gate)
      throw std::invalid_argument("apply_rescaling: gate_eq8 needs an unshared GATE layer");
  } else {
    if (l + 1 >= spec.layers.size())
      throw std::out_of_range("apply_rescaling: hidden-unit law needs a following layer");
    if (law != hidden_law(spec.layers[l].kind))
      throw std::invalid_argument("apply_rescaling: law does not match the layer kind");
  }
  const auto groups = groups_for(spec, params, l, law);
  for (auto s : groups.incoming) {
    Tensor& p = params.tensors[s.slot];
    if (s.row) p.row(unit) *= lambda; else p.col(unit) *= lambda;
  }
  for (auto s : groups.outgoing) {
    Tensor& p = params.tensors[s.slot];
    if (s.row) p.row(unit) /= lambda; else p.col(unit) /= lambda;
  }
}

}  // namespace gatelab
