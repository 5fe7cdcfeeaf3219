#pragma once

// Gradient conservation laws of attention networks.
//
// Each law comes from a rescale invariance of the loss: multiplying one group
// of parameters by lambda and another by 1/lambda leaves every logit unchanged,
// which forces  sum_in <theta, grad> == sum_out <theta, grad>  exactly for the
// loss gradient. With Theta(x) = <x, dL/dx>, per hidden unit i of layer l:
//
//   gat_eq5          (gat_s)  Theta(W^l[i,:]) = Theta(W^{l+1}[:,i]) + Theta(a^l[i])
//   gat_unshared_ext (gat)    Theta(W_s^l[i,:]) + Theta(W_t^l[i,:])
//                               = Theta(W_*^{l+1}[:,i]) + Theta(a^l[i])
//   gate_eq7  (gate, gate_s)  Theta(W^l[i,:]) = Theta(W_*^{l+1}[:,i])
//                               [+ Theta(a_s^l[i]) + Theta(a_t^l[i]) when U = V = W]
//   gate_eq8  (gate)          Theta(a_s^l[i]) + Theta(a_t^l[i]) = Theta(U^l[i,:]) + Theta(V^l[i,:])
//   mlp_balance (mlp)         Theta(W^l[i,:]) = Theta(W_*^{l+1}[:,i])
//
// where W_*^{l+1}[:,i] ranges over every distinct matrix of layer l+1 that
// reads h^l (message, and score matrices when not shared). A layer bias b^l
// joins the incoming side of the hidden-unit laws as Theta(b^l[i]).

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "gatelab/autodiff.hpp"
#include "gatelab/layers.hpp"

namespace gatelab {

enum class ConservationLaw { gat_eq5, gat_unshared_ext, gate_eq7, gate_eq8, mlp_balance };

std::string_view to_string(ConservationLaw law);

struct ConservationEntry {
  std::size_t layer = 0;
  std::size_t unit = 0;
  ConservationLaw law = ConservationLaw::gat_eq5;
  double lhs = 0.0;
  double rhs = 0.0;

  double residual() const { return lhs - rhs; }
  double scale() const;
  /// |residual| / max(scale, 1e-30)
  double relative_residual() const;
};

struct ConservationReport {
  ConservationLaw law = ConservationLaw::gat_eq5;
  std::size_t layer = 0;
  bool applicable = true;
  std::vector<ConservationEntry> entries;

  double max_relative_residual() const;
};

/// Hidden-unit law (gat_eq5 or gat_unshared_ext) for a hidden gat / gat_s layer `l` (l + 1 < depth).
/// Throws std::out_of_range for a bad layer index and std::invalid_argument
/// if layer l is not a GAT layer.
ConservationReport conservation_residual_gat(const NetworkSpec& spec, const NetworkParams& params,
                                             const ad::Gradients& grads, std::size_t l);

/// (gate_eq7, gate_eq8) for gate / gate_s layer `l`. eq7 is marked not
/// applicable on the last layer, eq8 on shared-weight layers.
std::pair<ConservationReport, ConservationReport> conservation_residual_gate(
    const NetworkSpec& spec, const NetworkParams& params, const ad::Gradients& grads,
    std::size_t l);

/// Every applicable law of every layer.
std::vector<ConservationReport> conservation_reports(const NetworkSpec& spec,
                                                     const NetworkParams& params,
                                                     const ad::Gradients& grads);

/// Largest relative residual across reports, skipping laws listed in `exclude`.
double max_relative_residual(const std::vector<ConservationReport>& reports,
                             std::initializer_list<ConservationLaw> exclude = {});

/// One parameter-side rescaling of unit `unit` in layer `l`: the incoming
/// group is multiplied by `lambda`, the outgoing group by 1 / lambda.
/// `law` picks gate_eq8 (attention vs U, V rows) or the layer's hidden-unit
/// law (everything else). Logits are unchanged up to round-off.
void apply_rescaling(const NetworkSpec& spec, NetworkParams& params, std::size_t l,
                     std::size_t unit, ConservationLaw law, double lambda);

/// Law used for hidden units of a layer kind.
ConservationLaw hidden_law(LayerKind kind);

}  // namespace gatelab
