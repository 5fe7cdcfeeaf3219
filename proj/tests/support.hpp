#pragma once

// Helpers shared by the unit tests: random small graphs, random parameters
// and a dense reference forward pass that builds the full n x n attention
// matrix without touching the sparse kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "gatelab/graph.hpp"
#include "gatelab/layers.hpp"
#include "gatelab/rng.hpp"
#include "gatelab/tensor.hpp"

namespace testing {

using gatelab::Graph;
using gatelab::NodeId;
using gatelab::Rng;
using gatelab::Tensor;

inline Graph random_graph(std::size_t n, double p, std::uint64_t seed, bool self_loops = true) {
  Rng rng(seed);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (rng.uniform() < p) edges.emplace_back(u, v);
  Graph g = Graph::from_edges(n, edges);
  return self_loops ? gatelab::add_self_loops(g) : g;
}

inline Tensor random_tensor(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Tensor t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = scale * rng.normal();
  return t;
}

inline void randomize(gatelab::NetworkParams& params, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  for (auto& t : params.tensors) t = random_tensor(t.rows(), t.cols(), rng, scale);
}

inline double rel_err(const Tensor& a, const Tensor& b) {
  const double denom = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / denom;
}

/// Gradient-check error: relative above a gradient norm of 1e-4, absolute
/// (scaled by 1e-4) below it. Central differences at h = 1e-5 carry a
/// round-off floor near 1e-11 |L|, and some gradients are exactly zero.
inline double fd_err(const Tensor& ad, const Tensor& fd) {
  return (ad - fd).norm() / std::max({ad.norm(), fd.norm(), 1e-4});
}

inline double phi(double x, double slope) { return x >= 0 ? x : slope * x; }

inline Tensor phi(const Tensor& x, double slope) {
  return x.unaryExpr([slope](double v) { return phi(v, slope); });
}

/// Row-stochastic n x n attention matrix: A(v, u) = alpha_uv, zero off N(v).
inline Tensor dense_attention(const gatelab::LayerSpec& layer, const gatelab::LayerSlots& slots,
                              const gatelab::NetworkParams& p, const Tensor& h, const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const Tensor S = h * p.tensors[slots.source].transpose();
  const Tensor T = h * p.tensors[slots.target].transpose();
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
  for (auto [u, v] : g.edge_pairs()) adj(u, v) = adj(v, u) = 1.0;
  Tensor E = Tensor::Constant(n, n, -std::numeric_limits<double>::infinity());
  for (Eigen::Index v = 0; v < n; ++v)
    for (Eigen::Index u = 0; u < n; ++u) {
      if (adj(v, u) == 0.0) continue;
      const Tensor& a = p.tensors[u == v ? slots.attn_self : slots.attn_neighbor];
      const Tensor pre = (S.row(u) + T.row(v)).transpose();
      E(v, u) = (a.transpose() * phi(pre, layer.score_slope))(0, 0);
    }
  Tensor A = Tensor::Zero(n, n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const double mx = E.row(v).maxCoeff();
    double z = 0.0;
    for (Eigen::Index u = 0; u < n; ++u)
      if (adj(v, u) != 0.0) z += std::exp(E(v, u) - mx);
    for (Eigen::Index u = 0; u < n; ++u)
      if (adj(v, u) != 0.0) A(v, u) = std::exp(E(v, u) - mx) / z;
  }
  return A;
}

inline Tensor dense_layer(const gatelab::LayerSpec& layer, const gatelab::LayerSlots& slots,
                          const gatelab::NetworkParams& p, const Tensor& h, const Graph& g,
                          bool last) {
  const Tensor msg = h * p.tensors[slots.message].transpose();
  Tensor out = layer.kind == gatelab::LayerKind::mlp
                   ? msg
                   : Tensor(dense_attention(layer, slots, p, h, g) * msg);
  if (slots.bias != gatelab::kNoParam) out.rowwise() += p.tensors[slots.bias].col(0).transpose();
  return last ? out : phi(out, layer.activation_slope);
}

inline Tensor dense_forward(const gatelab::NetworkSpec& spec, const gatelab::NetworkParams& p,
                            const Tensor& x, const Graph& g) {
  Tensor h = x;
  for (std::size_t l = 0; l < spec.layers.size(); ++l)
    h = dense_layer(spec.layers[l], p.layers[l], p, h, g, l + 1 == spec.layers.size());
  return h;
}

}  // namespace testing
