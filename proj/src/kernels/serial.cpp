#include <algorithm>
#include <cmath>
#include <limits>

#include "gatelab/kernels.hpp"

namespace gatelab::kernels::serial {

void segment_softmax(const Graph& g, std::span<const double> scores, std::span<double> alpha) {
  auto off = g.offsets();
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const EdgeId b = off[v], e_end = off[v + 1];
    if (b == e_end) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (EdgeId e = b; e < e_end; ++e) mx = std::max(mx, scores[e]);
    double total = 0.0;
    for (EdgeId e = b; e < e_end; ++e) {
      alpha[e] = std::exp(scores[e] - mx);
      total += alpha[e];
    }
    for (EdgeId e = b; e < e_end; ++e) alpha[e] /= total;
  }
}

void segment_softmax_backward(const Graph& g, std::span<const double> alpha,
                              std::span<const double> grad_alpha, std::span<double> grad_scores) {
  auto off = g.offsets();
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    double dot = 0.0;
    for (EdgeId e = off[v]; e < off[v + 1]; ++e) dot += alpha[e] * grad_alpha[e];
    for (EdgeId e = off[v]; e < off[v + 1]; ++e) grad_scores[e] = alpha[e] * (grad_alpha[e] - dot);
  }
}

void aggregate(const Graph& g, const Tensor& x, std::span<const double> alpha, Tensor& out) {
  out.setZero(g.num_nodes(), x.cols());
  auto off = g.offsets();
  auto nb = g.neighbors();
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    for (EdgeId e = off[v]; e < off[v + 1]; ++e) out.row(v) += alpha[e] * x.row(nb[e]);
}

void aggregate_backward(const Graph& g, const Tensor& x, std::span<const double> alpha,
                        const Tensor& grad_out, Tensor& grad_x, std::span<double> grad_alpha) {
  grad_x.setZero(x.rows(), x.cols());
  auto off = g.offsets();
  auto nb = g.neighbors();
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    for (EdgeId e = off[v]; e < off[v + 1]; ++e) {
      const NodeId u = nb[e];
      grad_alpha[e] = x.row(u).dot(grad_out.row(v));
      grad_x.row(u) += alpha[e] * grad_out.row(v);
    }
  }
}

void edge_scores(const Graph& g, const Tensor& s, const Tensor& t, const Tensor& a_neighbor,
                 const Tensor& a_self, double slope, std::span<double> scores) {
  const auto d = s.cols();
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    const NodeId u = g.source(e), v = g.target(e);
    const Tensor& a = u == v ? a_self : a_neighbor;
    double acc = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) acc += a(k, 0) * leaky(s(u, k) + t(v, k), slope);
    scores[e] = acc;
  }
}

void edge_scores_backward(const Graph& g, const Tensor& s, const Tensor& t,
                          const Tensor& a_neighbor, const Tensor& a_self, double slope,
                          std::span<const double> grad_scores, Tensor& grad_s, Tensor& grad_t,
                          Tensor& grad_a_neighbor, Tensor& grad_a_self) {
  const auto d = s.cols();
  grad_s.setZero(s.rows(), d);
  grad_t.setZero(t.rows(), d);
  grad_a_neighbor.setZero(d, 1);
  grad_a_self.setZero(d, 1);
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    const NodeId u = g.source(e), v = g.target(e);
    const bool self = u == v;
    const Tensor& a = self ? a_self : a_neighbor;
    Tensor& ga = self ? grad_a_self : grad_a_neighbor;
    const double ge = grad_scores[e];
    for (Eigen::Index k = 0; k < d; ++k) {
      const double pre = s(u, k) + t(v, k);
      ga(k, 0) += ge * leaky(pre, slope);
      const double gp = ge * a(k, 0) * leaky_grad(pre, slope);
      grad_s(u, k) += gp;
      grad_t(v, k) += gp;
    }
  }
}

void gather_rows(const Tensor& x, std::span<const NodeId> index, Tensor& out) {
  out.resize(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t e = 0; e < index.size(); ++e) out.row(e) = x.row(index[e]);
}

void scatter_weighted_sum(const Tensor& m, std::span<const double> w,
                          std::span<const NodeId> segment, std::size_t rows, Tensor& out) {
  out.setZero(static_cast<Eigen::Index>(rows), m.cols());
  for (std::size_t e = 0; e < segment.size(); ++e) out.row(segment[e]) += w[e] * m.row(e);
}

}  // namespace gatelab::kernels::serial
