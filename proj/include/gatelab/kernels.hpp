#pragma once

// Sparse neighborhood kernels behind the attention layers.
//
// Two implementations with identical signatures:
//   serial::   straightforward loops, the reference the tests check against;
//   parallel:: OpenMP row-parallel versions (fall back to serial loops when
//              built without OpenMP).
// Per-edge arrays follow the CSR order of the Graph (row = target node).
// Output buffers are overwritten, never accumulated into.
//
// The parallel kernels are deterministic for a fixed thread count: every
// output row is owned by one thread and cross-row reductions are combined in
// thread order.

#include <algorithm>
#include <span>

#include "gatelab/graph.hpp"
#include "gatelab/tensor.hpp"

namespace gatelab::kernels {

/// LeakyReLU with the derivative at 0 taken from the positive side. Written
/// without a branch: score pre-activations have random signs and a
/// mispredicted branch per entry costs more than the arithmetic.
inline double leaky(double x, double slope) { return std::max(x, 0.0) + slope * std::min(x, 0.0); }
inline double leaky_grad(double x, double slope) {
  return slope + (1.0 - slope) * static_cast<double>(x >= 0.0);
}

#define GATELAB_KERNEL_DECLS                                                                   \
  /* alpha_e = softmax of scores over each CSR row; empty rows are skipped. */                 \
  void segment_softmax(const Graph& g, std::span<const double> scores, std::span<double> alpha); \
  void segment_softmax_backward(const Graph& g, std::span<const double> alpha,                 \
                                std::span<const double> grad_alpha,                            \
                                std::span<double> grad_scores);                                \
  /* out[v] = sum_{e in row v} alpha_e * x[source(e)] */                                       \
  void aggregate(const Graph& g, const Tensor& x, std::span<const double> alpha, Tensor& out); \
  void aggregate_backward(const Graph& g, const Tensor& x, std::span<const double> alpha,      \
                          const Tensor& grad_out, Tensor& grad_x,                              \
                          std::span<double> grad_alpha);                                       \
  /* score_e = a(e)^T leaky(s[source(e)] + t[target(e)]), a(e) = a_self on self-loops */      \
  void edge_scores(const Graph& g, const Tensor& s, const Tensor& t, const Tensor& a_neighbor, \
                   const Tensor& a_self, double slope, std::span<double> scores);              \
  void edge_scores_backward(const Graph& g, const Tensor& s, const Tensor& t,                  \
                            const Tensor& a_neighbor, const Tensor& a_self, double slope,      \
                            std::span<const double> grad_scores, Tensor& grad_s,               \
                            Tensor& grad_t, Tensor& grad_a_neighbor, Tensor& grad_a_self);     \
  /* out[e] = x[index[e]] */                                                                   \
  void gather_rows(const Tensor& x, std::span<const NodeId> index, Tensor& out);               \
  /* out[segment[e]] += w[e] * m[e]; out has `rows` rows */                                   \
  void scatter_weighted_sum(const Tensor& m, std::span<const double> w,                        \
                            std::span<const NodeId> segment, std::size_t rows, Tensor& out);

namespace serial {
GATELAB_KERNEL_DECLS
}  // namespace serial

namespace parallel {
GATELAB_KERNEL_DECLS
/// Threads the parallel kernels will use (1 without OpenMP).
int max_threads();
}  // namespace parallel

#undef GATELAB_KERNEL_DECLS

// The layers call through this alias.
namespace active = parallel;

}  // namespace gatelab::kernels
