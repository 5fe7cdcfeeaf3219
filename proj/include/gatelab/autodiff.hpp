#pragma once

// Tape-based reverse-mode differentiation over dense float-64 tensors.
//
// A Tape records every primitive in execution order, so the record is
// topologically sorted by construction and `backward` is a single reverse
// sweep. Leaves are either constants or parameters tagged with a ParamId;
// `backward` returns one gradient per registered parameter id.
//
// Ops that take a Graph keep a pointer to it: the graph must outlive the
// tape's backward pass.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gatelab/graph.hpp"
#include "gatelab/tensor.hpp"

namespace gatelab::ad {

using ParamId = std::size_t;

struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const { return id != npos; }
  friend bool operator==(Var, Var) = default;
};

/// Gradient per parameter id; ids never registered on the tape stay 0 x 0.
using Gradients = std::vector<Tensor>;

struct BackwardContext {
  const Tensor& grad;    // dL/d(output)
  const Tensor& output;  // forward value of this node
  std::span<const Tensor* const> inputs;
  std::span<Tensor* const> input_grads;  // nullptr where no gradient is needed; accumulate (+=)
};

using BackwardFn = std::function<void(const BackwardContext&)>;

class Tape {
 public:
  Var constant(Tensor value);
  Var parameter(Tensor value, ParamId id);

  /// Appends a node computed from `inputs`. `fn` may be empty for
  /// non-differentiable outputs.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn fn);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep seeded with dL/dL = 1. Throws std::invalid_argument unless
  /// `loss` is 1 x 1. Parameters off every path to the loss get zero tensors.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::optional<ParamId> param;
  };
  std::vector<Node> nodes_;
};

// Primitives. Shape errors throw std::invalid_argument; index errors throw
// std::out_of_range.

Var matmul(Tape& tape, Var a, Var b);            // a * b
Var matmul_nt(Tape& tape, Var a, Var b);         // a * b^T (rows of `a` through weight `b`)
Var add(Tape& tape, Var a, Var b);
Var add_bias(Tape& tape, Var x, Var b);          // x + 1 b^T, b is cols(x) x 1
Var scale(Tape& tape, Var a, double factor);
Var sum(Tape& tape, Var a);                      // 1 x 1
Var leaky_relu(Tape& tape, Var x, double slope);  // slope 0 is ReLU

Var gather_rows(Tape& tape, Var x, std::vector<NodeId> index);
/// out[segment[e]] = sum of w[e] * m[e, :]; `rows` output rows.
Var scatter_weighted_sum(Tape& tape, Var m, Var w, std::vector<NodeId> segment, std::size_t rows);
/// Softmax of a length-E score vector within each segment id in [0, segments).
/// An empty segment is a data error (std::domain_error).
Var segment_softmax(Tape& tape, Var scores, std::vector<NodeId> segment, std::size_t segments);

/// Softmax over the CSR rows of `g` (attention coefficients). Every row must
/// be non-empty (std::domain_error otherwise).
Var graph_softmax(Tape& tape, const Graph& g, Var scores);
/// Fused gather + weighted scatter over `g`: out[v] = sum_{u in N(v)} alpha_uv x[u].
Var aggregate(Tape& tape, const Graph& g, Var x, Var alpha);
/// Fused attention logits over `g`: e_uv = a(uv)^T leaky(s[u] + t[v]), with
/// a(uv) = a_self on self-loops and a_neighbor elsewhere. `s` and `t` (and the
/// two attention vectors) may be the same Var.
Var edge_scores(Tape& tape, const Graph& g, Var s, Var t, Var a_neighbor, Var a_self,
                double slope);

/// Mean over masked rows of -log softmax(logits)[label]. Throws
/// std::invalid_argument on an empty mask and std::out_of_range on a label
/// outside the logit width.
Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> labels,
                          std::span<const std::uint8_t> mask);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every entry.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double h);

}  // namespace gatelab::ad
