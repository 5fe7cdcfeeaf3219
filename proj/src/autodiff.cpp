#include "gatelab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gatelab/kernels.hpp"

namespace gatelab::ad {

namespace {

std::string shape_of(const Tensor& t) {
  std::ostringstream ss;
  ss << t.rows() << "x" << t.cols();
  return ss.str();
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_of(a) + " and " +
                              shape_of(b));
}

void accumulate(Tensor* dst, const Tensor& src) {
  if (dst) *dst += src;
}

std::span<const double> flat_of(const Tensor& t) { return flat(t); }

}  // namespace

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, std::nullopt});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Tensor value, ParamId id) {
  nodes_.push_back(Node{std::move(value), {}, {}, true, id});
  return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  node.backward = std::move(fn);
  for (Var v : inputs) {
    if (v.id >= nodes_.size()) throw std::out_of_range("tape: input node not on this tape");
    node.inputs.push_back(v.id);
    node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
  }
  if (!node.backward) node.requires_grad = false;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Gradients Tape::backward(Var loss) const {
  const Node& root = nodes_.at(loss.id);
  if (root.value.rows() != 1 || root.value.cols() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got " + shape_of(root.value));

  std::vector<Tensor> grads(nodes_.size());
  std::vector<bool> live(nodes_.size(), false);
  grads[loss.id] = Tensor::Ones(1, 1);
  live[loss.id] = true;

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!live[i] || !node.backward || !node.requires_grad) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t j : node.inputs) {
      in_values.push_back(&nodes_[j].value);
      if (nodes_[j].requires_grad) {
        if (!live[j]) {
          grads[j] = zeros_like(nodes_[j].value);
          live[j] = true;
        }
        in_grads.push_back(&grads[j]);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    node.backward(BackwardContext{grads[i], node.value, in_values, in_grads});
    if (i != loss.id) grads[i] = Tensor();  // free intermediate gradients early
  }

  Gradients out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (!node.param) continue;
    const ParamId id = *node.param;
    if (out.size() <= id) out.resize(id + 1);
    if (out[id].size() == 0) out[id] = zeros_like(node.value);
    if (live[i]) out[id] += grads[i];
  }
  return out;
}

Var matmul(Tape& tape, Var a, Var b) {
  const Tensor& A = tape.value(a);
  const Tensor& B = tape.value(b);
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  Tensor out = A * B;
  return tape.record(std::move(out), {a, b}, [](const BackwardContext& c) {
    const Tensor& A = *c.inputs[0];
    const Tensor& B = *c.inputs[1];
    if (c.input_grads[0]) c.input_grads[0]->noalias() += c.grad * B.transpose();
    if (c.input_grads[1]) c.input_grads[1]->noalias() += A.transpose() * c.grad;
  });
}

Var matmul_nt(Tape& tape, Var a, Var b) {
  const Tensor& A = tape.value(a);
  const Tensor& B = tape.value(b);
  if (A.cols() != B.cols()) shape_error("matmul_nt", A, B);
  Tensor out = A * B.transpose();
  return tape.record(std::move(out), {a, b}, [](const BackwardContext& c) {
    const Tensor& A = *c.inputs[0];
    const Tensor& B = *c.inputs[1];
    if (c.input_grads[0]) c.input_grads[0]->noalias() += c.grad * B;
    if (c.input_grads[1]) c.input_grads[1]->noalias() += c.grad.transpose() * A;
  });
}

Var add(Tape& tape, Var a, Var b) {
  const Tensor& A = tape.value(a);
  const Tensor& B = tape.value(b);
  if (!same_shape(A, B)) shape_error("add", A, B);
  return tape.record(A + B, {a, b}, [](const BackwardContext& c) {
    accumulate(c.input_grads[0], c.grad);
    accumulate(c.input_grads[1], c.grad);
  });
}

Var add_bias(Tape& tape, Var x, Var b) {
  const Tensor& X = tape.value(x);
  const Tensor& B = tape.value(b);
  if (B.cols() != 1 || B.rows() != X.cols()) shape_error("add_bias", X, B);
  Tensor out = X.rowwise() + B.col(0).transpose();
  return tape.record(std::move(out), {x, b}, [](const BackwardContext& c) {
    accumulate(c.input_grads[0], c.grad);
    if (c.input_grads[1]) *c.input_grads[1] += c.grad.colwise().sum().transpose();
  });
}

Var scale(Tape& tape, Var a, double factor) {
  return tape.record(tape.value(a) * factor, {a}, [factor](const BackwardContext& c) {
    if (c.input_grads[0]) *c.input_grads[0] += factor * c.grad;
  });
}

Var sum(Tape& tape, Var a) {
  Tensor out(1, 1);
  out(0, 0) = tape.value(a).sum();
  return tape.record(std::move(out), {a}, [](const BackwardContext& c) {
    if (c.input_grads[0]) c.input_grads[0]->array() += c.grad(0, 0);
  });
}

Var leaky_relu(Tape& tape, Var x, double slope) {
  if (slope < 0.0) throw std::invalid_argument("leaky_relu: slope must be >= 0");
  const Tensor& X = tape.value(x);
  Tensor out = X.unaryExpr([slope](double v) { return kernels::leaky(v, slope); });
  return tape.record(std::move(out), {x}, [slope](const BackwardContext& c) {
    if (!c.input_grads[0]) return;
    const Tensor& X = *c.inputs[0];
    c.input_grads[0]->array() +=
        c.grad.array() * X.unaryExpr([slope](double v) { return kernels::leaky_grad(v, slope); }).array();
  });
}

Var gather_rows(Tape& tape, Var x, std::vector<NodeId> index) {
  const Tensor& X = tape.value(x);
  for (NodeId i : index)
    if (i >= X.rows()) throw std::out_of_range("gather_rows: index out of range");
  Tensor out;
  kernels::active::gather_rows(X, index, out);
  return tape.record(std::move(out), {x}, [index = std::move(index)](const BackwardContext& c) {
    if (!c.input_grads[0]) return;
    Tensor& gx = *c.input_grads[0];
    for (std::size_t e = 0; e < index.size(); ++e) gx.row(index[e]) += c.grad.row(e);
  });
}

Var scatter_weighted_sum(Tape& tape, Var m, Var w, std::vector<NodeId> segment, std::size_t rows) {
  const Tensor& M = tape.value(m);
  const Tensor& W = tape.value(w);
  if (static_cast<std::size_t>(M.rows()) != segment.size() || W.size() != M.rows())
    throw std::invalid_argument("scatter_weighted_sum: m, w and segment lengths differ");
  for (NodeId s : segment)
    if (s >= rows) throw std::out_of_range("scatter_weighted_sum: segment id out of range");
  Tensor out;
  kernels::active::scatter_weighted_sum(M, flat(W), segment, rows, out);
  return tape.record(std::move(out), {m, w}, [segment = std::move(segment)](const BackwardContext& c) {
    const Tensor& M = *c.inputs[0];
    const Tensor& W = *c.inputs[1];
    for (std::size_t e = 0; e < segment.size(); ++e) {
      if (c.input_grads[0]) c.input_grads[0]->row(e) += W(e) * c.grad.row(segment[e]);
      if (c.input_grads[1]) (*c.input_grads[1])(e) += M.row(e).dot(c.grad.row(segment[e]));
    }
  });
}

Var segment_softmax(Tape& tape, Var scores, std::vector<NodeId> segment, std::size_t segments) {
  const Tensor& S = tape.value(scores);
  if (static_cast<std::size_t>(S.size()) != segment.size())
    throw std::invalid_argument("segment_softmax: scores and segment lengths differ");
  std::vector<double> mx(segments, -std::numeric_limits<double>::infinity());
  std::vector<double> total(segments, 0.0);
  std::vector<std::size_t> count(segments, 0);
  for (std::size_t e = 0; e < segment.size(); ++e) {
    if (segment[e] >= segments) throw std::out_of_range("segment_softmax: segment id out of range");
    mx[segment[e]] = std::max(mx[segment[e]], S(e));
    ++count[segment[e]];
  }
  for (std::size_t s = 0; s < segments; ++s)
    if (count[s] == 0)
      throw std::domain_error("segment_softmax: segment " + std::to_string(s) +
                              " is empty (node without neighbors or self-loop)");
  Tensor out(S.rows(), S.cols());
  for (std::size_t e = 0; e < segment.size(); ++e) {
    out(e) = std::exp(S(e) - mx[segment[e]]);
    total[segment[e]] += out(e);
  }
  for (std::size_t e = 0; e < segment.size(); ++e) out(e) /= total[segment[e]];
  return tape.record(std::move(out), {scores},
                     [segment = std::move(segment), segments](const BackwardContext& c) {
                       if (!c.input_grads[0]) return;
                       std::vector<double> dot(segments, 0.0);
                       for (std::size_t e = 0; e < segment.size(); ++e)
                         dot[segment[e]] += c.output(e) * c.grad(e);
                       for (std::size_t e = 0; e < segment.size(); ++e)
                         (*c.input_grads[0])(e) += c.output(e) * (c.grad(e) - dot[segment[e]]);
                     });
}

Var graph_softmax(Tape& tape, const Graph& g, Var scores) {
  const Tensor& S = tape.value(scores);
  if (static_cast<std::size_t>(S.size()) != g.num_edges())
    throw std::invalid_argument("graph_softmax: expected one score per edge");
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    if (g.degree(v) == 0)
      throw std::domain_error("graph_softmax: node " + std::to_string(v) +
                              " has an empty neighborhood");
  Tensor out(S.rows(), S.cols());
  kernels::active::segment_softmax(g, flat(S), flat(out));
  return tape.record(std::move(out), {scores}, [gp = &g](const BackwardContext& c) {
    if (!c.input_grads[0]) return;
    Tensor gs(c.grad.rows(), c.grad.cols());
    kernels::active::segment_softmax_backward(*gp, flat_of(c.output), flat_of(c.grad), flat(gs));
    *c.input_grads[0] += gs;
  });
}

Var aggregate(Tape& tape, const Graph& g, Var x, Var alpha) {
  const Tensor& X = tape.value(x);
  const Tensor& A = tape.value(alpha);
  if (static_cast<std::size_t>(X.rows()) != g.num_nodes() ||
      static_cast<std::size_t>(A.size()) != g.num_edges())
    throw std::invalid_argument("aggregate: x must have one row per node and alpha one entry per edge");
  Tensor out;
  kernels::active::aggregate(g, X, flat(A), out);
  return tape.record(std::move(out), {x, alpha}, [gp = &g](const BackwardContext& c) {
    const Tensor& X = *c.inputs[0];
    const Tensor& A = *c.inputs[1];
    Tensor gx;
    Tensor ga(A.rows(), A.cols());
    kernels::active::aggregate_backward(*gp, X, flat(A), c.grad, gx, flat(ga));
    accumulate(c.input_grads[0], gx);
    accumulate(c.input_grads[1], ga);
  });
}

Var edge_scores(Tape& tape, const Graph& g, Var s, Var t, Var a_neighbor, Var a_self, double slope) {
  const Tensor& S = tape.value(s);
  const Tensor& T = tape.value(t);
  const Tensor& An = tape.value(a_neighbor);
  const Tensor& As = tape.value(a_self);
  if (!same_shape(S, T)) shape_error("edge_scores", S, T);
  if (static_cast<std::size_t>(S.rows()) != g.num_nodes())
    throw std::invalid_argument("edge_scores: one row per node expected");
  if (An.rows() != S.cols() || An.cols() != 1) shape_error("edge_scores", S, An);
  if (!same_shape(An, As)) shape_error("edge_scores", An, As);
  Tensor out(static_cast<Eigen::Index>(g.num_edges()), 1);
  kernels::active::edge_scores(g, S, T, An, As, slope, flat(out));
  return tape.record(std::move(out), {s, t, a_neighbor, a_self}, [gp = &g, slope](const BackwardContext& c) {
    Tensor gs, gt, gan, gas;
    kernels::active::edge_scores_backward(*gp, *c.inputs[0], *c.inputs[1], *c.inputs[2],
                                          *c.inputs[3], slope, flat_of(c.grad), gs, gt, gan, gas);
    accumulate(c.input_grads[0], gs);
    accumulate(c.input_grads[1], gt);
    accumulate(c.input_grads[2], gan);
    accumulate(c.input_grads[3], gas);
  });
}

Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> labels,
                          std::span<const std::uint8_t> mask) {
  const Tensor& Z = tape.value(logits);
  const auto n = static_cast<std::size_t>(Z.rows());
  if (labels.size() != n || mask.size() != n)
    throw std::invalid_argument("softmax_cross_entropy: labels/mask length must equal logit rows");
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    ++count;
    if (labels[i] < 0 || labels[i] >= Z.cols())
      throw std::out_of_range("softmax_cross_entropy: label out of range");
  }
  if (count == 0) throw std::invalid_argument("softmax_cross_entropy: empty mask");

  Tensor probs = Tensor::Zero(Z.rows(), Z.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double mx = Z.row(i).maxCoeff();
    const double lse = mx + std::log((Z.row(i).array() - mx).exp().sum());
    loss += lse - Z(i, labels[i]);
    probs.row(i) = (Z.row(i).array() - lse).exp();
  }
  const double inv = 1.0 / static_cast<double>(count);
  Tensor out(1, 1);
  out(0, 0) = loss * inv;
  std::vector<int> lab(labels.begin(), labels.end());
  std::vector<std::uint8_t> msk(mask.begin(), mask.end());
  return tape.record(std::move(out), {logits},
                     [probs = std::move(probs), lab = std::move(lab), msk = std::move(msk),
                      inv](const BackwardContext& c) {
                       if (!c.input_grads[0]) return;
                       const double g = c.grad(0, 0) * inv;
                       Tensor& gz = *c.input_grads[0];
                       for (std::size_t i = 0; i < lab.size(); ++i) {
                         if (!msk[i]) continue;
                         gz.row(i) += g * probs.row(i);
                         gz(i, lab[i]) -= g;
                       }
                     });
}

Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double h) {
  Tensor grad = zeros_like(x);
  Tensor probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = probe(i);
    probe(i) = orig + h;
    const double up = f(probe);
    probe(i) = orig - h;
    const double down = f(probe);
    probe(i) = orig;
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace gatelab::ad
