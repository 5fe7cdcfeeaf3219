// Finite-difference checks of every differentiable primitive.

#include <functional>

#include "doctest.h"

#include "../support.hpp"
#include "gatelab/autodiff.hpp"

using namespace gatelab;

namespace {

using Builder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

/// Reduces an op output Y (m x k) to the scalar sum(P Y Q) with fixed
/// random P and Q.
struct Probe {
  Tensor P, Q;
  Probe(Eigen::Index m, Eigen::Index k, Rng& rng)
      : P(testing::random_tensor(3, m, rng)), Q(testing::random_tensor(k, 1, rng)) {}
  ad::Var apply(ad::Tape& tape, ad::Var y) const {
    return ad::sum(tape, ad::matmul(tape, ad::matmul(tape, tape.constant(P), y), tape.constant(Q)));
  }
};

double grad_check(const std::vector<Tensor>& inputs, const Builder& build, std::uint64_t seed) {
  Rng rng(seed);
  ad::Tape probe_tape;
  std::vector<ad::Var> probe_vars;
  for (const auto& x : inputs) probe_vars.push_back(probe_tape.constant(x));
  const Tensor& y0 = probe_tape.value(build(probe_tape, probe_vars));
  const Probe probe(y0.rows(), y0.cols(), rng);

  auto loss_at = [&](const std::vector<Tensor>& xs) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (std::size_t i = 0; i < xs.size(); ++i) vars.push_back(tape.parameter(xs[i], i));
    return tape.value(probe.apply(tape, build(tape, vars)))(0, 0);
  };

  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(tape.parameter(inputs[i], i));
  const auto grads = tape.backward(probe.apply(tape, build(tape, vars)));

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor fd = ad::finite_difference_grad(
        [&](const Tensor& xi) {
          auto xs = inputs;
          xs[i] = xi;
          return loss_at(xs);
        },
        inputs[i], 1e-5);
    worst = std::max(worst, testing::fd_err(grads[i], fd));
  }
  return worst;
}

constexpr int kInstances = 20;
constexpr double kTol = 1e-5;

}  // namespace

TEST_CASE("dense primitives pass finite differences") {
  for (int k = 0; k < kInstances; ++k) {
    Rng rng(1000 + k);
    const auto m = 2 + rng.below(5), n = 1 + rng.below(5), p = 1 + rng.below(5);
    const Tensor A = testing::random_tensor(m, n, rng), B = testing::random_tensor(n, p, rng),
                 Bt = testing::random_tensor(p, n, rng), C = testing::random_tensor(m, n, rng);
    CHECK(grad_check({A, B}, [](ad::Tape& t, auto& v) { return ad::matmul(t, v[0], v[1]); }, k) < kTol);
    CHECK(grad_check({A, Bt}, [](ad::Tape& t, auto& v) { return ad::matmul_nt(t, v[0], v[1]); }, k) < kTol);
    CHECK(grad_check({A, C}, [](ad::Tape& t, auto& v) { return ad::add(t, v[0], v[1]); }, k) < kTol);
    const Tensor b = testing::random_tensor(n, 1, rng);
    CHECK(grad_check({A, b}, [](ad::Tape& t, auto& v) { return ad::add_bias(t, v[0], v[1]); }, k) < kTol);
    CHECK(grad_check({A}, [](ad::Tape& t, auto& v) { return ad::scale(t, v[0], -1.7); }, k) < kTol);
    CHECK(grad_check({A}, [](ad::Tape& t, auto& v) { return ad::sum(t, v[0]); }, k) < kTol);
    for (double slope : {0.0, 0.2})
      CHECK(grad_check({A}, [slope](ad::Tape& t, auto& v) { return ad::leaky_relu(t, v[0], slope); }, k) < kTol);
  }
}

TEST_CASE("sparse primitives pass finite differences") {
  for (int k = 0; k < kInstances; ++k) {
    Rng rng(2000 + k);
    const std::size_t n = 3 + rng.below(8), d = 1 + rng.below(4);
    const Graph g = testing::random_graph(n, 0.4, 3000 + k);
    const auto E = static_cast<Eigen::Index>(g.num_edges());
    const Tensor X = testing::random_tensor(n, d, rng), Y = testing::random_tensor(n, d, rng);
    const Tensor a1 = testing::random_tensor(d, 1, rng), a2 = testing::random_tensor(d, 1, rng);
    const Tensor scores = testing::random_tensor(E, 1, rng);
    Tensor alpha = testing::random_tensor(E, 1, rng).array().abs();
    const Tensor M = testing::random_tensor(E, d, rng);
    std::vector<NodeId> src(g.neighbors().begin(), g.neighbors().end());
    std::vector<NodeId> dst(g.targets().begin(), g.targets().end());

    CHECK(grad_check({X}, [&](ad::Tape& t, auto& v) { return ad::gather_rows(t, v[0], src); }, k) < kTol);
    CHECK(grad_check({M, alpha}, [&](ad::Tape& t, auto& v) {
            return ad::scatter_weighted_sum(t, v[0], v[1], dst, n);
          }, k) < kTol);
    CHECK(grad_check({scores}, [&](ad::Tape& t, auto& v) {
            return ad::segment_softmax(t, v[0], dst, n);
          }, k) < kTol);
    CHECK(grad_check({scores}, [&](ad::Tape& t, auto& v) { return ad::graph_softmax(t, g, v[0]); }, k) < kTol);
    CHECK(grad_check({X, alpha}, [&](ad::Tape& t, auto& v) { return ad::aggregate(t, g, v[0], v[1]); }, k) < kTol);
    for (double slope : {0.0, 0.2}) {
      CHECK(grad_check({X, Y, a1, a2}, [&](ad::Tape& t, auto& v) {
              return ad::edge_scores(t, g, v[0], v[1], v[2], v[3], slope);
            }, k) < kTol);
      // shared source/target and a single attention vector, as in gat_s
      CHECK(grad_check({X, a1}, [&](ad::Tape& t, auto& v) {
              return ad::edge_scores(t, g, v[0], v[0], v[1], v[1], slope);
            }, k) < kTol);
    }
  }
}

TEST_CASE("softmax cross entropy passes finite differences and has the closed-form gradient") {
  for (int k = 0; k < kInstances; ++k) {
    Rng rng(4000 + k);
    const std::size_t n = 4 + rng.below(6), C = 2 + rng.below(4);
    const Tensor Z = testing::random_tensor(n, C, rng, 2.0);
    std::vector<int> labels(n);
    std::vector<std::uint8_t> mask(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.below(C));
      mask[i] = rng.uniform() < 0.6;
    }
    mask[0] = 1;

    ad::Tape tape;
    auto z = tape.parameter(Z, 0);
    const auto grads = tape.backward(ad::softmax_cross_entropy(tape, z, labels, mask));
    const Tensor fd = ad::finite_difference_grad(
        [&](const Tensor& zz) {
          ad::Tape t;
          return t.value(ad::softmax_cross_entropy(t, t.constant(zz), labels, mask))(0, 0);
        },
        Z, 1e-5);
    CHECK(testing::fd_err(grads[0], fd) < kTol);

    // (softmax - onehot) / |mask|
    Tensor expect = Tensor::Zero(n, C);
    double count = 0;
    for (std::size_t i = 0; i < n; ++i) count += mask[i];
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      Eigen::RowVectorXd p = (Z.row(i).array() - Z.row(i).maxCoeff()).exp();
      p /= p.sum();
      p(labels[i]) -= 1.0;
      expect.row(i) = p / count;
    }
    CHECK(testing::rel_err(grads[0], expect) < 1e-12);
  }
}

TEST_CASE("backward semantics") {
  ad::Tape tape;
  auto a = tape.parameter(Tensor::Ones(2, 2), 0);
  auto unused = tape.parameter(Tensor::Ones(3, 1), 1);
  (void)unused;
  auto y = ad::matmul(tape, a, a);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);

  // a is used twice; its gradient accumulates both paths
  auto l = ad::sum(tape, ad::add(tape, a, a));
  const auto g = tape.backward(l);
  CHECK(g[0] == Tensor::Constant(2, 2, 2.0));
  CHECK(g[1] == Tensor::Zero(3, 1));

  // the loss gradient of itself is one
  ad::Tape t2;
  auto p = t2.parameter(Tensor::Constant(1, 1, 3.0), 0);
  CHECK(t2.backward(p)[0](0, 0) == 1.0);
}

TEST_CASE("primitive error paths") {
  ad::Tape tape;
  auto a = tape.constant(Tensor::Ones(2, 3));
  auto b = tape.constant(Tensor::Ones(2, 3));
  CHECK_THROWS_AS(ad::matmul(tape, a, b), std::invalid_argument);
  CHECK_THROWS_AS(ad::add(tape, a, tape.constant(Tensor::Ones(3, 2))), std::invalid_argument);
  CHECK_THROWS_AS(ad::leaky_relu(tape, a, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(ad::gather_rows(tape, a, {0, 5}), std::out_of_range);

  auto scores = tape.constant(Tensor::Ones(3, 1));
  CHECK_THROWS_AS(ad::segment_softmax(tape, scores, {0, 0, 2}, 3), std::domain_error);
  CHECK_THROWS_AS(ad::segment_softmax(tape, scores, {0, 0, 7}, 3), std::out_of_range);

  std::vector<int> labels{0, 1};
  std::vector<std::uint8_t> none{0, 0}, all{1, 1};
  CHECK_THROWS_AS(ad::softmax_cross_entropy(tape, b, labels, none), std::invalid_argument);
  std::vector<int> bad{0, 9};
  CHECK_THROWS_AS(ad::softmax_cross_entropy(tape, b, bad, all), std::out_of_range);

  // node 2 has no neighbors and no self-loop
  const std::vector<std::pair<NodeId, NodeId>> edges{{0, 1}, {0, 0}, {1, 1}};
  const Graph g = Graph::from_edges(3, edges);
  auto e = tape.constant(Tensor::Ones(static_cast<Eigen::Index>(g.num_edges()), 1));
  CHECK_THROWS_AS(ad::graph_softmax(tape, g, e), std::domain_error);
}
