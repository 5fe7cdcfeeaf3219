// Serial reference vs OpenMP kernels on ER graphs of the experiment size and
// larger. Arguments: node count, feature width.

#include <benchmark/benchmark.h>

#include <vector>

#include "gatelab/graph.hpp"
#include "gatelab/kernels.hpp"
#include "gatelab/kmeans.hpp"
#include "gatelab/rng.hpp"

using namespace gatelab;

namespace {

struct Fixture {
  Graph g;
  Tensor x, s, t, a, grad_out;
  std::vector<double> scores, alpha, grad_alpha;

  Fixture(std::size_t n, std::size_t d) {
    g = add_self_loops(erdos_renyi(n, 10.0 / static_cast<double>(n), 7));
    Rng rng(11);
    auto fill = [&](Eigen::Index r, Eigen::Index c) {
      Tensor m(r, c);
      for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
      return m;
    };
    const auto rows = static_cast<Eigen::Index>(n), cols = static_cast<Eigen::Index>(d);
    x = fill(rows, cols);
    s = fill(rows, cols);
    t = fill(rows, cols);
    a = fill(cols, 1);
    grad_out = fill(rows, cols);
    scores.resize(g.num_edges());
    alpha.resize(g.num_edges());
    grad_alpha.resize(g.num_edges());
    kernels::serial::edge_scores(g, s, t, a, a, 0.2, scores);
    kernels::serial::segment_softmax(g, scores, alpha);
  }
};

template <bool Parallel>
void BM_edge_scores(benchmark::State& state) {
  Fixture f(state.range(0), state.range(1));
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::parallel::edge_scores(f.g, f.s, f.t, f.a, f.a, 0.2, f.scores);
    else
      kernels::serial::edge_scores(f.g, f.s, f.t, f.a, f.a, 0.2, f.scores);
    benchmark::DoNotOptimize(f.scores.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.g.num_edges()));
}

template <bool Parallel>
void BM_softmax(benchmark::State& state) {
  Fixture f(state.range(0), state.range(1));
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::parallel::segment_softmax(f.g, f.scores, f.alpha);
    else
      kernels::serial::segment_softmax(f.g, f.scores, f.alpha);
    benchmark::DoNotOptimize(f.alpha.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.g.num_edges()));
}

template <bool Parallel>
void BM_aggregate(benchmark::State& state) {
  Fixture f(state.range(0), state.range(1));
  Tensor out;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::parallel::aggregate(f.g, f.x, f.alpha, out);
    else
      kernels::serial::aggregate(f.g, f.x, f.alpha, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.g.num_edges()));
}

template <bool Parallel>
void BM_aggregate_backward(benchmark::State& state) {
  Fixture f(state.range(0), state.range(1));
  Tensor grad_x;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::parallel::aggregate_backward(f.g, f.x, f.alpha, f.grad_out, grad_x, f.grad_alpha);
    else
      kernels::serial::aggregate_backward(f.g, f.x, f.alpha, f.grad_out, grad_x, f.grad_alpha);
    benchmark::DoNotOptimize(grad_x.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.g.num_edges()));
}

template <bool Parallel>
void BM_edge_scores_backward(benchmark::State& state) {
  Fixture f(state.range(0), state.range(1));
  Tensor gs, gt, ga, gself;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::parallel::edge_scores_backward(f.g, f.s, f.t, f.a, f.a, 0.2, f.scores, gs, gt, ga, gself);
    else
      kernels::serial::edge_scores_backward(f.g, f.s, f.t, f.a, f.a, 0.2, f.scores, gs, gt, ga, gself);
    benchmark::DoNotOptimize(gs.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.g.num_edges()));
}

template <bool Parallel>
void BM_kmeans_assign(benchmark::State& state) {
  Rng rng(3);
  Tensor points(state.range(0), state.range(1)), centroids(8, state.range(1));
  for (Eigen::Index i = 0; i < points.size(); ++i) points(i) = rng.normal();
  for (Eigen::Index i = 0; i < centroids.size(); ++i) centroids(i) = rng.normal();
  for (auto _ : state) {
    auto labels = Parallel ? assign_parallel(points, centroids) : assign_serial(points, centroids);
    benchmark::DoNotOptimize(labels.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void sizes(benchmark::internal::Benchmark* b) {
  for (long n : {1000, 20000})
    for (long d : {8, 64}) b->Args({n, d});
}

}  // namespace

BENCHMARK(BM_edge_scores<false>)->Name("edge_scores/serial")->Apply(sizes);
BENCHMARK(BM_edge_scores<true>)->Name("edge_scores/parallel")->Apply(sizes);
BENCHMARK(BM_edge_scores_backward<false>)->Name("edge_scores_backward/serial")->Apply(sizes);
BENCHMARK(BM_edge_scores_backward<true>)->Name("edge_scores_backward/parallel")->Apply(sizes);
BENCHMARK(BM_softmax<false>)->Name("segment_softmax/serial")->Apply(sizes);
BENCHMARK(BM_softmax<true>)->Name("segment_softmax/parallel")->Apply(sizes);
BENCHMARK(BM_aggregate<false>)->Name("aggregate/serial")->Apply(sizes);
BENCHMARK(BM_aggregate<true>)->Name("aggregate/parallel")->Apply(sizes);
BENCHMARK(BM_aggregate_backward<false>)->Name("aggregate_backward/serial")->Apply(sizes);
BENCHMARK(BM_aggregate_backward<true>)->Name("aggregate_backward/parallel")->Apply(sizes);
BENCHMARK(BM_kmeans_assign<false>)->Name("kmeans_assign/serial")->Args({100000, 2})->Args({100000, 64});
BENCHMARK(BM_kmeans_assign<true>)->Name("kmeans_assign/parallel")->Args({100000, 2})->Args({100000, 64});

BENCHMARK_MAIN();
