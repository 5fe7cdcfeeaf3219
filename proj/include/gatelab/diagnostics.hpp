#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "gatelab/graph.hpp"
#include "gatelab/tensor.hpp"

namespace gatelab {

/// Self-attention coefficient alpha_vv of every node in one layer at one
/// epoch. alpha_vv = 1 means the layer ignores the neighborhood of v.
struct AlphaTrace {
  std::size_t epoch = 0;
  std::size_t layer = 0;
  std::vector<double> alpha_vv;
};

/// Pulls alpha_vv out of a per-edge coefficient vector. An empty `alpha`
/// (an mlp layer) yields all ones. Requires self-loops when `alpha` is given.
std::vector<double> extract_alpha_vv(std::span<const double> alpha, const Graph& g);

struct Histogram {
  std::vector<double> edges;  // bins + 1 boundaries on [0, 1]
  std::vector<std::size_t> counts;
};

/// Equal-width bins on [0, 1]; the last bin is closed so 1.0 lands in it.
/// Values outside [0, 1] are clamped.
Histogram alpha_histogram(std::span<const double> values, std::size_t bins = 20);

double median(std::vector<double> values);

enum class PairMode { all_pairs, adjacent_pairs };
std::string_view to_string(PairMode mode);

/// Sum over the mode's unordered node pairs u < v of ||h_u - h_v||^2.
/// adjacent_pairs uses the non-self-loop edges of `g`.
double smoothness_energy(const Tensor& h, const Graph& g, PairMode mode);

struct Homophily {
  double value = 1.0;
  bool no_edges = false;  // set when the graph has no non-self-loop edge
};

/// Fraction of non-self-loop edges joining equal labels.
Homophily edge_homophily(std::span<const int> labels, const Graph& g);

}  // namespace gatelab
