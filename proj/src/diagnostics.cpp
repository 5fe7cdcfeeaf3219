#include "gatelab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gatelab {

std::vector<double> extract_alpha_vv(std::span<const double> alpha, const Graph& g) {
  const std::size_t n = g.num_nodes();
  if (alpha.empty()) return std::vector<double>(n, 1.0);
  if (alpha.size() != g.num_edges())
    throw std::invalid_argument("extract_alpha_vv: expected one coefficient per edge");
  std::vector<double> out(n);
  for (NodeId v = 0; v < n; ++v) {
    const EdgeId e = g.self_edge(v);
    if (e == kNoEdge) throw std::invalid_argument("extract_alpha_vv: node without self-loop");
    out[v] = alpha[e];
  }
  return out;
}

Histogram alpha_histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("alpha_histogram: need at least one bin");
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(static_cast<double>(b) / bins);
  for (double x : values) {
    const double c = std::clamp(x, 0.0, 1.0);
    auto b = static_cast<std::size_t>(c * static_cast<double>(bins));
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
  }
  return h;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sequence");
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  double lo = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lo + hi);
}

std::string_view to_string(PairMode mode) {
  return mode == PairMode::all_pairs ? "all_pairs" : "adjacent_pairs";
}

double smoothness_energy(const Tensor& h, const Graph& g, PairMode mode) {
  if (static_cast<std::size_t>(h.rows()) != g.num_nodes())
    throw std::invalid_argument("smoothness_energy: one row per node expected");
  if (mode == PairMode::all_pairs) {
    // sum_{u<v} ||h_u - h_v||^2 = n * sum_v ||h_v - mean||^2
    if (h.rows() == 0) return 0.0;
    const Eigen::RowVectorXd mean = h.colwise().mean();
    const double spread = (h.rowwise() - mean).squaredNorm();
    return static_cast<double>(h.rows()) * spread;
  }
  double total = 0.0;
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    for (NodeId u : g.neighborhood(v))
      if (u < v) total += (h.row(u) - h.row(v)).squaredNorm();
  return total;
}

Homophily edge_homophily(std::span<const int> labels, const Graph& g) {
  if (labels.size() != g.num_nodes())
    throw std::invalid_argument("edge_homophily: one label per node expected");
  std::size_t same = 0, total = 0;
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    for (NodeId u : g.neighborhood(v))
      if (u < v) {
        ++total;
        if (labels[u] == labels[v]) ++same;
      }
  if (total == 0) return Homophily{1.0, true};
  return Homophily{static_cast<double>(same) / static_cast<double>(total), false};
}

}  // namespace gatelab
