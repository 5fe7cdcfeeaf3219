#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gatelab/tensor.hpp"

namespace gatelab {

struct KMeansResult {
  std::vector<int> labels;
  Tensor centroids;  // C x d
  /// Within-cluster SSE after each Lloyd iteration; non-increasing.
  std::vector<double> sse_history;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Lloyd's algorithm from k-means++ seeds. Stops when no assignment changes
/// or after `max_iters` iterations. A cluster that empties keeps its previous
/// centroid. Throws std::invalid_argument if C == 0 or C > n.
KMeansResult kmeans(const Tensor& points, std::size_t C, std::uint64_t seed,
                    std::size_t max_iters = 300);

/// Index of the closest centroid (lowest index on ties).
int nearest_centroid(const Tensor& centroids, const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// Assignment step: closest centroid of every point. The parallel version
/// splits points across OpenMP threads and returns the same labels.
std::vector<int> assign_serial(const Tensor& points, const Tensor& centroids);
std::vector<int> assign_parallel(const Tensor& points, const Tensor& centroids);

/// Sum of squared distances of points to their assigned centroid.
double within_cluster_sse(const Tensor& points, const Tensor& centroids,
                          const std::vector<int>& labels);

}  // namespace gatelab
