#include "gatelab/kmeans.hpp"

#include <limits>
#include <stdexcept>

#include "gatelab/rng.hpp"

namespace gatelab {

int nearest_centroid(const Tensor& centroids, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<int> assign_serial(const Tensor& points, const Tensor& centroids) {
  std::vector<int> labels(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) labels[i] = nearest_centroid(centroids, points.row(i));
  return labels;
}

std::vector<int> assign_parallel(const Tensor& points, const Tensor& centroids) {
  const auto n = static_cast<long>(points.rows());
  std::vector<int> labels(n);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) labels[i] = nearest_centroid(centroids, points.row(i));
  return labels;
}

double within_cluster_sse(const Tensor& points, const Tensor& centroids,
                          const std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    total += (points.row(i) - centroids.row(labels[i])).squaredNorm();
  return total;
}

namespace {

Tensor plus_plus_seeds(const Tensor& points, std::size_t C, Rng& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  Tensor centroids(C, points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.below(n)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < C; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - centroids.row(c - 1)).squaredNorm());
      total += d2[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);  // every point already coincides with a centroid
    }
    centroids.row(c) = points.row(pick);
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Tensor& points, std::size_t C, std::uint64_t seed,
                    std::size_t max_iters) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (C == 0) throw std::invalid_argument("kmeans: need at least one cluster");
  if (C > n) throw std::invalid_argument("kmeans: more clusters than points");
  Rng rng(seed);
  KMeansResult r;
  r.centroids = plus_plus_seeds(points, C, rng);
  r.labels = assign_parallel(points, r.centroids);

  for (std::size_t it = 0; it < max_iters; ++it) {
    Tensor sums = Tensor::Zero(C, points.cols());
    std::vector<std::size_t> counts(C, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(r.labels[i]) += points.row(i);
      ++counts[r.labels[i]];
    }
    for (std::size_t c = 0; c < C; ++c)
      if (counts[c] > 0) r.centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
    r.sse_history.push_back(within_cluster_sse(points, r.centroids, r.labels));
    r.iterations = it + 1;

    auto next = assign_parallel(points, r.centroids);
    if (next == r.labels) {
      r.converged = true;
      break;
    }
    r.labels = std::move(next);
  }
  return r;
}

}  // namespace gatelab
