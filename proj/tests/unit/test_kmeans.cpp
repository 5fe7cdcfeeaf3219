#include "doctest.h"

#include "../support.hpp"
#include "gatelab/kmeans.hpp"

using namespace gatelab;

TEST_CASE("k-means recovers well separated blobs") {
  Rng rng(1);
  const int per = 50;
  Tensor pts(3 * per, 2);
  const double cx[3] = {0, 10, -10}, cy[3] = {10, -5, -5};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per; ++i) pts.row(c * per + i) << cx[c] + 0.3 * rng.normal(), cy[c] + 0.3 * rng.normal();
  const auto km = kmeans(pts, 3, 7);
  CHECK(km.converged);
  for (int c = 0; c < 3; ++c)
    for (int i = 1; i < per; ++i) CHECK(km.labels[c * per + i] == km.labels[c * per]);
  CHECK(km.labels[0] != km.labels[per]);
  CHECK(km.labels[per] != km.labels[2 * per]);
}

TEST_CASE("k-means objective is non-increasing and deterministic") {
  Rng rng(2);
  const Tensor pts = testing::random_tensor(300, 2, rng);
  const auto a = kmeans(pts, 5, 3);
  for (std::size_t i = 1; i < a.sse_history.size(); ++i)
    CHECK(a.sse_history[i] <= a.sse_history[i - 1] + 1e-9);
  CHECK(a.sse_history.back() == doctest::Approx(within_cluster_sse(pts, a.centroids, a.labels)));
  const auto b = kmeans(pts, 5, 3);
  CHECK(a.labels == b.labels);
  CHECK(a.centroids == b.centroids);
}

TEST_CASE("parallel assignment matches serial") {
  Rng rng(3);
  const Tensor pts = testing::random_tensor(1000, 3, rng);
  const Tensor cents = testing::random_tensor(7, 3, rng);
  CHECK(assign_serial(pts, cents) == assign_parallel(pts, cents));
}

TEST_CASE("nearest centroid ties go to the lowest index") {
  Tensor c(2, 1);
  c << -1, 1;
  CHECK(nearest_centroid(c, Eigen::RowVectorXd::Zero(1)) == 0);
}

TEST_CASE("k-means argument checks") {
  const Tensor pts = Tensor::Ones(3, 2);
  CHECK_THROWS_AS(kmeans(pts, 4, 0), std::invalid_argument);
  CHECK_THROWS_AS(kmeans(pts, 0, 0), std::invalid_argument);
  // identical points: every cluster but one stays empty and keeps its centroid
  const auto km = kmeans(pts, 2, 0);
  CHECK(km.labels.size() == 3);
  CHECK(km.centroids.allFinite());
}
