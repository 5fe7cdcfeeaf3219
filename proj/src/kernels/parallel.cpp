#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gatelab/kernels.hpp"

#ifdef GATELAB_HAVE_OPENMP
#include <omp.h>
#endif

namespace gatelab::kernels::parallel {

namespace {

int thread_id() {
#ifdef GATELAB_HAVE_OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

using Index = std::ptrdiff_t;

}  // namespace

int max_threads() {
#ifdef GATELAB_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void segment_softmax(const Graph& g, std::span<const double> scores, std::span<double> alpha) {
  const auto off = g.offsets();
  const Index n = static_cast<Index>(g.num_nodes());
#pragma omp parallel for schedule(static)
  for (Index v = 0; v < n; ++v) {
    const EdgeId b = off[v], end = off[v + 1];
    if (b == end) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (EdgeId e = b; e < end; ++e) mx = std::max(mx, scores[e]);
    double total = 0.0;
    for (EdgeId e = b; e < end; ++e) {
      alpha[e] = std::exp(scores[e] - mx);
      total += alpha[e];
    }
    const double inv = 1.0 / total;
    for (EdgeId e = b; e < end; ++e) alpha[e] *= inv;
  }
}

void segment_softmax_backward(const Graph& g, std::span<const double> alpha,
                              std::span<const double> grad_alpha, std::span<double> grad_scores) {
  const auto off = g.offsets();
  const Index n = static_cast<Index>(g.num_nodes());
#pragma omp parallel for schedule(static)
  for (Index v = 0; v < n; ++v) {
    double dot = 0.0;
    for (EdgeId e = off[v]; e < off[v + 1]; ++e) dot += alpha[e] * grad_alpha[e];
    for (EdgeId e = off[v]; e < off[v + 1]; ++e) grad_scores[e] = alpha[e] * (grad_alpha[e] - dot);
  }
}

void aggregate(const Graph& g, const Tensor& x, std::span<const double> alpha, Tensor& out) {
  const Index n = static_cast<Index>(g.num_nodes());
  const Index d = x.cols();
  out.resize(n, d);
  const auto off = g.offsets();
  const auto nb = g.neighbors();
  const double* xs = x.data();
  double* os = out.data();
#pragma omp parallel for schedule(static)
  for (Index v = 0; v < n; ++v) {
    double* o = os + v * d;
    std::fill(o, o + d, 0.0);
    for (EdgeId e = off[v]; e < off[v + 1]; ++e) {
      const double w = alpha[e];
      const double* xr = xs + static_cast<Index>(nb[e]) * d;
#pragma omp simd
      for (Index k = 0; k < d; ++k) o[k] += w * xr[k];
    }
  }
}

void aggregate_backward(const Graph& g, const Tensor& x, std::span<const double> alpha,
                        const Tensor& grad_out, Tensor& grad_x, std::span<double> grad_alpha) {
  const Index n = static_cast<Index>(g.num_nodes());
  const Index d = x.cols();
  grad_x.resize(x.rows(), d);
  const auto off = g.offsets();
  const auto nb = g.neighbors();
  const auto rev = g.reverse();
  const double* xs = x.data();
  const double* go = grad_out.data();
  double* gx = grad_x.data();
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (Index v = 0; v < n; ++v) {
      const double* gv = go + v * d;
      for (EdgeId e = off[v]; e < off[v + 1]; ++e) {
        const double* xr = xs + static_cast<Index>(nb[e]) * d;
        double acc = 0.0;
#pragma omp simd reduction(+ : acc)
        for (Index k = 0; k < d; ++k) acc += xr[k] * gv[k];
        grad_alpha[e] = acc;
      }
    }
    // Row u of grad_x collects the edges leaving u, i.e. the reverses of row u.
#pragma omp for schedule(static)
    for (Index u = 0; u < n; ++u) {
      double* o = gx + u * d;
      std::fill(o, o + d, 0.0);
      for (EdgeId e = off[u]; e < off[u + 1]; ++e) {
        const double w = alpha[rev[e]];
        const double* gw = go + static_cast<Index>(nb[e]) * d;
#pragma omp simd
        for (Index k = 0; k < d; ++k) o[k] += w * gw[k];
      }
    }
  }
}

void edge_scores(const Graph& g, const Tensor& s, const Tensor& t, const Tensor& a_neighbor,
                 const Tensor& a_self, double slope, std::span<double> scores) {
  const Index n = static_cast<Index>(g.num_nodes());
  const Index d = s.cols();
  const auto off = g.offsets();
  const auto nb = g.neighbors();
  const double* ss = s.data();
  const double* ts = t.data();
#pragma omp parallel for schedule(static)
  for (Index v = 0; v < n; ++v) {
    const double* tv = ts + v * d;
    for (EdgeId e = off[v]; e < off[v + 1]; ++e) {
      const Index u = nb[e];
      const double* a = (u == v ? a_self : a_neighbor).data();
      const double* su = ss + u * d;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (Index k = 0; k < d; ++k) acc += a[k] * leaky(su[k] + tv[k], slope);
      scores[e] = acc;
    }
  }
}

void edge_scores_backward(const Graph& g, const Tensor& s, const Tensor& t,
                          const Tensor& a_neighbor, const Tensor& a_self, double slope,
                          std::span<const double> grad_scores, Tensor& grad_s, Tensor& grad_t,
                          Tensor& grad_a_neighbor, Tensor& grad_a_self) {
  const Index n = static_cast<Index>(g.num_nodes());
  const Index d = s.cols();
  grad_s.resize(s.rows(), d);
  grad_t.resize(t.rows(), d);
  const auto off = g.offsets();
  const auto nb = g.neighbors();
  const auto rev = g.reverse();
  const double* ss = s.data();
  const double* ts = t.data();
  double* gs = grad_s.data();
  double* gt = grad_t.data();
  const int threads = max_threads();
  // Per-thread [a_neighbor | a_self] partial sums, reduced in thread order.
  std::vector<double> partial(static_cast<std::size_t>(threads) * 2 * d, 0.0);

#pragma omp parallel
  {
    double* ga = partial.data() + static_cast<std::size_t>(thread_id()) * 2 * d;
#pragma omp for schedule(static)
    for (Index v = 0; v < n; ++v) {
      const double* tv = ts + v * d;
      double* gtv = gt + v * d;
      std::fill(gtv, gtv + d, 0.0);
      for (EdgeId e = off[v]; e < off[v + 1]; ++e) {
        const Index u = nb[e];
        const bool self = u == v;
        const double* a = (self ? a_self : a_neighbor).data();
        double* gav = ga + (self ? d : 0);
        const double* su = ss + u * d;
        const double ge = grad_scores[e];
#pragma omp simd
        for (Index k = 0; k < d; ++k) {
          const double pre = su[k] + tv[k];
          gav[k] += ge * leaky(pre, slope);
          gtv[k] += ge * a[k] * leaky_grad(pre, slope);
        }
      }
    }
#pragma omp for schedule(static)
    for (Index u = 0; u < n; ++u) {
      const double* su = ss + u * d;
      double* gsu = gs + u * d;
      std::fill(gsu, gsu + d, 0.0);
      for (EdgeId e = off[u]; e < off[u + 1]; ++e) {
        const Index w = nb[e];
        const EdgeId r = rev[e];  // u -> w
        const double* a = (w == u ? a_self : a_neighbor).data();
        const double* tw = ts + w * d;
        const double ge = grad_scores[r];
#pragma omp simd
        for (Index k = 0; k < d; ++k) gsu[k] += ge * a[k] * leaky_grad(su[k] + tw[k], slope);
      }
    }
  }

  grad_a_neighbor.setZero(d, 1);
  grad_a_self.setZero(d, 1);
  for (int th = 0; th < threads; ++th) {
    const double* ga = partial.data() + static_cast<std::size_t>(th) * 2 * d;
    for (Index k = 0; k < d; ++k) {
      grad_a_neighbor(k, 0) += ga[k];
      grad_a_self(k, 0) += ga[d + k];
    }
  }
}

void gather_rows(const Tensor& x, std::span<const NodeId> index, Tensor& out) {
  const Index m = static_cast<Index>(index.size());
  out.resize(m, x.cols());
#pragma omp parallel for schedule(static)
  for (Index e = 0; e < m; ++e) out.row(e) = x.row(index[e]);
}

void scatter_weighted_sum(const Tensor& m, std::span<const double> w,
                          std::span<const NodeId> segment, std::size_t rows, Tensor& out) {
  const Index d = m.cols();
  out.setZero(static_cast<Index>(rows), d);
  // Segments are arbitrary, so split the work by feature column instead of by row.
#pragma omp parallel for schedule(static)
  for (Index k = 0; k < d; ++k)
    for (std::size_t e = 0; e < segment.size(); ++e) out(segment[e], k) += w[e] * m(e, k);
}

}  // namespace gatelab::kernels::parallel
