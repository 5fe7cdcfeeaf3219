#include "gatelab/init.hpp"

#include <Eigen/QR>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gatelab {

std::string_view to_string(MatrixScheme s) {
  return s == MatrixScheme::looks_linear_orthogonal ? "looks_linear_orthogonal" : "xavier_uniform";
}

std::string_view to_string(AttentionScheme s) {
  switch (s) {
    case AttentionScheme::standard: return "standard";
    case AttentionScheme::zero: return "zero";
    case AttentionScheme::xavier_uniform: return "xavier_uniform";
  }
  return "?";
}

MatrixScheme parse_matrix_scheme(std::string_view name) {
  if (name == "looks_linear_orthogonal") return MatrixScheme::looks_linear_orthogonal;
  if (name == "xavier_uniform") return MatrixScheme::xavier_uniform;
  throw std::invalid_argument("unknown matrix scheme '" + std::string(name) + "'");
}

AttentionScheme parse_attention_scheme(std::string_view name) {
  if (name == "standard") return AttentionScheme::standard;
  if (name == "zero") return AttentionScheme::zero;
  if (name == "xavier_uniform") return AttentionScheme::xavier_uniform;
  throw std::invalid_argument("unknown attention scheme '" + std::string(name) + "'");
}

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor g(rows, cols);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
  return g;
}

// Tall (rows >= cols) matrix with orthonormal columns.
Tensor orthonormal_columns(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor g = gaussian(rows, cols, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  const Eigen::MatrixXd r = qr.matrixQR();
  for (std::size_t j = 0; j < cols; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

// Unit vector orthogonal to the row space of `basis` (rows are arbitrary,
// possibly dependent). Re-draws if the projection degenerates.
Eigen::VectorXd orthogonal_unit(const Eigen::MatrixXd& basis_rows, std::size_t dim, Rng& rng) {
  Eigen::MatrixXd q;
  if (basis_rows.rows() > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis_rows.transpose());
    const auto rank = qr.rank();
    q = (qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim)).leftCols(rank);
  }
  for (int attempt = 0; attempt < 16; ++attempt) {
    Eigen::VectorXd x(dim);
    for (std::size_t i = 0; i < dim; ++i) x(i) = rng.normal();
    if (q.cols() > 0) x -= q * (q.transpose() * x);
    if (q.cols() > 0) x -= q * (q.transpose() * x);  // second pass for round-off
    const double norm = x.norm();
    if (norm > 1e-8) return x / norm;
  }
  return Eigen::VectorXd::Zero(dim);  // basis spans the space
}

}  // namespace

Tensor random_orthogonal(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) return Tensor(rows, cols);
  if (rows >= cols) return orthonormal_columns(rows, cols, rng);
  return orthonormal_columns(cols, rows, rng).transpose();
}

Tensor looks_linear_orthogonal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("looks_linear_orthogonal: empty shape");
  Rng rng(seed);
  const std::size_t m = rows / 2, k = cols / 2;
  if (m == 0 || k == 0) return random_orthogonal(rows, cols, rng);

  Tensor out = Tensor::Zero(rows, cols);
  const Tensor o = random_orthogonal(m, k, rng) / std::sqrt(2.0);
  out.block(0, 0, m, k) = o;
  out.block(0, k, m, k) = -o;
  out.block(m, 0, m, k) = -o;
  out.block(m, k, m, k) = o;

  if (cols % 2 == 1) {
    const Eigen::MatrixXd block_cols = out.block(0, 0, 2 * m, 2 * k).transpose();
    out.block(0, cols - 1, 2 * m, 1) = orthogonal_unit(block_cols, 2 * m, rng);
  }
  if (rows % 2 == 1) {
    const Eigen::MatrixXd block_rows = out.topRows(2 * m);
    out.row(rows - 1) = orthogonal_unit(block_rows, cols, rng).transpose();
  }
  return out;
}

Tensor xavier_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = rng.uniform(-bound, bound);
  return out;
}

Tensor zero_attention(std::size_t dim) { return Tensor::Zero(dim, 1); }

void initialize(NetworkParams& params, const NetworkSpec& spec, const InitPolicy& policy) {
  if (params.layers.size() != spec.layers.size())
    throw std::invalid_argument("initialize: parameters do not match the network spec");
  auto seed_for = [&](ad::ParamId id) { return derive_seed(policy.seed, 0x1000 + id); };
  auto init_matrix = [&](ad::ParamId id) {
    Tensor& t = params.tensors[id];
    const auto r = static_cast<std::size_t>(t.rows()), c = static_cast<std::size_t>(t.cols());
    t = policy.matrix_scheme == MatrixScheme::looks_linear_orthogonal
            ? looks_linear_orthogonal(r, c, seed_for(id))
            : xavier_uniform(r, c, seed_for(id));
  };
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& slots = params.layers[l];
    const auto kind = spec.layers[l].kind;
    for (auto id : {slots.message, slots.source, slots.target})
      if (id != kNoParam) init_matrix(id);  // re-initializing a shared slot is harmless
    if (slots.bias != kNoParam) params.tensors[slots.bias].setZero();
    if (!has_attention(kind)) continue;
    const bool gat_family = kind == LayerKind::gat || kind == LayerKind::gat_s;
    AttentionScheme scheme = policy.attention_scheme;
    if (scheme == AttentionScheme::standard)
      scheme = gat_family ? AttentionScheme::xavier_uniform : AttentionScheme::zero;
    for (auto id : {slots.attn_neighbor, slots.attn_self}) {
      Tensor& t = params.tensors[id];
      t = scheme == AttentionScheme::zero
              ? zero_attention(static_cast<std::size_t>(t.rows()))
              : xavier_uniform(static_cast<std::size_t>(t.rows()), 1, seed_for(id));
    }
  }
}

}  // namespace gatelab
