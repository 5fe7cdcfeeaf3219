#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "gatelab/layers.hpp"
#include "gatelab/rng.hpp"
#include "gatelab/tensor.hpp"

namespace gatelab {

enum class MatrixScheme { looks_linear_orthogonal, xavier_uniform };
/// `standard` picks Xavier for GAT attention vectors and zero for GATE's.
enum class AttentionScheme { standard, zero, xavier_uniform };

struct InitPolicy {
  MatrixScheme matrix_scheme = MatrixScheme::looks_linear_orthogonal;
  AttentionScheme attention_scheme = AttentionScheme::standard;
  std::uint64_t seed = 0;
};

std::string_view to_string(MatrixScheme s);
std::string_view to_string(AttentionScheme s);
MatrixScheme parse_matrix_scheme(std::string_view name);
AttentionScheme parse_attention_scheme(std::string_view name);

/// rows x cols with orthonormal rows (rows <= cols) or columns (rows > cols):
/// QR of a Gaussian matrix with the sign of diag(R) folded into Q.
Tensor random_orthogonal(std::size_t rows, std::size_t cols, Rng& rng);

/// Mirrored block [[O, -O], [-O, O]] / sqrt(2) with O random orthogonal of
/// shape (rows/2) x (cols/2). For odd shapes the spare column and row are
/// unit-norm Gaussian vectors orthogonalized against what is already there.
/// On mirrored inputs (x, -x) a ReLU stack of these acts linearly.
Tensor looks_linear_orthogonal(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// I.i.d. uniform on +-sqrt(6 / (rows + cols)).
Tensor xavier_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed);

Tensor zero_attention(std::size_t dim);

/// Fills every tensor of `params` according to `policy`; parameter slot i
/// draws from its own stream derived from (policy.seed, i).
void initialize(NetworkParams& params, const NetworkSpec& spec, const InitPolicy& policy);

}  // namespace gatelab
