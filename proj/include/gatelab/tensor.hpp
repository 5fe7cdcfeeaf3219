#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>

namespace gatelab {

/// Dense float-64 array, rank <= 2, row-major. Vectors are n x 1.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using TensorMap = Eigen::Map<Tensor>;
using ConstTensorMap = Eigen::Map<const Tensor>;

inline Tensor zeros_like(const Tensor& t) { return Tensor::Zero(t.rows(), t.cols()); }

inline std::span<const double> flat(const Tensor& t) {
  return {t.data(), static_cast<std::size_t>(t.size())};
}
inline std::span<double> flat(Tensor& t) { return {t.data(), static_cast<std::size_t>(t.size())}; }

inline bool same_shape(const Tensor& a, const Tensor& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

inline bool all_finite(const Tensor& t) { return t.allFinite(); }

}  // namespace gatelab
