#pragma once

#include <cmath>
#include <string>

#include "dskd/error.hpp"
#include "dskd/matrix.hpp"

namespace dskd {

enum class StructureKind { cosine, inner_product };

inline const char* structure_kind_name(StructureKind k) {
  return k == StructureKind::cosine ? "cosine" : "inner_product";
}

// n x n pairwise-similarity matrix over a sequence's hidden states.
//   cosine:        M(i,j) = <h_i, h_j> / (|h_i| |h_j|)
//   inner_product: M(i,j) = <h_i, h_j> / sum_k <h_i, h_k>
struct StructureMatrix {
  Matrix values;
  StructureKind kind = StructureKind::cosine;
};

inline StructureMatrix structure_matrix(const Matrix& hidden, StructureKind kind) {
  const std::size_t n = hidden.rows();
  if (n == 0) throw DimensionError("structure_matrix: empty hidden matrix");
  auto h = as_eigen(hidden);
  EigenRowMajor gram = h * h.transpose();
  StructureMatrix out{Matrix(n, n), kind};
  auto m = as_eigen(out.values);
  if (kind == StructureKind::cosine) {
    Eigen::VectorXd norms = gram.diagonal().cwiseSqrt();
    for (std::size_t i = 0; i < n; ++i)
      if (norms(static_cast<Eigen::Index>(i)) == 0.0)
        throw NumericError("structure_matrix: zero-norm row " + std::to_string(i));
    m = gram.array() /
        (norms * norms.transpose()).array();
  } else {
    Eigen::VectorXd sums = gram.rowwise().sum();
    for (std::size_t i = 0; i < n; ++i)
      if (sums(static_cast<Eigen::Index>(i)) == 0.0)
        throw NumericError("structure_matrix: zero inner-product row sum at row " +
                           std::to_string(i));
    m = gram.array().colwise() / sums.array();
  }
  check_finite(out.values, "structure_matrix");
  return out;
}

// L1 distance between two structure matrices of the same kind and size.
inline double structure_distance(const StructureMatrix& a, const StructureMatrix& b) {
  if (a.kind != b.kind)
    throw DimensionError("structure_distance: kind mismatch");
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
    throw DimensionError("structure_distance: size mismatch, " + a.values.shape_str() +
                         " vs " + b.values.shape_str());
  return (as_eigen(a.values) - as_eigen(b.values)).cwiseAbs().sum();
}

}  // namespace dskd
