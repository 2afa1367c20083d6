#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <limits>

#include "dskd/error.hpp"
#include "dskd/matrix.hpp"

namespace dskd {

// Moore-Penrose pseudo-inverse via SVD. Singular values sigma_i <=
// rcond * sigma_max are truncated. rcond < 0 selects the conventional
// default max(rows, cols) * machine epsilon.
inline Matrix pinv(const Matrix& a, double rcond = -1.0) {
  if (a.empty()) throw DimensionError("pinv: empty matrix");
  if (rcond < 0.0) {
    rcond = static_cast<double>(std::max(a.rows(), a.cols())) *
            std::numeric_limits<double>::epsilon();
  }
  Eigen::JacobiSVD<EigenRowMajor> svd(as_eigen(a),
                                      Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw NumericError("pinv: SVD did not converge on " + a.shape_str());
  const auto& sv = svd.singularValues();
  const double cutoff = rcond * (sv.size() ? sv(0) : 0.0);
  Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) inv_sv(i) = 1.0 / sv(i);
  Matrix out =
      from_eigen(svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose());
  check_finite(out, "pinv");
  return out;
}

}  // namespace dskd
