#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "dskd/error.hpp"
#include "dskd/matrix.hpp"

namespace dskd {

namespace detail {

inline void require_positive_tau(double tau) {
  if (!(tau > 0.0)) throw ParameterError("temperature tau must be > 0");
}

// Writes softmax(row/tau) into out (may alias row) and returns
// logsumexp(row/tau) after the max shift, i.e. out = exp(row/tau - max - lse).
inline double softmax_row(const double* row, double* out, std::size_t n, double tau) {
  Eigen::Map<const Eigen::ArrayXd> x(row, static_cast<Eigen::Index>(n));
  Eigen::Map<Eigen::ArrayXd> y(out, static_cast<Eigen::Index>(n));
  const double m = x.maxCoeff() / tau;
  y = (x / tau - m).exp();
  const double s = y.sum();
  y /= s;
  return m + std::log(s);
}

inline void log_softmax_row(const double* row, double* out, std::size_t n, double tau) {
  Eigen::Map<const Eigen::ArrayXd> x(row, static_cast<Eigen::Index>(n));
  Eigen::Map<Eigen::ArrayXd> y(out, static_cast<Eigen::Index>(n));
  const double m = x.maxCoeff() / tau;
  y = x / tau - m;
  const double lse = std::log(y.exp().sum());
  y -= lse;
}

}  // namespace detail

inline Matrix softmax_rows(const Matrix& logits, double tau = 1.0) {
  detail::require_positive_tau(tau);
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i)
    detail::softmax_row(logits.row(i), out.row(i), logits.cols(), tau);
  return out;
}

inline Matrix log_softmax_rows(const Matrix& logits, double tau = 1.0) {
  detail::require_positive_tau(tau);
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i)
    detail::log_softmax_row(logits.row(i), out.row(i), logits.cols(), tau);
  return out;
}

}  // namespace dskd
