#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dskd/error.hpp"
#include "dskd/matrix.hpp"
#include "dskd/softmax.hpp"

namespace dskd {

enum class Divergence { kl, rkl, skl, srkl, akl };

inline const char* divergence_name(Divergence d) {
  switch (d) {
    case Divergence::kl: return "kl";
    case Divergence::rkl: return "rkl";
    case Divergence::skl: return "skl";
    case Divergence::srkl: return "srkl";
    case Divergence::akl: return "akl";
  }
  return "?";
}

inline Divergence divergence_from_name(const std::string& s) {
  if (s == "kl") return Divergence::kl;
  if (s == "rkl") return Divergence::rkl;
  if (s == "skl") return Divergence::skl;
  if (s == "srkl") return Divergence::srkl;
  if (s == "akl") return Divergence::akl;
  throw ParameterError("unknown divergence kind: " + s);
}

struct DivergenceOptions {
  Divergence kind = Divergence::kl;
  double lambda = 0.1;         // skew coefficient for skl/srkl
  double akl_head_mass = 0.5;  // teacher-mass split between head and tail

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw ParameterError("lambda must be in [0,1]");
    if (!(akl_head_mass > 0.0 && akl_head_mass < 1.0))
      throw ParameterError("akl_head_mass must be in (0,1)");
  }
};

struct DivergenceResult {
  double value = 0.0;
  Matrix grad_student_logits;  // same shape as the student logits
  std::vector<double> akl_weights;  // per-row fusion weight w (akl only)
};

// Teacher-side distribution, precomputed once when the teacher is frozen
// across many evaluations (e.g. the simulation loop).
struct TeacherDist {
  Matrix probs;
  Matrix log_probs;
};

inline TeacherDist teacher_dist_from_logits(const Matrix& logits, double tau) {
  detail::require_positive_tau(tau);
  TeacherDist t{Matrix(logits.rows(), logits.cols()),
                Matrix(logits.rows(), logits.cols())};
  const std::size_t v = logits.cols();
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    Eigen::Map<const Eigen::ArrayXd> x(logits.row(i), static_cast<Eigen::Index>(v));
    Eigen::Map<Eigen::ArrayXd> p(t.probs.row(i), static_cast<Eigen::Index>(v));
    Eigen::Map<Eigen::ArrayXd> lp(t.log_probs.row(i), static_cast<Eigen::Index>(v));
    const double m = x.maxCoeff() / tau;
    lp = x / tau - m;
    p = lp.exp();
    const double s = p.sum();
    p /= s;
    lp -= std::log(s);
  }
  return t;
}

namespace detail {

constexpr double kProbFloor = 1e-12;  // clamp inside logarithms

// AKL head/tail gap weight for one position. The head is the smallest
// prefix of the vocabulary, ordered by descending teacher probability,
// whose cumulative mass reaches head_mass. Selection is O(V) expected
// via a doubling nth_element instead of a full sort.
inline double akl_weight(const double* p, const double* q, std::size_t v,
                         double head_mass, std::vector<std::size_t>& idx) {
  idx.resize(v);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto desc = [&](std::size_t a, std::size_t b) {
    return p[a] != p[b] ? p[a] > p[b] : a < b;
  };
  std::size_t k = std::min<std::size_t>(v, 16);
  for (;;) {
    if (k < v) std::nth_element(idx.begin(), idx.begin() + k, idx.end(), desc);
    double mass = 0.0;
    for (std::size_t t = 0; t < k; ++t) mass += p[idx[t]];
    if (mass >= head_mass || k == v) break;
    k = std::min(v, k * 2);
  }
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), desc);
  double cum = 0.0;
  std::size_t head_end = k;
  for (std::size_t t = 0; t < k; ++t) {
    cum += p[idx[t]];
    if (cum >= head_mass) {
      head_end = t + 1;
      break;
    }
  }
  double g_head = 0.0;
  for (std::size_t t = 0; t < head_end; ++t)
    g_head += std::abs(p[idx[t]] - q[idx[t]]);
  double g_total = 0.0;
  for (std::size_t j = 0; j < v; ++j) g_total += std::abs(p[j] - q[j]);
  const double g_tail = g_total - g_head;
  if (g_head < kProbFloor && g_tail < kProbFloor) return 0.5;
  return g_head / (g_head + g_tail);
}

}  // namespace detail

// Mean per-position divergence D(p || q) with q = softmax(student/tau),
// plus the analytic gradient w.r.t. the student logits (teacher constant).
// row_weights, when given, scale each position's contribution; the mean
// is always taken over the number of rows.
// fixed_akl_weights, when non-empty, bypasses the head/tail gap computation
// and uses the given per-row fusion weights (the weight is a constant in
// the gradient, so oracles need to pin it).
inline DivergenceResult divergence_vs_teacher(
    const DivergenceOptions& opt, const TeacherDist& teacher,
    const Matrix& student_logits, double tau,
    std::span<const double> row_weights = {},
    std::span<const double> fixed_akl_weights = {}) {
  opt.validate();
  detail::require_positive_tau(tau);
  const std::size_t n = student_logits.rows();
  const std::size_t v = student_logits.cols();
  if (teacher.probs.rows() != n || teacher.probs.cols() != v)
    throw DimensionError("divergence: teacher " + teacher.probs.shape_str() +
                         " vs student " + student_logits.shape_str());
  if (!row_weights.empty() && row_weights.size() != n)
    throw DimensionError("divergence: row_weights length mismatch");

  if (!fixed_akl_weights.empty() && fixed_akl_weights.size() != n)
    throw DimensionError("divergence: fixed_akl_weights length mismatch");

  DivergenceResult res;
  res.grad_student_logits = Matrix(n, v);
  if (opt.kind == Divergence::akl) res.akl_weights.assign(n, 0.5);
  if (n == 0) return res;

  const double lam = opt.lambda;
  const double floor = detail::kProbFloor;
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::ArrayXd q(v), lq(v), g(v);
  std::vector<std::size_t> idx;

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w_row = row_weights.empty() ? 1.0 : row_weights[i];
    Eigen::Map<Eigen::ArrayXd> gz(res.grad_student_logits.row(i),
                                  static_cast<Eigen::Index>(v));
    if (w_row == 0.0) {
      gz.setZero();
      continue;
    }
    Eigen::Map<const Eigen::ArrayXd> z(student_logits.row(i),
                                       static_cast<Eigen::Index>(v));
    Eigen::Map<const Eigen::ArrayXd> p(teacher.probs.row(i),
                                       static_cast<Eigen::Index>(v));
    Eigen::Map<const Eigen::ArrayXd> lp(teacher.log_probs.row(i),
                                        static_cast<Eigen::Index>(v));
    // One shifted-exp pass yields both q and log q.
    const double m = z.maxCoeff() / tau;
    lq = z / tau - m;
    q = lq.exp();
    const double s = q.sum();
    q /= s;
    lq -= std::log(s);

    const double scale = w_row * inv_n / tau;
    double row_val = 0.0;
    switch (opt.kind) {
      case Divergence::kl: {
        row_val = (p * (lp.max(std::log(floor)) - lq.max(std::log(floor)))).sum();
        gz = scale * (q - p);
        break;
      }
      case Divergence::rkl: {
        g = lq.max(std::log(floor)) - lp.max(std::log(floor));
        row_val = (q * g).sum();
        g += 1.0;
        gz = scale * q * (g - (g * q).sum());
        break;
      }
      case Divergence::skl: {
        // D(p || lam*p + (1-lam)*q)
        g = (lam * p + (1.0 - lam) * q).max(floor);  // mixture
        row_val = (p * (lp.max(std::log(floor)) - g.log())).sum();
        g = -(1.0 - lam) * p / g;
        gz = scale * q * (g - (g * q).sum());
        break;
      }
      case Divergence::srkl: {
        // D(q || lam*q + (1-lam)*p)
        Eigen::ArrayXd mix = (lam * q + (1.0 - lam) * p).max(floor);
        g = lq.max(std::log(floor)) - mix.log();
        row_val = (q * g).sum();
        g += 1.0 - lam * q / mix;
        gz = scale * q * (g - (g * q).sum());
        break;
      }
      case Divergence::akl: {
        const double w =
            fixed_akl_weights.empty()
                ? detail::akl_weight(p.data(), q.data(), v, opt.akl_head_mass, idx)
                : fixed_akl_weights[i];
        res.akl_weights[i] = w;
        const double kl_val =
            (p * (lp.max(std::log(floor)) - lq.max(std::log(floor)))).sum();
        g = lq.max(std::log(floor)) - lp.max(std::log(floor));
        const double rkl_val = (q * g).sum();
        row_val = w * kl_val + (1.0 - w) * rkl_val;
        g += 1.0;  // now the RKL dD/dq
        gz = scale * (w * (q - p) + (1.0 - w) * q * (g - (g * q).sum()));
        break;
      }
    }
    total += w_row * row_val;
    if (!std::isfinite(total))
      throw NumericError("divergence: non-finite value at row " + std::to_string(i));
  }
  res.value = total * inv_n;
  return res;
}

inline DivergenceResult divergence(const DivergenceOptions& opt,
                                   const Matrix& teacher_logits,
                                   const Matrix& student_logits, double tau) {
  if (teacher_logits.rows() != student_logits.rows() ||
      teacher_logits.cols() != student_logits.cols())
    throw DimensionError("divergence: teacher " + teacher_logits.shape_str() +
                         " vs student " + student_logits.shape_str());
  return divergence_vs_teacher(opt, teacher_dist_from_logits(teacher_logits, tau),
                               student_logits, tau);
}

}  // namespace dskd
