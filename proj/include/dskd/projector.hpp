#pragma once

#include <utility>
#include <vector>

#include "dskd/error.hpp"
#include "dskd/matrix.hpp"
#include "dskd/pinv.hpp"
#include "dskd/vocab.hpp"

namespace dskd {

// Cross-space projectors. t2s (D x d) is a trainable parameter after
// initialization; s2t (d x D) carries no parameters of its own and is
// recomputed from the live student head during training.
struct ProjectorPair {
  Matrix t2s;
  Matrix s2t;
  bool t2s_trainable = true;
  bool s2t_trainable = false;
};

// W^{t->s} = W^t (W^s)^+ : Frobenius-optimal X for min ||X W^s - W^t||_F.
inline Matrix init_t2s(const Matrix& teacher_head, const Matrix& student_head) {
  if (teacher_head.cols() != student_head.cols())
    throw DimensionError("init_t2s: vocab dims differ, teacher " +
                         teacher_head.shape_str() + " vs student " +
                         student_head.shape_str());
  return matmul(teacher_head, pinv(student_head));
}

// W^{s->t} = W^s (W^t)^+ : Frobenius-optimal X for min ||X W^t - W^s||_F.
inline Matrix init_s2t(const Matrix& student_head, const Matrix& teacher_head) {
  if (teacher_head.cols() != student_head.cols())
    throw DimensionError("init_s2t: vocab dims differ, teacher " +
                         teacher_head.shape_str() + " vs student " +
                         student_head.shape_str());
  return matmul(student_head, pinv(teacher_head));
}

namespace detail {

inline Matrix select_columns(const Matrix& m, const std::vector<std::size_t>& cols) {
  Matrix out(m.rows(), cols.size());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t k = 0; k < cols.size(); ++k) out(i, k) = m(i, cols[k]);
  return out;
}

inline void require_nonempty_intersection(std::size_t n) {
  if (n == 0)
    throw ConfigError("no shared vocabulary; cross-vocab DSKD undefined");
}

}  // namespace detail

// Cross-vocabulary variants: slice both heads to the intersection columns
// before the pseudo-inverse construction.
inline Matrix init_t2s_cross(const Matrix& teacher_head, const Matrix& student_head,
                             const std::vector<std::pair<TokenId, TokenId>>& intersection) {
  detail::require_nonempty_intersection(intersection.size());
  std::vector<std::size_t> stu_cols, tea_cols;
  stu_cols.reserve(intersection.size());
  tea_cols.reserve(intersection.size());
  for (const auto& [si, ti] : intersection) {
    stu_cols.push_back(static_cast<std::size_t>(si));
    tea_cols.push_back(static_cast<std::size_t>(ti));
  }
  return matmul(detail::select_columns(teacher_head, tea_cols),
                pinv(detail::select_columns(student_head, stu_cols)));
}

inline Matrix init_s2t_cross(const Matrix& student_head, const Matrix& teacher_head,
                             const std::vector<std::pair<TokenId, TokenId>>& intersection) {
  detail::require_nonempty_intersection(intersection.size());
  std::vector<std::size_t> stu_cols, tea_cols;
  stu_cols.reserve(intersection.size());
  tea_cols.reserve(intersection.size());
  for (const auto& [si, ti] : intersection) {
    stu_cols.push_back(static_cast<std::size_t>(si));
    tea_cols.push_back(static_cast<std::size_t>(ti));
  }
  return matmul(detail::select_columns(student_head, stu_cols),
                pinv(detail::select_columns(teacher_head, tea_cols)));
}

inline ProjectorPair make_projectors(const Matrix& teacher_head,
                                     const Matrix& student_head) {
  return {init_t2s(teacher_head, student_head), init_s2t(student_head, teacher_head)};
}

inline ProjectorPair make_projectors_cross(
    const Matrix& teacher_head, const Matrix& student_head,
    const std::vector<std::pair<TokenId, TokenId>>& intersection) {
  return {init_t2s_cross(teacher_head, student_head, intersection),
          init_s2t_cross(student_head, teacher_head, intersection)};
}

}  // namespace dskd
