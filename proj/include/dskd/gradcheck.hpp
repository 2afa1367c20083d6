#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dskd/divergence.hpp"
#include "dskd/loss.hpp"
#include "dskd/matrix.hpp"
#include "dskd/rng.hpp"

namespace dskd {

struct GradCheckOptions {
  std::vector<Divergence> kinds = {Divergence::kl, Divergence::rkl, Divergence::skl,
                                   Divergence::srkl, Divergence::akl};
  std::size_t trials = 100;  // random instances per kind and pipeline
  double tau = 2.0;
  double h = 1e-5;  // central-difference step
  std::uint64_t seed = 12345;
};

struct GradCheckReport {
  double worst = 0.0;
  std::map<std::string, double> worst_by_case;  // "pipeline/kind/param" -> max rel err

  bool passed(double tol = 1e-4) const { return worst < tol; }
};

namespace detail {

inline double rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) /
         std::max({std::abs(analytic), std::abs(fd), 1e-6});
}

// Central finite differences of value() w.r.t. every entry of param,
// compared against the analytic gradient.
inline double fd_check(Matrix& param, const Matrix& analytic,
                       const std::function<double()>& value, double h) {
  double worst = 0.0;
  for (std::size_t i = 0; i < param.rows(); ++i) {
    for (std::size_t j = 0; j < param.cols(); ++j) {
      const double orig = param(i, j);
      param(i, j) = orig + h;
      const double fp = value();
      param(i, j) = orig - h;
      const double fm = value();
      param(i, j) = orig;
      worst = std::max(worst, rel_err(analytic(i, j), (fp - fm) / (2.0 * h)));
    }
  }
  return worst;
}

inline void record(GradCheckReport& rep, const std::string& key, double err) {
  auto& slot = rep.worst_by_case[key];
  slot = std::max(slot, err);
  rep.worst = std::max(rep.worst, err);
}

inline void check_divergence_kind(GradCheckReport& rep, const GradCheckOptions& opt,
                                  Divergence kind, Rng& rng) {
  DivergenceOptions dopt{kind};
  Matrix teacher = gaussian_matrix(rng, 4, 10);
  Matrix student = gaussian_matrix(rng, 4, 10);
  const TeacherDist td = teacher_dist_from_logits(teacher, opt.tau);
  auto res = divergence_vs_teacher(dopt, td, student, opt.tau);
  // The AKL fusion weight is a constant in the gradient; pin it in the
  // finite-difference target as well.
  const std::vector<double> w0 = res.akl_weights;
  double err = fd_check(
      student, res.grad_student_logits,
      [&] { return divergence_vs_teacher(dopt, td, student, opt.tau, {}, w0).value; },
      opt.h);
  record(rep, std::string("divergence/") + divergence_name(kind), err);
}

inline void check_vanilla(GradCheckReport& rep, const GradCheckOptions& opt,
                          Divergence kind, Rng& rng) {
  DivergenceOptions dopt{kind};
  const std::size_t n = 4, d = 3, big_d = 5, v = 12;
  ModelSpace teacher{gaussian_matrix(rng, n, big_d), gaussian_matrix(rng, big_d, v), {}};
  ModelSpace student{gaussian_matrix(rng, n, d), gaussian_matrix(rng, d, v), {}};
  auto rep0 = vanilla_kd_loss(teacher, student, dopt, opt.tau);
  const TeacherDist td =
      teacher_dist_from_logits(matmul(teacher.hidden, teacher.head), opt.tau);
  const std::vector<double> w0 =
      divergence_vs_teacher(dopt, td, matmul(student.hidden, student.head), opt.tau)
          .akl_weights;
  auto value = [&] {
    return divergence_vs_teacher(dopt, td, matmul(student.hidden, student.head),
                                 opt.tau, {}, w0)
        .value;
  };
  const std::string base = std::string("vanilla/") + divergence_name(kind);
  record(rep, base + "/student_hidden",
         fd_check(student.hidden, rep0.grads.at("student_hidden"), value, opt.h));
  record(rep, base + "/student_head",
         fd_check(student.head, rep0.grads.at("student_head"), value, opt.h));
}

inline void check_same_vocab(GradCheckReport& rep, const GradCheckOptions& opt,
                             Divergence kind, Rng& rng) {
  DivergenceOptions dopt{kind};
  const std::size_t n = 4, d = 3, big_d = 6, v = 14;
  ModelSpace teacher{gaussian_matrix(rng, n, big_d), gaussian_matrix(rng, big_d, v), {}};
  ModelSpace student{gaussian_matrix(rng, n, d), gaussian_matrix(rng, d, v), {}};
  ProjectorPair proj = make_projectors(teacher.head, student.head);
  std::vector<TokenId> top1(n);
  for (auto& t : top1) t = static_cast<TokenId>(rng.next_u64() % v);

  auto rep0 = dskd_same_vocab(teacher, student, proj, dopt, opt.tau, top1);

  // Frozen stop-grad quantities, captured at the base point.
  const Matrix ws0 = student.head;
  const TeacherDist p_t2s0 = teacher_dist_from_logits(
      matmul(matmul(teacher.hidden, proj.t2s), ws0), opt.tau);
  const Matrix wt_pinv = pinv(teacher.head);
  const TeacherDist p_tea =
      teacher_dist_from_logits(matmul(teacher.hidden, teacher.head), opt.tau);
  const std::vector<double> w_stu =
      divergence_vs_teacher(dopt, p_t2s0, matmul(student.hidden, student.head), opt.tau)
          .akl_weights;
  const std::vector<double> w_tea =
      divergence_vs_teacher(
          dopt, p_tea,
          matmul(matmul(student.hidden, matmul(student.head, wt_pinv)), teacher.head),
          opt.tau)
          .akl_weights;

  // The loss value as the analytic gradients see it: stop-gradded factors
  // (and the AKL fusion weights) held constant while the live parameters vary.
  auto value = [&] {
    Matrix stu_logits = matmul(student.hidden, student.head);
    double stu_kd =
        divergence_vs_teacher(dopt, p_t2s0, stu_logits, opt.tau, {}, w_stu).value;
    Matrix t2s_logits = matmul(matmul(teacher.hidden, proj.t2s), ws0);
    Matrix scratch;
    double ce = detail::ce_from_logits(t2s_logits, top1, scratch);
    Matrix s2t_logits =
        matmul(matmul(student.hidden, matmul(student.head, wt_pinv)), teacher.head);
    double tea_kd =
        divergence_vs_teacher(dopt, p_tea, s2t_logits, opt.tau, {}, w_tea).value;
    return stu_kd + ce + tea_kd;
  };

  const std::string base = std::string("dskd_same_vocab/") + divergence_name(kind);
  record(rep, base + "/student_hidden",
         fd_check(student.hidden, rep0.grads.at("student_hidden"), value, opt.h));
  record(rep, base + "/student_head",
         fd_check(student.head, rep0.grads.at("student_head"), value, opt.h));
  record(rep, base + "/t2s_projector",
         fd_check(proj.t2s, rep0.grads.at("t2s_projector"), value, opt.h));
}

inline void check_cross_vocab(GradCheckReport& rep, const GradCheckOptions& opt,
                              Divergence kind, Rng& rng) {
  DivergenceOptions dopt{kind};
  const std::size_t n = 6, m = 7, d = 3, big_d = 5;
  const std::size_t vs = 13, vt = 12, overlap = 9;
  VocabDescriptor stu_vocab, tea_vocab;
  for (std::size_t i = 0; i < vs; ++i) stu_vocab.tokens.push_back("t" + std::to_string(i));
  for (std::size_t i = 0; i < overlap; ++i) tea_vocab.tokens.push_back("t" + std::to_string(i));
  for (std::size_t i = overlap; i < vt; ++i) tea_vocab.tokens.push_back("u" + std::to_string(i));

  ModelSpace teacher{gaussian_matrix(rng, m, big_d), gaussian_matrix(rng, big_d, vt),
                     tea_vocab};
  ModelSpace student{gaussian_matrix(rng, n, d), gaussian_matrix(rng, d, vs), stu_vocab};
  ProjectorPair proj =
      make_projectors_cross(teacher.head, student.head,
                            vocab_intersection(stu_vocab, tea_vocab));

  AlignmentSet align;
  align.pairs = {{0, 1}, {2, 3}, {4, 5}, {5, 6}};
  std::vector<TokenId> top1(m);
  for (auto& t : top1) t = static_cast<TokenId>(rng.next_u64() % overlap);

  auto rep0 = dskd_cross_vocab(teacher, student, proj, align, dopt, opt.tau, top1);
  const std::size_t k = align.k();

  // Gather + freeze, mirroring the analytic stop-gradient routing.
  const auto stu_index = student.vocab.byte_index();
  Matrix ht_k(k, big_d);
  std::vector<TokenId> targets(k);
  std::vector<std::size_t> stu_rows(k);
  for (std::size_t r = 0; r < k; ++r) {
    const auto [i, j] = align.pairs[r];
    stu_rows[r] = i;
    for (std::size_t c = 0; c < big_d; ++c) ht_k(r, c) = teacher.hidden(j, c);
    targets[r] = stu_index.at(teacher.vocab.bytes_of(top1[j]));
  }
  const Matrix ws0 = student.head;
  const TeacherDist p_t2s0 =
      teacher_dist_from_logits(matmul(matmul(ht_k, proj.t2s), ws0), opt.tau);
  std::vector<double> mask0(k, 0.0);
  {
    Matrix t2s_logits = matmul(matmul(ht_k, proj.t2s), ws0);
    for (std::size_t r = 0; r < k; ++r) {
      Eigen::Index arg;
      Eigen::Map<const Eigen::ArrayXd>(t2s_logits.row(r),
                                       static_cast<Eigen::Index>(vs))
          .maxCoeff(&arg);
      if (arg == static_cast<Eigen::Index>(targets[r])) mask0[r] = 1.0;
    }
  }
  // Frozen shared-vocabulary column selection and pseudo-inverse, mirroring
  // the live s2t reconstruction inside the pipeline.
  const auto inter = vocab_intersection(stu_vocab, tea_vocab);
  std::vector<std::size_t> stu_cols;
  std::vector<std::size_t> tea_cols;
  for (const auto& [si, ti] : inter) {
    stu_cols.push_back(static_cast<std::size_t>(si));
    tea_cols.push_back(static_cast<std::size_t>(ti));
  }
  const Matrix wt_sub_pinv = pinv(select_columns(teacher.head, tea_cols));
  const TeacherDist p_tea_k =
      teacher_dist_from_logits(matmul(ht_k, teacher.head), opt.tau);

  auto gather_student = [&] {
    Matrix hs_k(k, d);
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < d; ++c) hs_k(r, c) = student.hidden(stu_rows[r], c);
    return hs_k;
  };

  const std::vector<double> w_stu =
      divergence_vs_teacher(dopt, p_t2s0, matmul(gather_student(), student.head),
                            opt.tau, mask0)
          .akl_weights;
  const std::vector<double> w_tea =
      divergence_vs_teacher(
          dopt, p_tea_k,
          matmul(matmul(gather_student(),
                        matmul(select_columns(student.head, stu_cols), wt_sub_pinv)),
                 teacher.head),
          opt.tau)
          .akl_weights;

  auto value = [&] {
    Matrix hs_k = gather_student();
    double stu_kd = divergence_vs_teacher(dopt, p_t2s0, matmul(hs_k, student.head),
                                          opt.tau, mask0, w_stu)
                        .value;
    Matrix t2s_logits = matmul(matmul(ht_k, proj.t2s), ws0);
    Matrix scratch;
    double ce = detail::ce_from_logits(t2s_logits, targets, scratch);
    Matrix s2t_logits =
        matmul(matmul(hs_k, matmul(select_columns(student.head, stu_cols), wt_sub_pinv)),
               teacher.head);
    double tea_kd =
        divergence_vs_teacher(dopt, p_tea_k, s2t_logits, opt.tau, {}, w_tea).value;
    return stu_kd + ce + tea_kd;
  };

  const std::string base = std::string("dskd_cross_vocab/") + divergence_name(kind);
  record(rep, base + "/student_hidden",
         fd_check(student.hidden, rep0.grads.at("student_hidden"), value, opt.h));
  record(rep, base + "/student_head",
         fd_check(student.head, rep0.grads.at("student_head"), value, opt.h));
  record(rep, base + "/t2s_projector",
         fd_check(proj.t2s, rep0.grads.at("t2s_projector"), value, opt.h));
}

}  // namespace detail

inline GradCheckReport run_gradcheck(const GradCheckOptions& opt) {
  GradCheckReport rep;
  Rng rng(opt.seed);
  for (Divergence kind : opt.kinds) {
    for (std::size_t t = 0; t < opt.trials; ++t) {
      detail::check_divergence_kind(rep, opt, kind, rng);
      detail::check_vanilla(rep, opt, kind, rng);
      detail::check_same_vocab(rep, opt, kind, rng);
      detail::check_cross_vocab(rep, opt, kind, rng);
    }
  }
  return rep;
}

}  // namespace dskd
