#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "dskd/divergence.hpp"
#include "dskd/error.hpp"
#include "dskd/eta.hpp"
#include "dskd/matrix.hpp"
#include "dskd/pinv.hpp"
#include "dskd/projector.hpp"
#include "dskd/softmax.hpp"
#include "dskd/vocab.hpp"

namespace dskd {

// Output hidden states, prediction head, and vocabulary of one model.
struct ModelSpace {
  Matrix hidden;  // positions x hidden size
  Matrix head;    // hidden size x |V|
  VocabDescriptor vocab;

  std::size_t positions() const { return hidden.rows(); }
  std::size_t hidden_size() const { return hidden.cols(); }
  std::size_t vocab_size() const { return head.cols(); }

  void validate() const {
    if (hidden.cols() != head.rows())
      throw DimensionError("ModelSpace: hidden " + hidden.shape_str() +
                           " incompatible with head " + head.shape_str());
    if (!vocab.tokens.empty() && vocab.size() != head.cols())
      throw DimensionError("ModelSpace: vocab size " + std::to_string(vocab.size()) +
                           " != head columns " + std::to_string(head.cols()));
  }
};

// Synthesizes a vocabulary whose byte strings are the decimal ids, for
// same-vocabulary pipelines where surface forms are irrelevant.
inline VocabDescriptor numeric_vocab(std::size_t size) {
  VocabDescriptor v;
  v.tokens.reserve(size);
  for (std::size_t i = 0; i < size; ++i) v.tokens.push_back(std::to_string(i));
  return v;
}

struct LossReport {
  double l_stu_kd = 0.0;
  double l_t2s_ce = 0.0;
  double l_tea_kd = 0.0;
  double l_ce = 0.0;
  double total = 0.0;
  std::map<std::string, Matrix> grads;  // student_hidden, student_head, t2s_projector
  std::size_t aligned_count = 0;
  std::size_t mask_hits = 0;
  bool degenerate = false;  // cross-vocab case with K == 0
};

// Optional term weights for the DSKD total; the reference formulation
// sums the three terms with unit coefficients.
struct DskdWeights {
  double stu_kd = 1.0;
  double t2s_ce = 1.0;
  double tea_kd = 1.0;
};

struct CeResult {
  double value = 0.0;
  Matrix grad_hidden;
  Matrix grad_head;
};

namespace detail {

// Mean cross-entropy of softmax(logits) against target ids, with the
// gradient w.r.t. the logits: (softmax - onehot) / n.
inline double ce_from_logits(const Matrix& logits, std::span<const TokenId> targets,
                             Matrix& grad_logits) {
  const std::size_t n = logits.rows(), v = logits.cols();
  if (targets.size() != n)
    throw DimensionError("ce: targets length " + std::to_string(targets.size()) +
                         " != positions " + std::to_string(n));
  grad_logits = log_softmax_rows(logits, 1.0);
  double total = 0.0;
  const double inv_n = n ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const TokenId t = targets[i];
    if (t < 0 || static_cast<std::size_t>(t) >= v)
      throw InputError("ce: target id " + std::to_string(t) + " out of vocab of size " +
                       std::to_string(v));
    double* g = grad_logits.row(i);
    total -= g[t];
    Eigen::Map<Eigen::ArrayXd> gm(g, static_cast<Eigen::Index>(v));
    gm = gm.exp() * inv_n;
    g[t] -= inv_n;
  }
  return total * inv_n;
}

inline void accumulate(Matrix& acc, const Matrix& m) {
  if (acc.empty())
    acc = m;
  else
    as_eigen(acc) += as_eigen(m);
}

}  // namespace detail

// Causal LM cross-entropy of the student on target ids, with analytic
// gradients to the hidden states and the head.
inline CeResult ce_loss(const ModelSpace& student, std::span<const TokenId> targets) {
  student.validate();
  CeResult res;
  Matrix grad_logits;
  res.value = detail::ce_from_logits(matmul(student.hidden, student.head), targets,
                                     grad_logits);
  res.grad_hidden = matmul(grad_logits, transpose(student.head));
  res.grad_head = matmul(transpose(student.hidden), grad_logits);
  return res;
}

// Vanilla same-vocabulary KD: D(softmax(Ht Wt / tau) || softmax(Hs Ws / tau)),
// teacher frozen.
inline LossReport vanilla_kd_loss(const ModelSpace& teacher, const ModelSpace& student,
                                  const DivergenceOptions& opt, double tau) {
  teacher.validate();
  student.validate();
  if (teacher.vocab_size() != student.vocab_size())
    throw DimensionError(
        "vanilla_kd_loss: vocabulary sizes differ; use the cross-vocab pipeline");
  if (teacher.positions() != student.positions())
    throw DimensionError("vanilla_kd_loss: position counts differ");

  LossReport rep;
  auto d = divergence(opt, matmul(teacher.hidden, teacher.head),
                      matmul(student.hidden, student.head), tau);
  rep.l_stu_kd = d.value;
  rep.total = d.value;
  rep.grads["student_hidden"] = matmul(d.grad_student_logits, transpose(student.head));
  rep.grads["student_head"] =
      matmul(transpose(student.hidden), d.grad_student_logits);
  return rep;
}

// Same-vocabulary DSKD. Gradient routing:
//   l_t2s_ce  -> t2s projector only (student head stop-gradded, teacher frozen)
//   l_stu_kd  -> student hidden + head (projected teacher distribution stop-gradded)
//   l_tea_kd  -> student hidden + head (the latter through the live s2t projector)
inline LossReport dskd_same_vocab(const ModelSpace& teacher, const ModelSpace& student,
                                  const ProjectorPair& projectors,
                                  const DivergenceOptions& opt, double tau,
                                  std::span<const TokenId> teacher_top1,
                                  const DskdWeights& weights = {}) {
  teacher.validate();
  student.validate();
  if (teacher.vocab_size() != student.vocab_size())
    throw DimensionError(
        "dskd_same_vocab: vocabulary sizes differ; use the cross-vocab pipeline");
  if (teacher.positions() != student.positions())
    throw DimensionError("dskd_same_vocab: position counts differ");
  if (projectors.t2s.rows() != teacher.hidden_size() ||
      projectors.t2s.cols() != student.hidden_size())
    throw DimensionError("dskd_same_vocab: t2s projector shape " +
                         projectors.t2s.shape_str() + " inconsistent");

  LossReport rep;
  const Matrix& hs = student.hidden;
  const Matrix& ws = student.head;

  // Student space: projected teacher distribution through the student head.
  Matrix ht_proj = matmul(teacher.hidden, projectors.t2s);  // n x d
  Matrix t2s_logits = matmul(ht_proj, ws);                  // n x |V|
  Matrix grad_t2s_logits;
  rep.l_t2s_ce = detail::ce_from_logits(t2s_logits, teacher_top1, grad_t2s_logits);
  rep.grads["t2s_projector"] = from_eigen(
      weights.t2s_ce *
      (as_eigen(teacher.hidden).transpose() * (as_eigen(grad_t2s_logits) * as_eigen(ws).transpose())));

  Matrix student_logits = matmul(hs, ws);
  auto stu_kd = divergence(opt, t2s_logits, student_logits, tau);
  rep.l_stu_kd = stu_kd.value;

  // Teacher space: s2t projector recomputed live from the current W^s.
  Matrix wt_pinv = pinv(teacher.head);          // |V| x D
  Matrix s2t = matmul(ws, wt_pinv);             // d x D
  Matrix s2t_logits = matmul(matmul(hs, s2t), teacher.head);  // n x |V|
  auto tea_kd = divergence(opt, matmul(teacher.hidden, teacher.head), s2t_logits, tau);
  rep.l_tea_kd = tea_kd.value;

  // Backprop the two KD terms into the student parameters.
  Matrix proj_head = matmul(s2t, teacher.head);  // d x |V|
  rep.grads["student_hidden"] = from_eigen(
      weights.stu_kd * (as_eigen(stu_kd.grad_student_logits) * as_eigen(ws).transpose()) +
      weights.tea_kd *
          (as_eigen(tea_kd.grad_student_logits) * as_eigen(proj_head).transpose()));
  // d l_tea_kd / d W^s = Hs^T dZ (Wt^+ Wt)^T
  rep.grads["student_head"] = from_eigen(
      weights.stu_kd * (as_eigen(hs).transpose() * as_eigen(stu_kd.grad_student_logits)) +
      weights.tea_kd * (as_eigen(hs).transpose() *
                        ((as_eigen(tea_kd.grad_student_logits) *
                          as_eigen(teacher.head).transpose()) *
                         as_eigen(wt_pinv).transpose())));

  rep.total = weights.stu_kd * rep.l_stu_kd + weights.t2s_ce * rep.l_t2s_ce +
              weights.tea_kd * rep.l_tea_kd;
  return rep;
}

// Cross-vocabulary DSKD over an ETA alignment set. teacher_top1 ids are in
// the teacher vocabulary and are translated to student ids by byte string;
// ETA's membership test guarantees the translation exists.
inline LossReport dskd_cross_vocab(const ModelSpace& teacher, const ModelSpace& student,
                                   const ProjectorPair& projectors,
                                   const AlignmentSet& alignment,
                                   const DivergenceOptions& opt, double tau,
                                   std::span<const TokenId> teacher_top1,
                                   const DskdWeights& weights = {}) {
  teacher.validate();
  student.validate();
  if (student.vocab.tokens.empty() || teacher.vocab.tokens.empty())
    throw ConfigError("dskd_cross_vocab: both models need vocabulary descriptors");
  const std::size_t k = alignment.k();
  LossReport rep;
  rep.aligned_count = k;
  rep.grads["student_hidden"] = Matrix(student.hidden.rows(), student.hidden.cols());
  rep.grads["student_head"] = Matrix(student.head.rows(), student.head.cols());
  rep.grads["t2s_projector"] = Matrix(projectors.t2s.rows(), projectors.t2s.cols());
  if (k == 0) {
    rep.degenerate = true;
    return rep;
  }

  const auto stu_index = student.vocab.byte_index();
  const Matrix& ws = student.head;

  // Gather aligned rows: teacher hiddens at j, student hiddens at i.
  Matrix ht_k(k, teacher.hidden_size());
  Matrix hs_k(k, student.hidden_size());
  std::vector<TokenId> targets(k);
  for (std::size_t r = 0; r < k; ++r) {
    const auto [i, j] = alignment.pairs[r];
    if (i >= student.positions() || j >= teacher.positions())
      throw InputError("dskd_cross_vocab: alignment pair out of range");
    for (std::size_t c = 0; c < teacher.hidden_size(); ++c)
      ht_k(r, c) = teacher.hidden(j, c);
    for (std::size_t c = 0; c < student.hidden_size(); ++c)
      hs_k(r, c) = student.hidden(i, c);
    if (j >= teacher_top1.size())
      throw InputError("dskd_cross_vocab: teacher_top1 shorter than teacher sequence");
    const std::string& bytes = teacher.vocab.bytes_of(teacher_top1[j]);
    auto it = stu_index.find(bytes);
    if (it == stu_index.end())
      throw NumericError(
          "dskd_cross_vocab: teacher top-1 token absent from student vocabulary at an "
          "aligned position (violates ETA's membership guarantee)");
    targets[r] = it->second;
  }

  // Student space, Eq.-style: CE over aligned pairs plus masked KD.
  Matrix t2s_logits = matmul(matmul(ht_k, projectors.t2s), ws);  // K x |Vs|
  Matrix grad_t2s_logits;
  rep.l_t2s_ce = detail::ce_from_logits(t2s_logits, targets, grad_t2s_logits);
  Matrix g_t2s = from_eigen(
      weights.t2s_ce * (as_eigen(ht_k).transpose() *
                        (as_eigen(grad_t2s_logits) * as_eigen(ws).transpose())));
  detail::accumulate(rep.grads["t2s_projector"], g_t2s);

  std::vector<double> mask(k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    Eigen::Index arg;
    Eigen::Map<const Eigen::ArrayXd>(t2s_logits.row(r),
                                     static_cast<Eigen::Index>(t2s_logits.cols()))
        .maxCoeff(&arg);
    if (arg == static_cast<Eigen::Index>(targets[r])) {
      mask[r] = 1.0;
      ++rep.mask_hits;
    }
  }

  Matrix stu_logits_k = matmul(hs_k, ws);
  auto stu_kd = divergence_vs_teacher(opt, teacher_dist_from_logits(t2s_logits, tau),
                                      stu_logits_k, tau, mask);
  rep.l_stu_kd = stu_kd.value;

  // Teacher space over aligned pairs, in the teacher vocabulary. The live
  // s2t projector is rebuilt from the heads restricted to the shared
  // vocabulary columns (the vocabularies generally differ in size).
  const auto inter = vocab_intersection(student.vocab, teacher.vocab);
  detail::require_nonempty_intersection(inter.size());
  std::vector<std::size_t> stu_cols, tea_cols;
  stu_cols.reserve(inter.size());
  tea_cols.reserve(inter.size());
  for (const auto& [si, ti] : inter) {
    stu_cols.push_back(static_cast<std::size_t>(si));
    tea_cols.push_back(static_cast<std::size_t>(ti));
  }
  Matrix ws_sub = detail::select_columns(ws, stu_cols);            // d x m
  Matrix wt_sub_pinv = pinv(detail::select_columns(teacher.head, tea_cols));  // m x D
  Matrix s2t = matmul(ws_sub, wt_sub_pinv);                        // d x D
  Matrix s2t_logits = matmul(matmul(hs_k, s2t), teacher.head);     // K x |Vt|
  auto tea_kd = divergence(opt, matmul(ht_k, teacher.head), s2t_logits, tau);
  rep.l_tea_kd = tea_kd.value;

  // Scatter gathered-row gradients back to the full student tensors.
  Matrix proj_head = matmul(s2t, teacher.head);  // d x |Vt|
  Matrix gh_k = from_eigen(
      weights.stu_kd * (as_eigen(stu_kd.grad_student_logits) * as_eigen(ws).transpose()) +
      weights.tea_kd *
          (as_eigen(tea_kd.grad_student_logits) * as_eigen(proj_head).transpose()));
  Matrix& gh = rep.grads["student_hidden"];
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = alignment.pairs[r].first;
    for (std::size_t c = 0; c < student.hidden_size(); ++c) gh(i, c) += gh_k(r, c);
  }
  Matrix g_head = from_eigen(
      weights.stu_kd * (as_eigen(hs_k).transpose() * as_eigen(stu_kd.grad_student_logits)));
  // d l_tea_kd / d W^s touches only the shared-vocabulary columns:
  // scatter Hs_k^T dZ Wt^T (Wt_sub^+)^T into them.
  Matrix g_head_sub = from_eigen(
      weights.tea_kd * (as_eigen(hs_k).transpose() *
                        ((as_eigen(tea_kd.grad_student_logits) *
                          as_eigen(teacher.head).transpose()) *
                         as_eigen(wt_sub_pinv).transpose())));
  for (std::size_t c = 0; c < stu_cols.size(); ++c)
    for (std::size_t r = 0; r < g_head.rows(); ++r)
      g_head(r, stu_cols[c]) += g_head_sub(r, c);
  detail::accumulate(rep.grads["student_head"], g_head);

  rep.total = weights.stu_kd * rep.l_stu_kd + weights.t2s_ce * rep.l_t2s_ce +
              weights.tea_kd * rep.l_tea_kd;
  return rep;
}

// Overall training loss: kd_rate * kd_total + (1 - kd_rate) * ce.
inline double combined_training_loss(double kd_total, double ce, double kd_rate = 0.5) {
  if (!(kd_rate >= 0.0 && kd_rate <= 1.0))
    throw ParameterError("kd_rate must be in [0,1]");
  return kd_rate * kd_total + (1.0 - kd_rate) * ce;
}

inline double combined_training_loss(const LossReport& report, double ce,
                                     double kd_rate = 0.5) {
  return combined_training_loss(report.total, ce, kd_rate);
}

}  // namespace dskd
