#pragma once

#include <atomic>
#include <cmath>
#include <mutex>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "dskd/divergence.hpp"
#include "dskd/error.hpp"
#include "dskd/matrix.hpp"
#include "dskd/rng.hpp"

namespace dskd {

enum class HeadMode { shared, different };

inline const char* head_mode_name(HeadMode m) {
  return m == HeadMode::shared ? "shared" : "different";
}

inline HeadMode head_mode_from_name(const std::string& s) {
  if (s == "shared") return HeadMode::shared;
  if (s == "different") return HeadMode::different;
  throw ParameterError("unknown head mode: " + s);
}

// Shared-head vs. different-head KD on synthetic 2-D hidden states.
// Teacher hiddens ~ N(0, 2), student hiddens ~ N(3, 1), heads ~ N(0, 1)
// over 10000 classes; plain SGD on the student hiddens and head.
struct SimConfig {
  std::size_t n_points = 100;
  std::size_t hidden_dim = 2;
  std::size_t n_classes = 10000;
  double teacher_mean = 0.0, teacher_std = 2.0;
  double student_mean = 3.0, student_std = 1.0;
  std::size_t iterations = 1000;
  std::size_t repeats = 100;
  DivergenceOptions divergence;
  double learning_rate = 0.0;  // <= 0 selects the per-divergence default
  HeadMode head_mode = HeadMode::different;
  std::uint64_t seed = 0;
  unsigned threads = 1;  // 0 = hardware concurrency; repeats run independently

  void validate() const {
    if (n_points == 0 || hidden_dim == 0 || n_classes == 0 || repeats == 0)
      throw ConfigError("sim: counts must be positive");
    divergence.validate();
    const double lr = effective_learning_rate();
    if (!(lr > 0.0 && lr <= 100.0))
      throw ConfigError("sim: learning rate must be in (0, 100]");
  }

  double effective_learning_rate() const;
};

// Per-divergence defaults from a coarse sweep over {1, 2, 5, 10, 20, 40}
// at the default problem size: the largest swept rate whose loss still
// decreases stably in both head modes. Reverse KL destabilizes early
// (the different-head run blows past its start at lr >= 5), hence its
// much smaller default.
inline double default_learning_rate(Divergence kind) {
  switch (kind) {
    case Divergence::kl: return 20.0;
    case Divergence::rkl: return 2.0;
    case Divergence::skl: return 20.0;
    case Divergence::srkl: return 20.0;
    case Divergence::akl: return 20.0;
  }
  return 10.0;
}

inline double SimConfig::effective_learning_rate() const {
  return learning_rate > 0.0 ? learning_rate : default_learning_rate(divergence.kind);
}

struct SimResult {
  std::vector<double> loss_curve;  // per iteration, averaged over repeats
  Matrix student_hidden_before;    // snapshots from the first repeat
  Matrix student_hidden_after;
  Matrix teacher_hidden;
  SimConfig config;
};

namespace detail {

struct RepeatOutput {
  std::vector<double> curve;
  Matrix student_before, student_after, teacher_hidden;
};

inline RepeatOutput run_sim_repeat(const SimConfig& cfg, std::size_t repeat_index,
                                   bool keep_snapshots) {
  Rng rng(cfg.seed + repeat_index);
  const double lr = cfg.effective_learning_rate();
  const double tau = 1.0;

  // Draw order mirrors the reference pseudo-code; in shared mode the
  // teacher head is unused and not drawn.
  Matrix teacher_hidden =
      gaussian_matrix(rng, cfg.n_points, cfg.hidden_dim, cfg.teacher_mean, cfg.teacher_std);
  Matrix teacher_head;  // n_classes x hidden_dim
  if (cfg.head_mode == HeadMode::different)
    teacher_head = gaussian_matrix(rng, cfg.n_classes, cfg.hidden_dim, 0.0, 1.0);
  Matrix student_hidden =
      gaussian_matrix(rng, cfg.n_points, cfg.hidden_dim, cfg.student_mean, cfg.student_std);
  Matrix student_head = gaussian_matrix(rng, cfg.n_classes, cfg.hidden_dim, 0.0, 1.0);

  RepeatOutput out;
  out.curve.resize(cfg.iterations);
  if (keep_snapshots) {
    out.student_before = student_hidden;
    out.teacher_hidden = teacher_hidden;
  }

  TeacherDist teacher_fixed;
  if (cfg.head_mode == HeadMode::different)
    teacher_fixed = teacher_dist_from_logits(
        matmul(teacher_hidden, transpose(teacher_head)), tau);

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Matrix student_logits = matmul(student_hidden, transpose(student_head));
    DivergenceResult d;
    if (cfg.head_mode == HeadMode::different) {
      d = divergence_vs_teacher(cfg.divergence, teacher_fixed, student_logits, tau);
    } else {
      TeacherDist td = teacher_dist_from_logits(
          matmul(teacher_hidden, transpose(student_head)), tau);
      d = divergence_vs_teacher(cfg.divergence, td, student_logits, tau);
    }
    if (!std::isfinite(d.value))
      throw NumericError("sim: loss diverged at repeat " + std::to_string(repeat_index) +
                         ", iteration " + std::to_string(it) + ", lr " +
                         std::to_string(lr));
    out.curve[it] = d.value;

    // SGD step on the student hiddens and head; the teacher-side
    // distribution is treated as constant in both modes.
    auto dz = as_eigen(d.grad_student_logits);
    EigenRowMajor g_hidden = dz * as_eigen(student_head);
    EigenRowMajor g_head = dz.transpose() * as_eigen(student_hidden);
    as_eigen(student_hidden) -= lr * g_hidden;
    as_eigen(student_head) -= lr * g_head;
  }

  if (keep_snapshots) out.student_after = student_hidden;
  return out;
}

}  // namespace detail

inline SimResult run_sim(const SimConfig& cfg) {
  cfg.validate();
  SimResult res;
  res.config = cfg;
  res.loss_curve.assign(cfg.iterations, 0.0);

  unsigned threads = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, cfg.repeats));

  std::vector<detail::RepeatOutput> outputs(cfg.repeats);
  if (threads == 1) {
    for (std::size_t r = 0; r < cfg.repeats; ++r)
      outputs[r] = detail::run_sim_repeat(cfg, r, r == 0);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t r = next.fetch_add(1);
          if (r >= cfg.repeats) return;
          try {
            outputs[r] = detail::run_sim_repeat(cfg, r, r == 0);
          } catch (...) {
            std::lock_guard<std::mutex> lk(error_mu);
            if (!error) error = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  }

  // Fixed-order summation keeps the averaged curve deterministic
  // regardless of the thread count.
  for (std::size_t r = 0; r < cfg.repeats; ++r)
    for (std::size_t it = 0; it < cfg.iterations; ++it)
      res.loss_curve[it] += outputs[r].curve[it];
  const double inv = 1.0 / static_cast<double>(cfg.repeats);
  for (double& v : res.loss_curve) v *= inv;

  res.student_hidden_before = std::move(outputs[0].student_before);
  res.student_hidden_after = std::move(outputs[0].student_after);
  res.teacher_hidden = std::move(outputs[0].teacher_hidden);
  return res;
}

}  // namespace dskd
