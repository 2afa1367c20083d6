// dskd: dual-space knowledge distillation laboratory CLI.
//
// Subcommands: simulate, align, loss, gradcheck, structure.
// Exit codes: 0 ok, 1 bad config/input, 2 I/O failure, 3 numeric failure,
// 4 vocab/pipeline mismatch.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dskd/dskd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitBadInput = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitPipelineMismatch = 4;

dskd::SimConfig sim_config_from_json(const json& j) {
  dskd::SimConfig cfg;
  cfg.n_points = j.value("n_points", cfg.n_points);
  cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
  cfg.n_classes = j.value("n_classes", cfg.n_classes);
  cfg.teacher_mean = j.value("teacher_mean", cfg.teacher_mean);
  cfg.teacher_std = j.value("teacher_std", cfg.teacher_std);
  cfg.student_mean = j.value("student_mean", cfg.student_mean);
  cfg.student_std = j.value("student_std", cfg.student_std);
  cfg.iterations = j.value("iterations", cfg.iterations);
  cfg.repeats = j.value("repeats", cfg.repeats);
  cfg.divergence.kind =
      dskd::divergence_from_name(j.value("divergence", std::string("kl")));
  cfg.divergence.lambda = j.value("lambda", cfg.divergence.lambda);
  cfg.divergence.akl_head_mass = j.value("akl_head_mass", cfg.divergence.akl_head_mass);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.head_mode = dskd::head_mode_from_name(j.value("head_mode", std::string("different")));
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);
  return cfg;
}

json sim_config_to_json(const dskd::SimConfig& cfg) {
  return json{{"n_points", cfg.n_points},
              {"hidden_dim", cfg.hidden_dim},
              {"n_classes", cfg.n_classes},
              {"teacher_mean", cfg.teacher_mean},
              {"teacher_std", cfg.teacher_std},
              {"student_mean", cfg.student_mean},
              {"student_std", cfg.student_std},
              {"iterations", cfg.iterations},
              {"repeats", cfg.repeats},
              {"divergence", dskd::divergence_name(cfg.divergence.kind)},
              {"lambda", cfg.divergence.lambda},
              {"akl_head_mass", cfg.divergence.akl_head_mass},
              {"learning_rate", cfg.effective_learning_rate()},
              {"head_mode", dskd::head_mode_name(cfg.head_mode)},
              {"seed", cfg.seed},
              {"threads", cfg.threads}};
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  json jcfg;
  dskd::SimConfig cfg;
  try {
    jcfg = dskd::load_json(config_path);
    cfg = sim_config_from_json(jcfg);
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "bad config: " << e.what() << "\n";
    return kExitBadInput;
  }

  dskd::SimResult res;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    res = dskd::run_sim(cfg);
  } catch (const dskd::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  const double elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  try {
    fs::create_directories(out_dir);
    {
      std::ofstream csv(fs::path(out_dir) / "loss_curve.csv");
      if (!csv) throw dskd::InputError("cannot write loss_curve.csv");
      csv << "iteration,mean_loss\n";
      csv.precision(17);
      for (std::size_t i = 0; i < res.loss_curve.size(); ++i)
        csv << i << "," << res.loss_curve[i] << "\n";
      if (!csv) throw dskd::InputError("write failed: loss_curve.csv");
    }
    dskd::write_tensor(fs::path(out_dir) / "hidden_before.dskd",
                       res.student_hidden_before);
    dskd::write_tensor(fs::path(out_dir) / "hidden_after.dskd", res.student_hidden_after);
    dskd::write_tensor(fs::path(out_dir) / "teacher_hidden.dskd", res.teacher_hidden);
    json manifest{{"config", sim_config_to_json(cfg)},
                  {"elapsed_seconds", elapsed_s},
                  {"final_mean_loss",
                   res.loss_curve.empty() ? json(nullptr) : json(res.loss_curve.back())}};
    std::ofstream mf(fs::path(out_dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";
    if (!mf) throw dskd::InputError("write failed: manifest.json");
  } catch (const std::exception& e) {
    std::cerr << "I/O failure: " << e.what() << "\n";
    return kExitIo;
  }
  std::cout << "wrote " << out_dir << " (" << res.loss_curve.size() << " iterations, "
            << cfg.repeats << " repeats)\n";
  return 0;
}

int cmd_align(const std::string& stu_path, const std::string& tea_path,
              const std::string& stu_vocab_path, const std::string& tea_vocab_path) {
  try {
    dskd::TokenSeq stu = dskd::token_seq_from_json(dskd::load_json(stu_path));
    dskd::TokenSeq tea = dskd::token_seq_from_json(dskd::load_json(tea_path));
    dskd::VocabDescriptor sv = dskd::vocab_from_json(dskd::load_json(stu_vocab_path));
    dskd::VocabDescriptor tv = dskd::vocab_from_json(dskd::load_json(tea_vocab_path));
    dskd::AlignmentSet a = dskd::eta_align(stu, tea, sv, tv);
    json out;
    out["pairs"] = json::array();
    for (const auto& [i, j] : a.pairs) out["pairs"].push_back({i, j});
    out["k"] = a.k();
    out["coverage"] = stu.size() ? static_cast<double>(a.k()) / stu.size() : 0.0;
    out["byte_total_mismatch"] = a.byte_total_mismatch;
    std::cout << out.dump(2) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "align failed: " << e.what() << "\n";
    return kExitBadInput;
  }
}

struct LossArgs {
  std::string mode;
  std::string teacher_hidden, teacher_head, student_hidden, student_head;
  std::string t2s_path;  // optional; default pinv initialization
  std::string teacher_top1_path;
  std::string stu_seq, tea_seq, stu_vocab, tea_vocab;
  std::string kind = "kl";
  double tau = 2.0;
  double lambda = 0.1;
  double akl_head_mass = 0.5;
  double kd_rate = 0.5;
  std::string grads_dir;
};

std::vector<dskd::TokenId> token_ids_from_json_file(const std::string& path) {
  json j = dskd::load_json(path);
  if (!j.is_array()) throw dskd::InputError("expected a JSON array of token ids: " + path);
  std::vector<dskd::TokenId> ids;
  for (const auto& v : j) ids.push_back(v.get<dskd::TokenId>());
  return ids;
}

int cmd_loss(const LossArgs& a) {
  try {
    dskd::DivergenceOptions opt{dskd::divergence_from_name(a.kind), a.lambda,
                                a.akl_head_mass};
    dskd::ModelSpace teacher{dskd::read_tensor(a.teacher_hidden),
                             dskd::read_tensor(a.teacher_head), {}};
    dskd::ModelSpace student{dskd::read_tensor(a.student_hidden),
                             dskd::read_tensor(a.student_head), {}};

    dskd::LossReport rep;
    if (a.mode == "vanilla") {
      rep = dskd::vanilla_kd_loss(teacher, student, opt, a.tau);
    } else if (a.mode == "dskd") {
      if (teacher.vocab_size() != student.vocab_size()) {
        std::cerr << "vocabulary sizes differ; use --mode dskd-eta\n";
        return kExitPipelineMismatch;
      }
      dskd::ProjectorPair proj;
      proj.t2s = a.t2s_path.empty() ? dskd::init_t2s(teacher.head, student.head)
                                    : dskd::read_tensor(a.t2s_path);
      proj.s2t = dskd::init_s2t(student.head, teacher.head);
      auto top1 = token_ids_from_json_file(a.teacher_top1_path);
      rep = dskd::dskd_same_vocab(teacher, student, proj, opt, a.tau, top1);
    } else if (a.mode == "dskd-eta") {
      dskd::TokenSeq stu_seq = dskd::token_seq_from_json(dskd::load_json(a.stu_seq));
      dskd::TokenSeq tea_seq = dskd::token_seq_from_json(dskd::load_json(a.tea_seq));
      student.vocab = dskd::vocab_from_json(dskd::load_json(a.stu_vocab));
      teacher.vocab = dskd::vocab_from_json(dskd::load_json(a.tea_vocab));
      auto inter = dskd::vocab_intersection(student.vocab, teacher.vocab);
      dskd::ProjectorPair proj;
      proj.t2s = a.t2s_path.empty()
                     ? dskd::init_t2s_cross(teacher.head, student.head, inter)
                     : dskd::read_tensor(a.t2s_path);
      proj.s2t = dskd::init_s2t_cross(student.head, teacher.head, inter);
      auto align = dskd::eta_align(stu_seq, tea_seq, student.vocab, teacher.vocab);
      rep = dskd::dskd_cross_vocab(teacher, student, proj, align, opt, a.tau,
                                   tea_seq.top1_pred);
    } else {
      std::cerr << "unknown mode: " << a.mode << "\n";
      return kExitBadInput;
    }

    json out{{"l_stu_kd", rep.l_stu_kd},     {"l_t2s_ce", rep.l_t2s_ce},
             {"l_tea_kd", rep.l_tea_kd},     {"kd_total", rep.total},
             {"aligned_count", rep.aligned_count}, {"mask_hits", rep.mask_hits},
             {"degenerate", rep.degenerate}, {"kd_rate", a.kd_rate}};
    std::cout << out.dump(2) << "\n";

    if (!a.grads_dir.empty()) {
      fs::create_directories(a.grads_dir);
      for (const auto& [name, g] : rep.grads)
        dskd::write_tensor(fs::path(a.grads_dir) / ("grad_" + name + ".dskd"), g);
    }
    return 0;
  } catch (const dskd::DimensionError& e) {
    std::cerr << "pipeline mismatch: " << e.what() << "\n";
    return kExitPipelineMismatch;
  } catch (const dskd::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "loss failed: " << e.what() << "\n";
    return kExitBadInput;
  }
}

int cmd_gradcheck(const std::vector<std::string>& kinds, std::size_t trials,
                  double tau, std::uint64_t seed) {
  try {
    dskd::GradCheckOptions opt;
    opt.trials = trials;
    opt.tau = tau;
    opt.seed = seed;
    if (!kinds.empty()) {
      opt.kinds.clear();
      for (const auto& k : kinds) opt.kinds.push_back(dskd::divergence_from_name(k));
    }
    auto rep = dskd::run_gradcheck(opt);
    for (const auto& [key, err] : rep.worst_by_case)
      std::cout << key << ": max rel err " << err << "\n";
    std::cout << "worst relative error: " << rep.worst << "\n";
    return rep.passed() ? 0 : kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "gradcheck failed: " << e.what() << "\n";
    return kExitBadInput;
  }
}

int cmd_structure(const std::string& a_path, const std::string& b_path,
                  const std::string& kind) {
  try {
    dskd::StructureKind k;
    if (kind == "cosine")
      k = dskd::StructureKind::cosine;
    else if (kind == "prod" || kind == "inner_product")
      k = dskd::StructureKind::inner_product;
    else {
      std::cerr << "unknown structure kind: " << kind << "\n";
      return kExitBadInput;
    }
    auto ma = dskd::structure_matrix(dskd::read_tensor(a_path), k);
    auto mb = dskd::structure_matrix(dskd::read_tensor(b_path), k);
    std::cout.precision(17);
    std::cout << dskd::structure_distance(ma, mb) << "\n";
    return 0;
  } catch (const dskd::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "structure failed: " << e.what() << "\n";
    return kExitBadInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-space knowledge distillation laboratory"};
  app.require_subcommand(1);

  // simulate
  std::string config_path, out_dir;
  auto* sim = app.add_subcommand("simulate", "run the shared-vs-different-head simulation");
  sim->add_option("--config", config_path, "JSON config file")->required();
  sim->add_option("--out", out_dir, "output directory")->required();

  // align
  std::string stu_seq, tea_seq, stu_vocab, tea_vocab;
  auto* align = app.add_subcommand("align", "exact token alignment of two tokenizations");
  align->add_option("--student", stu_seq, "student token sequence JSON")->required();
  align->add_option("--teacher", tea_seq, "teacher token sequence JSON")->required();
  align->add_option("--student-vocab", stu_vocab, "student vocabulary JSON")->required();
  align->add_option("--teacher-vocab", tea_vocab, "teacher vocabulary JSON")->required();

  // loss
  LossArgs la;
  auto* loss = app.add_subcommand("loss", "evaluate KD losses on tensor files");
  loss->add_option("--mode", la.mode, "vanilla | dskd | dskd-eta")->required();
  loss->add_option("--teacher-hidden", la.teacher_hidden)->required();
  loss->add_option("--teacher-head", la.teacher_head)->required();
  loss->add_option("--student-hidden", la.student_hidden)->required();
  loss->add_option("--student-head", la.student_head)->required();
  loss->add_option("--t2s", la.t2s_path, "t2s projector tensor (default: pinv init)");
  loss->add_option("--teacher-top1", la.teacher_top1_path,
                   "teacher top-1 ids JSON array (dskd mode)");
  loss->add_option("--student-seq", la.stu_seq, "student token sequence (dskd-eta)");
  loss->add_option("--teacher-seq", la.tea_seq, "teacher token sequence (dskd-eta)");
  loss->add_option("--student-vocab", la.stu_vocab, "student vocabulary (dskd-eta)");
  loss->add_option("--teacher-vocab", la.tea_vocab, "teacher vocabulary (dskd-eta)");
  loss->add_option("--kind", la.kind, "kl | rkl | skl | srkl | akl");
  loss->add_option("--tau", la.tau, "KD temperature");
  loss->add_option("--lambda", la.lambda, "skew coefficient");
  loss->add_option("--akl-head-mass", la.akl_head_mass, "AKL head mass split");
  loss->add_option("--kd-rate", la.kd_rate, "KD weight in the combined loss");
  loss->add_option("--grads", la.grads_dir, "directory for gradient tensors");

  // gradcheck
  std::vector<std::string> gc_kinds;
  std::size_t gc_trials = 100;
  double gc_tau = 2.0;
  std::uint64_t gc_seed = 12345;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient validation");
  gc->add_option("--kind", gc_kinds, "divergence kinds (default: all)");
  gc->add_option("--trials", gc_trials, "random instances per kind and pipeline");
  gc->add_option("--tau", gc_tau, "KD temperature");
  gc->add_option("--seed", gc_seed, "RNG seed");

  // structure
  std::string sa, sb, sk = "cosine";
  auto* st = app.add_subcommand("structure", "L1 distance between structure matrices");
  st->add_option("--a", sa, "hidden states tensor A")->required();
  st->add_option("--b", sb, "hidden states tensor B")->required();
  st->add_option("--kind", sk, "cosine | prod");

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) return cmd_simulate(config_path, out_dir);
  if (align->parsed()) return cmd_align(stu_seq, tea_seq, stu_vocab, tea_vocab);
  if (loss->parsed()) return cmd_loss(la);
  if (gc->parsed()) return cmd_gradcheck(gc_kinds, gc_trials, gc_tau, gc_seed);
  if (st->parsed()) return cmd_structure(sa, sb, sk);
  return kExitBadInput;
}
