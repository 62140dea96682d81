#pragma once

// Command-line front end: solve-qp, solve-svm and check.
//
// Exit codes: 0 converged / valid, 1 input error, 2 iteration limit,
// 3 linear solver failure.

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include "CLI11.hpp"
#include "kipm/ipm.hpp"
#include "kipm/model.hpp"
#include "kipm/qp_io.hpp"
#include "kipm/svm.hpp"

namespace kipm::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kIterationLimit = 2,
  kLinearSolverFailure = 3,
};

inline int exit_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return kOk;
    case SolveStatus::IterationLimit: return kIterationLimit;
    case SolveStatus::LinearSolverFailure: return kLinearSolverFailure;
  }
  return kInputError;
}

struct SolverFlags {
  IpmConfig ipm;
  bool cg_absolute = false;
  std::string trace_path;
  std::string solution_path;
  bool verbose = false;
};

inline void add_solver_flags(CLI::App& cmd, SolverFlags& f) {
  cmd.add_option("--mu-tol", f.ipm.mu_tol, "Terminate once mu drops below this")
      ->capture_default_str();
  cmd.add_option("--cg-tol", f.ipm.pcg.tol, "CG tolerance on the unpreconditioned residual")
      ->capture_default_str();
  cmd.add_option("--cg-maxit", f.ipm.pcg.max_iters, "CG iteration cap per Newton step")
      ->capture_default_str();
  cmd.add_flag("--cg-abs", f.cg_absolute, "Treat --cg-tol as absolute instead of relative");
  cmd.add_option("--gamma", f.ipm.gamma, "Fraction-to-boundary factor of the ratio test")
      ->capture_default_str();
  cmd.add_option("--mu-init", f.ipm.mu_init, "Initial barrier parameter")
      ->capture_default_str();
  cmd.add_option("--max-iter", f.ipm.max_iters, "Interior-point iteration cap")
      ->capture_default_str();
  cmd.add_option("--trace", f.trace_path, "Write the per-iteration trace CSV here");
  cmd.add_option("--solution", f.solution_path, "Write the result document here");
  cmd.add_flag("--verbose", f.verbose, "Print one line per iteration");
}

inline void print_record(std::ostream& out, const TraceRecord& t) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%4zu  mu %.2e  pinf %.3e  dinf %.3e  cinf %.3e  cg %5zu (%.2e)  "
                "ax %.3f  al %.3f\n",
                t.iter, t.mu, t.primal_inf, t.dual_inf, t.compl_inf, t.cg_iters, t.cg_resid,
                t.alpha_x, t.alpha_lam);
  out << buf;
}

inline SolveReport run_solver(const QpProblem& qp, SolverFlags& flags, std::ostream& out) {
  flags.ipm.pcg.tol_is_relative = !flags.cg_absolute;
  TraceObserver observer;
  if (flags.verbose) observer = [&out](const TraceRecord& t) { print_record(out, t); };
  SolveReport report = solve(qp, flags.ipm, observer);
  if (!flags.trace_path.empty()) {
    std::ofstream tf(flags.trace_path);
    if (!tf) throw std::runtime_error("cannot write '" + flags.trace_path + "'");
    io::write_trace(tf, report.trace);
  }
  return report;
}

inline void print_summary(std::ostream& out, const SolveReport& r) {
  char buf[256];
  const TraceRecord last = r.trace.empty() ? TraceRecord{} : r.trace.back();
  std::snprintf(buf, sizeof buf,
                "status %s  iterations %zu  objective %.10e  pinf %.3e  dinf %.3e  "
                "cinf %.3e  time %.2fs\n",
                to_string(r.status), r.trace.size(), r.objective, last.primal_inf,
                last.dual_inf, last.compl_inf, r.seconds);
  out << buf;
}

inline bool report_violations(const QpProblem& qp, std::ostream& err) {
  const ValidationReport report = validate_problem(qp);
  if (report.empty()) return true;
  err << report.size() << " violation(s):\n";
  for (const auto& v : report) err << "  " << to_string(v.kind) << ": " << v.message << '\n';
  return false;
}

inline int cmd_check(const std::string& path, std::ostream& out, std::ostream& err) {
  const QpProblem qp = io::read_qp_file(path);
  if (!report_violations(qp, err)) return kInputError;
  out << "OK n=" << qp.n << " m_A=" << qp.m_ineq() << " m_E=" << qp.m_eq() << '\n';
  return kOk;
}

inline int cmd_solve_qp(const std::string& path, SolverFlags& flags, std::ostream& out,
                        std::ostream& err) {
  const QpProblem qp = io::read_qp_file(path);
  if (!report_violations(qp, err)) return kInputError;
  const SolveReport r = run_solver(qp, flags, out);
  print_summary(out, r);
  if (!flags.solution_path.empty()) io::write_json_file(flags.solution_path, io::solution_json(r));
  return exit_code(r.status);
}

inline int cmd_solve_svm(const std::string& path, const svm::SvmConfig& svm_cfg,
                         SolverFlags& flags, std::ostream& out, std::ostream& err) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  const svm::SvmDataset data = svm::parse_libsvm(in);
  const QpProblem qp = svm::build_svm_dual(data, svm_cfg);
  out << "samples " << data.size() << "  features " << data.n_features << "  variables "
      << qp.n << "  equality rows " << qp.m_eq() << "  bound constraints "
      << 2 * qp.n << '\n';
  if (!report_violations(qp, err)) return kInputError;
  const SolveReport r = run_solver(qp, flags, out);
  print_summary(out, r);

  io::Json doc = io::solution_json(r);
  doc["sigma"] = svm_cfg.sigma;
  doc["c"] = svm_cfg.c;
  double ay = 0.0;
  for (std::size_t i = 0; i < qp.n; ++i) ay += r.x[i] * data.labels[i];
  doc["alpha_dot_y"] = ay;
  doc["alpha"] = r.x;
  doc.erase("x");
  try {
    const svm::SvmModel model = svm::extract_model(data, svm_cfg, r.x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      correct += svm::predict(model, data.samples[i]).label == data.labels[i];
    }
    const double acc = double(correct) / double(data.size());
    doc["bias"] = model.bias;
    doc["support_indices"] = model.support_indices;
    doc["training_accuracy"] = acc;
    out << "support vectors " << model.support_indices.size() << "  bias " << model.bias
        << "  training accuracy " << acc << '\n';
  } catch (const std::runtime_error& e) {
    err << "warning: " << e.what() << '\n';
  }
  if (!flags.solution_path.empty()) io::write_json_file(flags.solution_path, doc);
  return exit_code(r.status);
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interior-point QP solver with matrix-free doubly augmented KKT systems"};
  app.require_subcommand(1);

  std::string qp_path;
  SolverFlags qp_flags;
  auto* solve_qp = app.add_subcommand("solve-qp", "Solve a QP from a JSON problem document");
  solve_qp->add_option("file", qp_path, "Problem document")->required();
  add_solver_flags(*solve_qp, qp_flags);

  std::string svm_path;
  SolverFlags svm_flags;
  svm::SvmConfig svm_cfg;
  auto* solve_svm = app.add_subcommand("solve-svm", "Train an RBF SVM through its dual QP");
  solve_svm->add_option("file", svm_path, "LIBSVM-format training data")->required();
  solve_svm->add_option("--sigma", svm_cfg.sigma, "RBF width sigma in exp(-d^2/(2 sigma))")
      ->required()
      ->check(CLI::PositiveNumber);
  solve_svm->add_option("--c", svm_cfg.c, "Upper bound on the dual variables")
      ->required()
      ->check(CLI::PositiveNumber);
  add_solver_flags(*solve_svm, svm_flags);

  std::string check_path;
  auto* check = app.add_subcommand("check", "Parse and validate a problem document");
  check->add_option("file", check_path, "Problem document")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    const CLI::App* sub = nullptr;
    for (const auto* s : {solve_qp, solve_svm, check}) {
      if (s->parsed()) sub = s;
    }
    err << (sub ? sub->help() : app.help());
    return kInputError;
  }

  try {
    if (*check) return cmd_check(check_path, out, err);
    if (*solve_qp) return cmd_solve_qp(qp_path, qp_flags, out, err);
    return cmd_solve_svm(svm_path, svm_cfg, svm_flags, out, err);
  } catch (const io::QpFileError& e) {
    err << "error in member " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kInputError;
}

}  // namespace kipm::cli
