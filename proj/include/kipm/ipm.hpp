#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <utility>
#include <stdexcept>
#include <vector>

#include "kipm/kkt.hpp"
#include "kipm/linalg.hpp"
#include "kipm/model.hpp"

namespace kipm {

struct IpmConfig {
  double gamma = 0.99;
  double mu_init = 1.0;
  double mu_tol = 1e-6;
  double mu_shrink = 10.0;
  std::size_t max_iters = 200;
  PcgConfig pcg{};

  void check() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    if (!(mu_init > 0.0)) throw std::invalid_argument("mu_init must be positive");
    if (!(mu_tol > 0.0)) throw std::invalid_argument("mu_tol must be positive");
    if (!(mu_shrink > 1.0)) throw std::invalid_argument("mu_shrink must exceed 1");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
    if (!(pcg.tol > 0.0) || pcg.max_iters < 1) {
      throw std::invalid_argument("invalid PCG configuration");
    }
  }
};

/// Diagnostics for one interior-point iteration. mu is the barrier value the
/// step was computed with; infeasibilities are measured after the step.
struct TraceRecord {
  std::size_t iter = 0;
  double mu = 0.0;
  double primal_inf = 0.0;
  double dual_inf = 0.0;
  double compl_inf = 0.0;
  std::size_t cg_iters = 0;
  double cg_resid = 0.0;
  double alpha_x = 0.0;
  double alpha_lam = 0.0;
};

enum class SolveStatus { Converged, IterationLimit, LinearSolverFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::IterationLimit: return "iteration_limit";
    case SolveStatus::LinearSolverFailure: return "linear_solver_failure";
  }
  return "unknown";
}

struct SolveReport {
  Vector x;
  IterateState state;
  SolveStatus status = SolveStatus::IterationLimit;
  std::vector<TraceRecord> trace;
  double objective = 0.0;
  /// Iterations (1-based) after which mu was reduced.
  std::vector<std::size_t> barrier_events;
  /// Iterations whose linear solve did not meet its tolerance.
  std::vector<std::size_t> linear_solver_events;
  double seconds = 0.0;
};

struct StepLengths {
  double alpha_x = 1.0;
  double alpha_lam = 1.0;
};

struct Infeasibilities {
  double primal = 0.0;
  double dual = 0.0;
  double compl_ = 0.0;
};

struct BarrierUpdate {
  double mu;
  bool terminate;
};

/// Outcome of one Newton-direction solve of the doubly augmented system.
struct LinearSolveOutcome {
  Vector solution;
  std::size_t iterations = 0;
  double residual_norm = 0.0;
  bool converged = true;
};

/// Strategy for solving op * z = rhs. The default uses Jacobi-preconditioned
/// CG; tests substitute a dense direct solve.
using DirectionSolver =
    std::function<LinearSolveOutcome(const KktOperator&, std::span<const double>)>;

inline DirectionSolver pcg_direction_solver(const PcgConfig& cfg) {
  return [cfg](const KktOperator& op, std::span<const double> rhs) {
    const JacobiPreconditioner prec(op.jacobi_diagonal());
    PcgResult r = pcg(op, prec, rhs, cfg);
    LinearSolveOutcome out;
    out.solution = std::move(r.solution);
    out.iterations = r.iterations;
    out.residual_norm = r.final_residual_norm;
    out.converged = r.converged;
    return out;
  };
}

/// Starting point: x at the box midpoint, one unit inside a one-sided bound,
/// or zero; slacks max(1, |distance to bound|); inequality multipliers one.
inline IterateState initialize(const QpProblem& qp, const IpmConfig& cfg,
                               const BoundIndexMap& map) {
  IterateState st;
  st.mu = cfg.mu_init;
  st.x.assign(qp.n, 0.0);
  for (std::size_t j = 0; j < qp.n; ++j) {
    const double lo = qp.var_bounds.lower[j];
    const double hi = qp.var_bounds.upper[j];
    const bool has_lo = std::isfinite(lo);
    const bool has_hi = std::isfinite(hi);
    if (has_lo && has_hi) {
      st.x[j] = 0.5 * (lo + hi);
    } else if (has_lo) {
      st.x[j] = lo + 1.0;
    } else if (has_hi) {
      st.x[j] = hi - 1.0;
    }
  }
  const Vector ax = spmv(qp.a, st.x);
  auto slack = [](double dist) { return std::max(1.0, std::abs(dist)); };
  for (auto i : map.lin_lower) st.s_lA.push_back(slack(ax[i] - qp.lin_bounds.lower[i]));
  for (auto i : map.lin_upper) st.s_uA.push_back(slack(qp.lin_bounds.upper[i] - ax[i]));
  for (auto j : map.var_lower) st.s_lx.push_back(slack(st.x[j] - qp.var_bounds.lower[j]));
  for (auto j : map.var_upper) st.s_ux.push_back(slack(qp.var_bounds.upper[j] - st.x[j]));
  st.lam_lA.assign(st.s_lA.size(), 1.0);
  st.lam_uA.assign(st.s_uA.size(), 1.0);
  st.lam_lx.assign(st.s_lx.size(), 1.0);
  st.lam_ux.assign(st.s_ux.size(), 1.0);
  st.lam_e.assign(qp.m_eq(), 0.0);
  return st;
}

inline IterateState initialize(const QpProblem& qp, const IpmConfig& cfg = {}) {
  return initialize(qp, cfg, BoundIndexMap::from_problem(qp));
}

/// Ratio test: largest step in [0, 1], damped by gamma, that keeps every slack
/// (alpha_x) and every inequality multiplier (alpha_lam) positive. The
/// equality multiplier has no sign and takes no part.
inline StepLengths step_lengths(const IterateState& st, const FullDirection& dir,
                                double gamma) {
  auto ratio = [](std::initializer_list<std::pair<const Vector*, const Vector*>> fams) {
    double m = std::numeric_limits<double>::infinity();
    for (auto [v, dv] : fams) {
      for (std::size_t i = 0; i < v->size(); ++i) {
        if ((*dv)[i] < 0.0) m = std::min(m, -(*v)[i] / (*dv)[i]);
      }
    }
    return m;
  };
  const double rx = ratio({{&st.s_lA, &dir.ds_lA},
                           {&st.s_uA, &dir.ds_uA},
                           {&st.s_lx, &dir.ds_lx},
                           {&st.s_ux, &dir.ds_ux}});
  const double rl = ratio({{&st.lam_lA, &dir.d_lam_lA},
                           {&st.lam_uA, &dir.d_lam_uA},
                           {&st.lam_lx, &dir.d_lam_lx},
                           {&st.lam_ux, &dir.d_lam_ux}});
  return {std::min(1.0, gamma * rx), std::min(1.0, gamma * rl)};
}

/// x and slacks move by alpha_x, all multipliers (lam_e included) by alpha_lam.
inline IterateState apply_step(const IterateState& st, const FullDirection& dir,
                               double alpha_x, double alpha_lam) {
  IterateState out = st;
  axpy(alpha_x, dir.dx, out.x);
  axpy(alpha_x, dir.ds_lA, out.s_lA);
  axpy(alpha_x, dir.ds_uA, out.s_uA);
  axpy(alpha_x, dir.ds_lx, out.s_lx);
  axpy(alpha_x, dir.ds_ux, out.s_ux);
  axpy(alpha_lam, dir.d_lam_e, out.lam_e);
  axpy(alpha_lam, dir.d_lam_lA, out.lam_lA);
  axpy(alpha_lam, dir.d_lam_uA, out.lam_uA);
  axpy(alpha_lam, dir.d_lam_lx, out.lam_lx);
  axpy(alpha_lam, dir.d_lam_ux, out.lam_ux);
  if (!strictly_interior(out)) {
    throw NumericalError("apply_step: step left the interior");
  }
  return out;
}

inline Infeasibilities infeasibilities(const Residuals& r) {
  auto norm_of = [](std::initializer_list<const Vector*> blocks) {
    double sq = 0.0;
    for (const Vector* v : blocks) sq += dot(*v, *v);
    return std::sqrt(sq);
  };
  return {norm_of({&r.r_lA, &r.r_uA, &r.r_lx, &r.r_ux}), norm_of({&r.r_H}),
          norm_of({&r.r_c1, &r.r_c2, &r.r_c3, &r.r_c4})};
}

/// Once the residual norm drops below mu, either stop (mu already below
/// mu_tol) or shrink mu.
inline BarrierUpdate update_barrier(double mu, double residual_norm, const IpmConfig& cfg) {
  if (residual_norm < mu) {
    if (mu < cfg.mu_tol) return {mu, true};
    return {mu / cfg.mu_shrink, false};
  }
  return {mu, false};
}

/// Observer invoked after each iteration with the freshly appended record.
using TraceObserver = std::function<void(const TraceRecord&)>;

/// Primal-dual interior-point loop. Each iteration solves the doubly
/// augmented system for a Newton direction, takes a ratio-test step and
/// updates mu once the full residual norm is below it.
inline SolveReport solve(const QpProblem& qp, const IpmConfig& cfg,
                         const DirectionSolver& direction_solver,
                         const TraceObserver& observer = {}) {
  cfg.check();
  const auto start = std::chrono::steady_clock::now();
  const BoundIndexMap map = BoundIndexMap::from_problem(qp);

  SolveReport report;
  IterateState st = initialize(qp, cfg, map);
  report.status = SolveStatus::IterationLimit;

  for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
    const Residuals res = compute_residuals(qp, map, st);
    const KktOperator op = build_operator(qp, map, st);
    const Vector rhs = assemble_rhs(op, res, st);

    LinearSolveOutcome lin = direction_solver(op, rhs);
    if (!lin.converged) report.linear_solver_events.push_back(iter);
    if (lin.solution.size() != op.dim() || !all_finite(lin.solution)) {
      report.status = SolveStatus::LinearSolverFailure;
      break;
    }
    const std::span<const double> z(lin.solution);
    FullDirection dir;
    try {
      dir = recover_directions(op, z.subspan(0, op.n()), z.subspan(op.n()), res, st);
    } catch (const NumericalError&) {
      report.status = SolveStatus::LinearSolverFailure;
      break;
    }

    const StepLengths step = step_lengths(st, dir, cfg.gamma);
    const double mu_used = st.mu;
    st = apply_step(st, dir, step.alpha_x, step.alpha_lam);

    const Residuals after = compute_residuals(qp, map, st);
    const Infeasibilities inf = infeasibilities(after);
    report.trace.push_back({iter, mu_used, inf.primal, inf.dual, inf.compl_, lin.iterations,
                            lin.residual_norm, step.alpha_x, step.alpha_lam});
    if (observer) observer(report.trace.back());

    const BarrierUpdate upd = update_barrier(st.mu, after.norm(), cfg);
    if (upd.terminate) {
      report.status = SolveStatus::Converged;
      break;
    }
    if (upd.mu != st.mu) report.barrier_events.push_back(iter);
    st.mu = upd.mu;
  }

  report.x = st.x;
  report.objective = quadratic_objective(qp, st.x);
  report.state = std::move(st);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline SolveReport solve(const QpProblem& qp, const IpmConfig& cfg = {},
                         const TraceObserver& observer = {}) {
  return solve(qp, cfg, pcg_direction_solver(cfg.pcg), observer);
}

}  // namespace kipm
