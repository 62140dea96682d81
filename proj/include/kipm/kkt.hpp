#pragma once

/// Newton system of the primal-dual barrier method.
///
/// The full system in (dx, dlam_e, dlam_lA, dlam_uA, dlam_lx, dlam_ux,
/// ds_lA, ds_uA, ds_lx, ds_ux) is reduced by block elimination to
///
///   [ Q  -B' ] [ dx     ]   [ r1 ]
///   [ B   D  ] [ dlam_A ] = [ r2 ]
///
/// with Q = H + Lam_lx/S_lx + Lam_ux/S_ux, B = (C; A_l; -A_u) and
/// D = diag(mu | S_lA/Lam_lA | S_uA/Lam_uA). Adding 2 B'D^{-1} times the
/// second block row to the first gives the doubly augmented matrix
///
///   [ Q + 2 B'D^{-1}B   B' ]
///   [ B                 D  ]
///
/// which is symmetric positive definite whenever H is positive semidefinite
/// and the iterate is strictly interior. KktOperator applies it without
/// forming any matrix.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "kipm/linalg.hpp"
#include "kipm/model.hpp"

namespace kipm {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Original indices of the finite bounds in each bound family. Infinite sides
/// get no slack, multiplier or row in B.
struct BoundIndexMap {
  std::vector<std::size_t> lin_lower;
  std::vector<std::size_t> lin_upper;
  std::vector<std::size_t> var_lower;
  std::vector<std::size_t> var_upper;

  static BoundIndexMap from_problem(const QpProblem& qp) {
    BoundIndexMap m;
    for (std::size_t i = 0; i < qp.lin_bounds.size(); ++i) {
      if (std::isfinite(qp.lin_bounds.lower[i])) m.lin_lower.push_back(i);
      if (std::isfinite(qp.lin_bounds.upper[i])) m.lin_upper.push_back(i);
    }
    for (std::size_t j = 0; j < qp.var_bounds.size(); ++j) {
      if (std::isfinite(qp.var_bounds.lower[j])) m.var_lower.push_back(j);
      if (std::isfinite(qp.var_bounds.upper[j])) m.var_upper.push_back(j);
    }
    return m;
  }

  std::size_t bound_count() const {
    return lin_lower.size() + lin_upper.size() + var_lower.size() + var_upper.size();
  }
};

/// Primal, slack and multiplier vectors plus the barrier parameter.
/// Slacks and inequality multipliers are sized by their bound family.
struct IterateState {
  Vector x;
  Vector s_lA, s_uA, s_lx, s_ux;
  Vector lam_e;
  Vector lam_lA, lam_uA, lam_lx, lam_ux;
  double mu = 1.0;
};

inline bool strictly_interior(const IterateState& st) {
  for (const Vector* v : {&st.s_lA, &st.s_uA, &st.s_lx, &st.s_ux, &st.lam_lA,
                          &st.lam_uA, &st.lam_lx, &st.lam_ux}) {
    for (double e : *v) {
      if (!(e > 0.0)) return false;
    }
  }
  return st.mu > 0.0;
}

/// Residual blocks of the perturbed optimality conditions.
struct Residuals {
  Vector r_H;
  Vector r_e;
  Vector r_lA, r_uA, r_lx, r_ux;
  Vector r_c1, r_c2, r_c3, r_c4;

  /// 2-norm of all blocks concatenated.
  double norm() const {
    double sq = 0.0;
    for (const Vector* v : {&r_H, &r_e, &r_lA, &r_uA, &r_lx, &r_ux, &r_c1, &r_c2,
                            &r_c3, &r_c4}) {
      sq += dot(*v, *v);
    }
    return std::sqrt(sq);
  }
};

struct FullDirection {
  Vector dx;
  Vector d_lam_e, d_lam_lA, d_lam_uA, d_lam_lx, d_lam_ux;
  Vector ds_lA, ds_uA, ds_lx, ds_ux;

  bool finite() const {
    for (const Vector* v : {&dx, &d_lam_e, &d_lam_lA, &d_lam_uA, &d_lam_lx, &d_lam_ux,
                            &ds_lA, &ds_uA, &ds_lx, &ds_ux}) {
      if (!all_finite(*v)) return false;
    }
    return true;
  }
};

inline Residuals compute_residuals(const QpProblem& qp, const BoundIndexMap& map,
                                   const IterateState& st) {
  const std::size_t n = qp.n;
  if (st.x.size() != n || st.lam_e.size() != qp.m_eq() ||
      st.s_lA.size() != map.lin_lower.size() || st.s_uA.size() != map.lin_upper.size() ||
      st.s_lx.size() != map.var_lower.size() || st.s_ux.size() != map.var_upper.size() ||
      st.lam_lA.size() != st.s_lA.size() || st.lam_uA.size() != st.s_uA.size() ||
      st.lam_lx.size() != st.s_lx.size() || st.lam_ux.size() != st.s_ux.size()) {
    throw DimensionError("compute_residuals: iterate does not match problem");
  }
  Residuals r;
  const Vector ax = spmv(qp.a, st.x);

  // r_H = Hx + p - A_l' lam_lA + A_u' lam_uA - lam_lx + lam_ux - C' lam_e
  r.r_H = hessian_apply(qp.hessian, st.x);
  for (std::size_t j = 0; j < n; ++j) r.r_H[j] += qp.p[j];
  {
    Vector ya(qp.m_ineq(), 0.0);
    for (std::size_t k = 0; k < map.lin_lower.size(); ++k) ya[map.lin_lower[k]] -= st.lam_lA[k];
    for (std::size_t k = 0; k < map.lin_upper.size(); ++k) ya[map.lin_upper[k]] += st.lam_uA[k];
    axpy(1.0, spmv_transpose(qp.a, ya), r.r_H);
    axpy(-1.0, spmv_transpose(qp.c, st.lam_e), r.r_H);
  }
  for (std::size_t k = 0; k < map.var_lower.size(); ++k) r.r_H[map.var_lower[k]] -= st.lam_lx[k];
  for (std::size_t k = 0; k < map.var_upper.size(); ++k) r.r_H[map.var_upper[k]] += st.lam_ux[k];

  // r_e = Cx - b + mu lam_e
  r.r_e = spmv(qp.c, st.x);
  for (std::size_t i = 0; i < r.r_e.size(); ++i) r.r_e[i] += st.mu * st.lam_e[i] - qp.b[i];

  // Slacks measure the distance to their bound: r = (Ax - l) - s, (u - Ax) - s.
  r.r_lA.resize(map.lin_lower.size());
  for (std::size_t k = 0; k < map.lin_lower.size(); ++k) {
    const auto i = map.lin_lower[k];
    r.r_lA[k] = ax[i] - st.s_lA[k] - qp.lin_bounds.lower[i];
  }
  r.r_uA.resize(map.lin_upper.size());
  for (std::size_t k = 0; k < map.lin_upper.size(); ++k) {
    const auto i = map.lin_upper[k];
    r.r_uA[k] = qp.lin_bounds.upper[i] - ax[i] - st.s_uA[k];
  }
  r.r_lx.resize(map.var_lower.size());
  for (std::size_t k = 0; k < map.var_lower.size(); ++k) {
    const auto j = map.var_lower[k];
    r.r_lx[k] = st.x[j] - st.s_lx[k] - qp.var_bounds.lower[j];
  }
  r.r_ux.resize(map.var_upper.size());
  for (std::size_t k = 0; k < map.var_upper.size(); ++k) {
    const auto j = map.var_upper[k];
    r.r_ux[k] = qp.var_bounds.upper[j] - st.x[j] - st.s_ux[k];
  }

  auto complementarity = [&](const Vector& lam, const Vector& s) {
    Vector c(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) c[k] = lam[k] * s[k] - st.mu;
    return c;
  };
  r.r_c1 = complementarity(st.lam_lA, st.s_lA);
  r.r_c2 = complementarity(st.lam_uA, st.s_uA);
  r.r_c3 = complementarity(st.lam_lx, st.s_lx);
  r.r_c4 = complementarity(st.lam_ux, st.s_ux);

  for (const Vector* v : {&r.r_H, &r.r_e, &r.r_lA, &r.r_uA, &r.r_lx, &r.r_ux, &r.r_c1,
                          &r.r_c2, &r.r_c3, &r.r_c4}) {
    if (!all_finite(*v)) throw NumericalError("compute_residuals: non-finite residual");
  }
  return r;
}

inline Residuals compute_residuals(const QpProblem& qp, const IterateState& st) {
  return compute_residuals(qp, BoundIndexMap::from_problem(qp), st);
}

/// Matrix-free doubly augmented KKT operator for one interior iterate.
///
/// Vectors are stacked as (u | w) with u of length n and w of length
/// m_E + |lin_lower| + |lin_upper|, ordered equality rows, lower rows, upper
/// rows.
class KktOperator {
 public:
  KktOperator(const QpProblem& qp, BoundIndexMap map, Vector q_diag_extra, Vector d_diag)
      : qp_(&qp),
        map_(std::move(map)),
        q_diag_extra_(std::move(q_diag_extra)),
        d_diag_(std::move(d_diag)) {}

  const QpProblem& problem() const { return *qp_; }
  const BoundIndexMap& index_map() const { return map_; }
  std::span<const double> q_diag_extra() const { return q_diag_extra_; }
  std::span<const double> d_diag() const { return d_diag_; }

  std::size_t n() const { return qp_->n; }
  std::size_t m_eq() const { return qp_->m_eq(); }
  /// Rows of B.
  std::size_t m_b() const { return m_eq() + map_.lin_lower.size() + map_.lin_upper.size(); }
  std::size_t dim() const { return n() + m_b(); }

  /// t = B u
  void apply_b(std::span<const double> u, std::span<double> t) const {
    const std::size_t me = m_eq();
    spmv(qp_->c, u, t.subspan(0, me));
    const Vector au = spmv(qp_->a, u);
    const std::size_t nl = map_.lin_lower.size();
    for (std::size_t k = 0; k < nl; ++k) t[me + k] = au[map_.lin_lower[k]];
    for (std::size_t k = 0; k < map_.lin_upper.size(); ++k) {
      t[me + nl + k] = -au[map_.lin_upper[k]];
    }
  }

  /// out = B' y
  void apply_bt(std::span<const double> y, std::span<double> out) const {
    const std::size_t me = m_eq();
    const std::size_t nl = map_.lin_lower.size();
    spmv_transpose(qp_->c, y.subspan(0, me), out);
    if (qp_->m_ineq() == 0) return;
    Vector ya(qp_->m_ineq(), 0.0);
    for (std::size_t k = 0; k < nl; ++k) ya[map_.lin_lower[k]] += y[me + k];
    for (std::size_t k = 0; k < map_.lin_upper.size(); ++k) {
      ya[map_.lin_upper[k]] -= y[me + nl + k];
    }
    const Vector aty = spmv_transpose(qp_->a, ya);
    axpy(1.0, aty, out);
  }

  /// out = Q u, Q = H + q_diag_extra.
  void apply_q(std::span<const double> u, std::span<double> out) const {
    hessian_apply(qp_->hessian, u, out);
    for (std::size_t j = 0; j < n(); ++j) out[j] += q_diag_extra_[j] * u[j];
  }

  /// Applies the doubly augmented matrix: with t = B u,
  ///   top    = Q u + B'(2 D^{-1} t + w)
  ///   bottom = t + D w
  void apply(std::span<const double> in, std::span<double> out) const {
    if (in.size() != dim() || out.size() != dim()) {
      throw DimensionError("KktOperator::apply: dimension mismatch");
    }
    const std::size_t nn = n();
    const std::size_t mb = m_b();
    const auto u = in.subspan(0, nn);
    const auto w = in.subspan(nn, mb);
    auto top = out.subspan(0, nn);
    auto bottom = out.subspan(nn, mb);

    Vector t(mb);
    apply_b(u, t);
    Vector y(mb);
    for (std::size_t i = 0; i < mb; ++i) {
      y[i] = 2.0 * t[i] / d_diag_[i] + w[i];
      bottom[i] = t[i] + d_diag_[i] * w[i];
    }
    apply_q(u, top);
    Vector bty(nn);
    apply_bt(y, bty);
    axpy(1.0, bty, top);
  }

  void operator()(std::span<const double> in, std::span<double> out) const { apply(in, out); }

  /// Diagonal of the doubly augmented matrix, computed from the stored rows
  /// of C and A.
  Vector jacobi_diagonal() const {
    Vector diag(dim());
    const Vector hd = hessian_diagonal(qp_->hessian);
    for (std::size_t j = 0; j < n(); ++j) diag[j] = hd[j] + q_diag_extra_[j];

    auto add_rows = [&](const SparseMatrix& m, std::size_t row, double d) {
      auto [cols, vals] = m.row(row);
      for (std::size_t k = 0; k < cols.size(); ++k) diag[cols[k]] += 2.0 * vals[k] * vals[k] / d;
    };
    const std::size_t me = m_eq();
    const std::size_t nl = map_.lin_lower.size();
    for (std::size_t i = 0; i < me; ++i) add_rows(qp_->c, i, d_diag_[i]);
    for (std::size_t k = 0; k < nl; ++k) add_rows(qp_->a, map_.lin_lower[k], d_diag_[me + k]);
    for (std::size_t k = 0; k < map_.lin_upper.size(); ++k) {
      add_rows(qp_->a, map_.lin_upper[k], d_diag_[me + nl + k]);
    }
    std::copy(d_diag_.begin(), d_diag_.end(), diag.begin() + static_cast<std::ptrdiff_t>(n()));
    return diag;
  }

 private:
  const QpProblem* qp_;
  BoundIndexMap map_;
  Vector q_diag_extra_;
  Vector d_diag_;
};

/// Builds the operator at a strictly interior iterate. Only diagonals are
/// computed; the problem is referenced and must outlive the operator.
inline KktOperator build_operator(const QpProblem& qp, BoundIndexMap map,
                                  const IterateState& st) {
  if (!strictly_interior(st)) {
    throw std::domain_error("build_operator: iterate is not strictly interior");
  }
  Vector q(qp.n, 0.0);
  for (std::size_t k = 0; k < map.var_lower.size(); ++k) {
    q[map.var_lower[k]] += st.lam_lx[k] / st.s_lx[k];
  }
  for (std::size_t k = 0; k < map.var_upper.size(); ++k) {
    q[map.var_upper[k]] += st.lam_ux[k] / st.s_ux[k];
  }
  Vector d;
  d.reserve(qp.m_eq() + st.s_lA.size() + st.s_uA.size());
  d.insert(d.end(), qp.m_eq(), st.mu);
  for (std::size_t k = 0; k < st.s_lA.size(); ++k) d.push_back(st.s_lA[k] / st.lam_lA[k]);
  for (std::size_t k = 0; k < st.s_uA.size(); ++k) d.push_back(st.s_uA[k] / st.lam_uA[k]);
  return KktOperator(qp, std::move(map), std::move(q), std::move(d));
}

inline KktOperator build_operator(const QpProblem& qp, const IterateState& st) {
  return build_operator(qp, BoundIndexMap::from_problem(qp), st);
}

inline void apply_doubly_augmented(const KktOperator& op, std::span<const double> in,
                                   std::span<double> out) {
  op.apply(in, out);
}

inline Vector jacobi_diagonal(const KktOperator& op) { return op.jacobi_diagonal(); }

/// Right-hand side of the reduced system, r2 stacked as (r_e | r_lA | r_uA).
struct ReducedRhs {
  Vector r1;
  Vector r2;
};

inline ReducedRhs reduced_rhs(const KktOperator& op, const Residuals& res,
                              const IterateState& st) {
  const auto& map = op.index_map();
  ReducedRhs out;
  out.r1.resize(op.n());
  for (std::size_t j = 0; j < op.n(); ++j) out.r1[j] = -res.r_H[j];
  for (std::size_t k = 0; k < map.var_lower.size(); ++k) {
    out.r1[map.var_lower[k]] -= (res.r_c3[k] + st.lam_lx[k] * res.r_lx[k]) / st.s_lx[k];
  }
  for (std::size_t k = 0; k < map.var_upper.size(); ++k) {
    out.r1[map.var_upper[k]] += (res.r_c4[k] + st.lam_ux[k] * res.r_ux[k]) / st.s_ux[k];
  }

  out.r2.reserve(op.m_b());
  for (double v : res.r_e) out.r2.push_back(-v);
  for (std::size_t k = 0; k < res.r_lA.size(); ++k) {
    out.r2.push_back(-res.r_lA[k] - res.r_c1[k] / st.lam_lA[k]);
  }
  for (std::size_t k = 0; k < res.r_uA.size(); ++k) {
    out.r2.push_back(-res.r_uA[k] - res.r_c2[k] / st.lam_uA[k]);
  }
  return out;
}

/// Right-hand side of the doubly augmented system: (r1 + 2 B'D^{-1} r2 | r2).
inline Vector assemble_rhs(const KktOperator& op, const Residuals& res,
                           const IterateState& st) {
  const ReducedRhs red = reduced_rhs(op, res, st);
  const auto d = op.d_diag();
  Vector scaled(op.m_b());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = 2.0 * red.r2[i] / d[i];
  Vector out(op.dim());
  op.apply_bt(scaled, std::span<double>(out).subspan(0, op.n()));
  for (std::size_t j = 0; j < op.n(); ++j) out[j] += red.r1[j];
  std::copy(red.r2.begin(), red.r2.end(), out.begin() + static_cast<std::ptrdiff_t>(op.n()));
  if (!all_finite(out)) throw NumericalError("assemble_rhs: non-finite right-hand side");
  return out;
}

/// Back-substitutes a reduced solution (dx | dlam_A) into the full Newton
/// direction. Linear-constraint slacks come from the complementarity rows;
/// variable-bound slacks from the bound rows, and their multipliers from the
/// complementarity rows.
inline FullDirection recover_directions(const KktOperator& op, std::span<const double> dx,
                                        std::span<const double> d_lam_a,
                                        const Residuals& res, const IterateState& st) {
  const auto& map = op.index_map();
  if (dx.size() != op.n() || d_lam_a.size() != op.m_b()) {
    throw DimensionError("recover_directions: dimension mismatch");
  }
  const std::size_t me = op.m_eq();
  const std::size_t nl = map.lin_lower.size();
  const std::size_t nu = map.lin_upper.size();

  FullDirection dir;
  dir.dx.assign(dx.begin(), dx.end());
  dir.d_lam_e.assign(d_lam_a.begin(), d_lam_a.begin() + static_cast<std::ptrdiff_t>(me));
  dir.d_lam_lA.assign(d_lam_a.begin() + static_cast<std::ptrdiff_t>(me),
                      d_lam_a.begin() + static_cast<std::ptrdiff_t>(me + nl));
  dir.d_lam_uA.assign(d_lam_a.begin() + static_cast<std::ptrdiff_t>(me + nl), d_lam_a.end());

  dir.ds_lA.resize(nl);
  for (std::size_t k = 0; k < nl; ++k) {
    dir.ds_lA[k] = -(res.r_c1[k] + st.s_lA[k] * dir.d_lam_lA[k]) / st.lam_lA[k];
  }
  dir.ds_uA.resize(nu);
  for (std::size_t k = 0; k < nu; ++k) {
    dir.ds_uA[k] = -(res.r_c2[k] + st.s_uA[k] * dir.d_lam_uA[k]) / st.lam_uA[k];
  }

  const std::size_t vl = map.var_lower.size();
  const std::size_t vu = map.var_upper.size();
  dir.ds_lx.resize(vl);
  dir.d_lam_lx.resize(vl);
  for (std::size_t k = 0; k < vl; ++k) {
    dir.ds_lx[k] = dx[map.var_lower[k]] + res.r_lx[k];
    dir.d_lam_lx[k] = -(res.r_c3[k] + st.lam_lx[k] * dir.ds_lx[k]) / st.s_lx[k];
  }
  dir.ds_ux.resize(vu);
  dir.d_lam_ux.resize(vu);
  for (std::size_t k = 0; k < vu; ++k) {
    dir.ds_ux[k] = res.r_ux[k] - dx[map.var_upper[k]];
    dir.d_lam_ux[k] = -(res.r_c4[k] + st.lam_ux[k] * dir.ds_ux[k]) / st.s_ux[k];
  }
  if (!dir.finite()) throw NumericalError("recover_directions: non-finite direction");
  return dir;
}

// ---------------------------------------------------------------------------
// Dense materializations (test oracles)
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDenseCap = 2000;

class DenseCapExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// B as a dense m_b x n matrix.
inline DenseMatrix dense_constraint_block(const KktOperator& op) {
  const auto& qp = op.problem();
  const auto& map = op.index_map();
  DenseMatrix b(op.m_b(), op.n());
  const std::size_t me = op.m_eq();
  const std::size_t nl = map.lin_lower.size();
  for (const auto& t : qp.c.to_triplets()) b(t.row, t.col) = t.value;
  for (std::size_t k = 0; k < nl; ++k) {
    auto [cols, vals] = qp.a.row(map.lin_lower[k]);
    for (std::size_t q = 0; q < cols.size(); ++q) b(me + k, cols[q]) = vals[q];
  }
  for (std::size_t k = 0; k < map.lin_upper.size(); ++k) {
    auto [cols, vals] = qp.a.row(map.lin_upper[k]);
    for (std::size_t q = 0; q < cols.size(); ++q) b(me + nl + k, cols[q]) = -vals[q];
  }
  return b;
}

enum class DenseForm {
  DoublyAugmented,  // [Q + 2B'D^{-1}B, B'; B, D]
  Augmented,        // [Q, -B'; B, D]
};

inline DenseMatrix assemble_dense(const KktOperator& op,
                                  DenseForm form = DenseForm::DoublyAugmented,
                                  std::size_t cap = kDenseCap) {
  const std::size_t dim = op.dim();
  if (dim > cap) throw DenseCapExceeded("assemble_dense: dimension exceeds cap");
  const std::size_t n = op.n();
  const std::size_t mb = op.m_b();
  const DenseMatrix h = to_dense(op.problem().hessian);
  const DenseMatrix b = dense_constraint_block(op);
  const auto d = op.d_diag();
  const auto q = op.q_diag_extra();

  DenseMatrix k(dim, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) k(i, j) = h(i, j);
    k(i, i) += q[i];
  }
  const bool doubly = form == DenseForm::DoublyAugmented;
  if (doubly) {
    for (std::size_t r = 0; r < mb; ++r) {
      for (std::size_t i = 0; i < n; ++i) {
        if (b(r, i) == 0.0) continue;
        const double bi = 2.0 * b(r, i) / d[r];
        for (std::size_t j = 0; j < n; ++j) k(i, j) += bi * b(r, j);
      }
    }
  }
  for (std::size_t r = 0; r < mb; ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      k(n + r, j) = b(r, j);
      k(j, n + r) = doubly ? b(r, j) : -b(r, j);
    }
    k(n + r, n + r) = d[r];
  }
  return k;
}

}  // namespace kipm
