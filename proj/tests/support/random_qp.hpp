#pragma once

// Random convex QPs and strictly interior iterates for property tests.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "kipm/kkt.hpp"
#include "kipm/linalg.hpp"
#include "kipm/model.hpp"

namespace kipm::testing {

struct RandomQpShape {
  std::size_t n = 8;
  std::size_t m_ineq = 4;
  std::size_t m_eq = 2;
  double density = 0.4;
};

class Rng {
 public:
  explicit Rng(unsigned long long seed) : gen_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(gen_);
  }
  bool chance(double p) { return uniform() < p; }

  Vector normal_vector(std::size_t n) {
    Vector v(n);
    for (auto& x : v) x = normal();
    return v;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline SparseMatrix random_sparse(Rng& rng, std::size_t rows, std::size_t cols, double density) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < rows; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < cols; ++j) {
      if (rng.chance(density)) {
        t.push_back({i, j, rng.normal()});
        any = true;
      }
    }
    if (!any && cols > 0) t.push_back({i, rng.index(0, cols - 1), 1.0 + rng.uniform()});
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

/// Symmetric positive definite sparse matrix G'G + shift*I.
inline SparseMatrix random_spd_sparse(Rng& rng, std::size_t n, double density, double shift) {
  const SparseMatrix g = random_sparse(rng, n, n, density);
  const DenseMatrix gd = to_dense(g);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = i == j ? shift : 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += gd(k, i) * gd(k, j);
      if (acc != 0.0) t.push_back({i, j, acc});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

inline QuasiNewtonHessian random_quasi_newton(Rng& rng, std::size_t n, std::size_t k) {
  QuasiNewtonHessian h;
  h.h0_diag.resize(n);
  for (auto& d : h.h0_diag) d = rng.uniform(0.5, 2.0);
  h.u = rng.normal_vector(n * k);
  h.w.resize(k);
  for (auto& w : h.w) w = rng.uniform(0.1, 1.0);
  return h;
}

/// Hessian variant chosen by `kind` (0 diagonal, 1 sparse, 2 quasi-Newton).
inline Hessian random_hessian(Rng& rng, std::size_t n, int kind) {
  switch (kind % 3) {
    case 0: {
      Vector d(n);
      for (auto& v : d) v = rng.uniform(0.1, 3.0);
      return DiagonalHessian{d};
    }
    case 1: return SparseHessian{random_spd_sparse(rng, n, 0.3, 0.1)};
    default: return random_quasi_newton(rng, n, std::min<std::size_t>(4, n));
  }
}

/// Bounds with a mix of two-sided, one-sided and free entries around `center`.
inline Bounds random_bounds(Rng& rng, const Vector& center) {
  Bounds b = Bounds::unbounded(center.size());
  for (std::size_t i = 0; i < center.size(); ++i) {
    const double r = rng.uniform();
    const double lo = center[i] - rng.uniform(0.5, 3.0);
    const double hi = center[i] + rng.uniform(0.5, 3.0);
    if (r < 0.4) {
      b.lower[i] = lo;
      b.upper[i] = hi;
    } else if (r < 0.6) {
      b.lower[i] = lo;
    } else if (r < 0.8) {
      b.upper[i] = hi;
    }
  }
  return b;
}

/// Feasible convex QP: bounds are centred on a random point that also
/// defines b = C x_feas.
inline QpProblem random_qp(Rng& rng, const RandomQpShape& shape, int hessian_kind) {
  const std::size_t n = shape.n;
  const Vector x_feas = rng.normal_vector(n);
  SparseMatrix a = random_sparse(rng, shape.m_ineq, n, shape.density);
  SparseMatrix c = random_sparse(rng, shape.m_eq, n, shape.density);
  const Vector ax = spmv(a, x_feas);
  Vector b = spmv(c, x_feas);
  return make_problem(random_hessian(rng, n, hessian_kind), rng.normal_vector(n),
                      random_bounds(rng, x_feas), std::move(a), random_bounds(rng, ax),
                      std::move(c), std::move(b));
}

/// Random shape within the limits used by the oracle-equivalence checks.
inline RandomQpShape random_shape(Rng& rng, std::size_t max_n = 30, std::size_t max_ineq = 20,
                                  std::size_t max_eq = 5) {
  RandomQpShape s;
  s.n = rng.index(2, max_n);
  s.m_ineq = rng.index(0, max_ineq);
  s.m_eq = rng.index(0, std::min(max_eq, s.n - 1));
  s.density = rng.uniform(0.15, 0.6);
  return s;
}

/// Strictly interior iterate with slacks and multipliers drawn log-uniformly
/// from [lo, hi].
inline IterateState random_state(Rng& rng, const QpProblem& qp, double lo = 0.1,
                                 double hi = 10.0) {
  const BoundIndexMap map = BoundIndexMap::from_problem(qp);
  auto positive = [&](std::size_t k) {
    Vector v(k);
    for (auto& e : v) e = rng.log_uniform(lo, hi);
    return v;
  };
  IterateState st;
  st.x = rng.normal_vector(qp.n);
  st.s_lA = positive(map.lin_lower.size());
  st.s_uA = positive(map.lin_upper.size());
  st.s_lx = positive(map.var_lower.size());
  st.s_ux = positive(map.var_upper.size());
  st.lam_lA = positive(map.lin_lower.size());
  st.lam_uA = positive(map.lin_upper.size());
  st.lam_lx = positive(map.var_lower.size());
  st.lam_ux = positive(map.var_upper.size());
  st.lam_e = rng.normal_vector(qp.m_eq());
  st.mu = rng.log_uniform(1e-2, 1.0);
  return st;
}

}  // namespace kipm::testing
