#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "kipm/model.hpp"

namespace kipm {

// ---------------------------------------------------------------------------
// Vector kernels
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------
// Sparse products
// ---------------------------------------------------------------------------

inline void spmv(const SparseMatrix& m, std::span<const double> x, std::span<double> y) {
  if (x.size() != m.cols() || y.size() != m.rows()) {
    throw DimensionError("spmv: dimension mismatch");
  }
  const auto offs = m.row_offsets();
  const auto cols = m.col_indices();
  const auto vals = m.values();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double acc = 0.0;
    for (auto k = offs[i]; k < offs[i + 1]; ++k) acc += vals[k] * x[cols[k]];
    y[i] = acc;
  }
}

inline Vector spmv(const SparseMatrix& m, std::span<const double> x) {
  Vector y(m.rows());
  spmv(m, x, y);
  return y;
}

/// y = M' x, scattered row by row.
inline void spmv_transpose(const SparseMatrix& m, std::span<const double> x,
                           std::span<double> y) {
  if (x.size() != m.rows() || y.size() != m.cols()) {
    throw DimensionError("spmv_transpose: dimension mismatch");
  }
  std::fill(y.begin(), y.end(), 0.0);
  const auto offs = m.row_offsets();
  const auto cols = m.col_indices();
  const auto vals = m.values();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (auto k = offs[i]; k < offs[i + 1]; ++k) y[cols[k]] += vals[k] * xi;
  }
}

inline Vector spmv_transpose(const SparseMatrix& m, std::span<const double> x) {
  Vector y(m.cols());
  spmv_transpose(m, x, y);
  return y;
}

// ---------------------------------------------------------------------------
// Dense matrices (reference oracles only; never on the iterative path)
// ---------------------------------------------------------------------------

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> data() const { return data_; }

  Vector apply(std::span<const double> x) const {
    if (x.size() != cols_) throw DimensionError("dense apply: dimension mismatch");
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) acc += data_[i * cols_ + j] * x[j];
      y[i] = acc;
    }
    return y;
  }

  double max_abs() const { return norm_inf(data_); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

inline DenseMatrix to_dense(const SparseMatrix& m) {
  DenseMatrix d(m.rows(), m.cols());
  for (const auto& t : m.to_triplets()) d(t.row, t.col) = t.value;
  return d;
}

/// Materializes any Hessian variant; test oracles and small problems only.
inline DenseMatrix to_dense(const Hessian& h) {
  const std::size_t n = hessian_dim(h);
  DenseMatrix d(n, n);
  Vector e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    hessian_apply(h, e, col);
    for (std::size_t i = 0; i < n; ++i) d(i, j) = col[i];
    e[j] = 0.0;
  }
  return d;
}

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gaussian elimination with scaled partial pivoting: each candidate pivot is
/// measured against the largest entry of its original row, so row scaling
/// does not change pivot choice. Throws SingularMatrixError when the best
/// scaled pivot is below n * eps.
inline Vector dense_solve(DenseMatrix m, Vector rhs) {
  const std::size_t n = m.rows();
  if (m.cols() != n || rhs.size() != n) {
    throw DimensionError("dense_solve: matrix must be square and match rhs");
  }
  const auto singular = [] {
    return SingularMatrixError("dense_solve: matrix is singular to working precision");
  };
  Vector scale(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) scale[i] = std::max(scale[i], std::abs(m(i, j)));
    if (!(scale[i] > 0.0)) throw singular();
  }
  const double floor = double(n) * std::numeric_limits<double>::epsilon();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(m(k, k)) / scale[k];
    for (std::size_t i = k + 1; i < n; ++i) {
      const double r = std::abs(m(i, k)) / scale[i];
      if (r > best) {
        best = r;
        piv = i;
      }
    }
    if (!(best > floor)) throw singular();
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
      std::swap(rhs[k], rhs[piv]);
      std::swap(scale[k], scale[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = m(i, k) / m(k, k);
      if (f == 0.0) continue;
      m(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) m(i, j) -= f * m(k, j);
      rhs[i] -= f * rhs[k];
    }
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double acc = rhs[ii];
    for (std::size_t j = ii + 1; j < n; ++j) acc -= m(ii, j) * x[j];
    x[ii] = acc / m(ii, ii);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Preconditioned conjugate gradients
// ---------------------------------------------------------------------------

struct PcgConfig {
  double tol = 1e-7;
  std::size_t max_iters = 5000;
  bool tol_is_relative = true;
};

enum class PcgStatus { Converged, MaxIterations, Breakdown };

struct PcgResult {
  Vector solution;
  std::size_t iterations = 0;
  double final_residual_norm = 0.0;
  bool converged = false;
  PcgStatus status = PcgStatus::MaxIterations;
};

using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

/// Solves Op x = rhs for SPD Op, with apply_prec applying the inverse of an SPD
/// preconditioner. Convergence is measured on the unpreconditioned residual
/// ||rhs - Op x||_2; the recurrence residual drives the loop and is replaced
/// by an explicitly recomputed one before convergence is declared.
///
/// Returns the iterate with the smallest residual seen. A non-positive
/// curvature p'Op p stops the solve with PcgStatus::Breakdown.
template <typename Op, typename Prec>
PcgResult pcg(Op&& apply_op, Prec&& apply_prec, std::span<const double> rhs,
              const PcgConfig& cfg, std::span<const double> x0 = {}) {
  if (!(cfg.tol > 0.0) || cfg.max_iters < 1) {
    throw std::invalid_argument("pcg: tol must be positive and max_iters >= 1");
  }
  const std::size_t n = rhs.size();
  if (!x0.empty() && x0.size() != n) throw DimensionError("pcg: x0 size mismatch");

  PcgResult out;
  Vector x = x0.empty() ? Vector(n, 0.0) : Vector(x0.begin(), x0.end());
  Vector r(n), z(n), p(n), q(n);

  const double threshold = cfg.tol_is_relative ? cfg.tol * norm2(rhs) : cfg.tol;

  auto true_residual = [&](std::span<const double> xs, std::span<double> res) {
    apply_op(xs, std::span<double>(q));
    for (std::size_t i = 0; i < n; ++i) res[i] = rhs[i] - q[i];
  };

  if (x0.empty()) {
    std::copy(rhs.begin(), rhs.end(), r.begin());
  } else {
    true_residual(x, r);
  }
  double rnorm = norm2(r);
  Vector best = x;
  double best_norm = rnorm;

  if (rnorm <= threshold) {
    out.solution = std::move(x);
    out.final_residual_norm = rnorm;
    out.converged = true;
    out.status = PcgStatus::Converged;
    return out;
  }

  apply_prec(std::span<const double>(r), std::span<double>(z));
  p = z;
  double rz = dot(r, z);

  std::size_t it = 0;
  out.status = PcgStatus::MaxIterations;
  while (it < cfg.max_iters) {
    apply_op(std::span<const double>(p), std::span<double>(q));
    const double curvature = dot(p, q);
    if (!(curvature > 0.0)) {
      out.status = PcgStatus::Breakdown;
      break;
    }
    ++it;
    const double alpha = rz / curvature;
    axpy(alpha, p, x);
    axpy(-alpha, q, r);
    rnorm = norm2(r);

    if (rnorm <= threshold) {
      // Guard against drift of the recurrence residual.
      true_residual(x, r);
      rnorm = norm2(r);
      if (rnorm < best_norm) {
        best = x;
        best_norm = rnorm;
      }
      if (rnorm <= threshold) {
        out.status = PcgStatus::Converged;
        break;
      }
      // Restart the search direction from the true residual.
      apply_prec(std::span<const double>(r), std::span<double>(z));
      p = z;
      rz = dot(r, z);
      continue;
    }
    if (rnorm < best_norm) {
      best = x;
      best_norm = rnorm;
    }

    apply_prec(std::span<const double>(r), std::span<double>(z));
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }

  out.iterations = it;
  out.converged = out.status == PcgStatus::Converged;
  if (out.converged) {
    out.solution = std::move(x);
    out.final_residual_norm = rnorm;
  } else {
    out.solution = std::move(best);
    out.final_residual_norm = best_norm;
  }
  return out;
}

/// Preconditioner applying diag(d)^{-1}.
struct JacobiPreconditioner {
  Vector inv_diag;

  explicit JacobiPreconditioner(std::span<const double> diag) : inv_diag(diag.size()) {
    for (std::size_t i = 0; i < diag.size(); ++i) inv_diag[i] = 1.0 / diag[i];
  }
  void operator()(std::span<const double> r, std::span<double> z) const {
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = inv_diag[i] * r[i];
  }
};

struct IdentityPreconditioner {
  void operator()(std::span<const double> r, std::span<double> z) const {
    std::copy(r.begin(), r.end(), z.begin());
  }
};

}  // namespace kipm
