#pragma once

/// Problem representation for convex quadratic programs
///
///   min  1/2 x'Hx + p'x
///   s.t. l  <= Ax <= u
///        Cx  = b
///        lx <=  x <= ux
///
/// Bounds are extended reals; an infinite side simply has no barrier term.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

namespace kipm {

using Vector = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Coordinate triplet used to build a SparseMatrix.
struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed-row sparse matrix.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  /// Empty (all-zero) matrix of the given shape.
  SparseMatrix(std::size_t n_rows, std::size_t n_cols)
      : n_rows_(n_rows), n_cols_(n_cols), row_offsets_(n_rows + 1, 0) {}

  /// Takes ownership of raw CSR arrays and checks the layout invariants.
  SparseMatrix(std::size_t n_rows, std::size_t n_cols,
               std::vector<std::size_t> row_offsets,
               std::vector<std::size_t> col_indices, Vector values)
      : n_rows_(n_rows),
        n_cols_(n_cols),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    check_layout();
  }

  /// Builds from coordinate triplets. Duplicate entries are summed.
  static SparseMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                    std::vector<Triplet> entries) {
    for (const auto& t : entries) {
      if (t.row >= n_rows || t.col >= n_cols) {
        std::ostringstream msg;
        msg << "triplet (" << t.row << ", " << t.col
            << ") out of range for " << n_rows << "x" << n_cols << " matrix";
        throw DimensionError(msg.str());
      }
    }
    std::sort(entries.begin(), entries.end(),
              [](const Triplet& a, const Triplet& b) {
                return std::tie(a.row, a.col) < std::tie(b.row, b.col);
              });
    std::vector<std::size_t> offsets(n_rows + 1, 0);
    std::vector<std::size_t> cols;
    Vector vals;
    cols.reserve(entries.size());
    vals.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& t = entries[k];
      const bool same_as_prev =
          !cols.empty() && k > 0 && entries[k - 1].row == t.row &&
          entries[k - 1].col == t.col;
      if (same_as_prev) {
        vals.back() += t.value;
      } else {
        cols.push_back(t.col);
        vals.push_back(t.value);
        ++offsets[t.row + 1];
      }
    }
    for (std::size_t i = 0; i < n_rows; ++i) offsets[i + 1] += offsets[i];
    return SparseMatrix(n_rows, n_cols, std::move(offsets), std::move(cols),
                        std::move(vals));
  }

  static SparseMatrix identity(std::size_t n) {
    std::vector<Triplet> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(t));
  }

  std::size_t rows() const { return n_rows_; }
  std::size_t cols() const { return n_cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  std::span<const std::size_t> col_indices() const { return col_indices_; }
  std::span<const double> values() const { return values_; }

  /// Column indices and values of one row.
  std::pair<std::span<const std::size_t>, std::span<const double>> row(
      std::size_t i) const {
    const auto b = row_offsets_[i];
    const auto e = row_offsets_[i + 1];
    return {std::span<const std::size_t>(col_indices_).subspan(b, e - b),
            std::span<const double>(values_).subspan(b, e - b)};
  }

  /// Entry lookup by binary search within the row; zero when not stored.
  double at(std::size_t i, std::size_t j) const {
    auto [c, v] = row(i);
    auto it = std::lower_bound(c.begin(), c.end(), j);
    if (it == c.end() || *it != j) return 0.0;
    return v[static_cast<std::size_t>(it - c.begin())];
  }

  std::vector<Triplet> to_triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::size_t i = 0; i < n_rows_; ++i) {
      for (auto k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        out.push_back({i, col_indices_[k], values_[k]});
      }
    }
    return out;
  }

 private:
  void check_layout() const {
    if (row_offsets_.size() != n_rows_ + 1 || row_offsets_.front() != 0 ||
        row_offsets_.back() != values_.size() ||
        col_indices_.size() != values_.size()) {
      throw DimensionError("inconsistent compressed-row arrays");
    }
    for (std::size_t i = 0; i < n_rows_; ++i) {
      if (row_offsets_[i] > row_offsets_[i + 1]) {
        throw DimensionError("row offsets must be nondecreasing");
      }
      for (auto k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        if (col_indices_[k] >= n_cols_) {
          throw DimensionError("column index out of range");
        }
        if (k > row_offsets_[i] && col_indices_[k] <= col_indices_[k - 1]) {
          throw DimensionError("column indices must increase within a row");
        }
      }
    }
  }

  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  Vector values_;
};

/// H = diag(d).
struct DiagonalHessian {
  Vector d;
};

/// Explicit symmetric sparse matrix (both triangles stored).
struct SparseHessian {
  SparseMatrix m;
};

/// Limited-memory quasi-Newton form H = diag(h0_diag) + U diag(w) U'.
///
/// U holds k update vectors of length n, stored column after column, so
/// column j occupies u[j*n .. (j+1)*n). k = 0 means H = H0.
struct QuasiNewtonHessian {
  Vector h0_diag;
  Vector u;
  Vector w;

  std::size_t n() const { return h0_diag.size(); }
  std::size_t k() const { return w.size(); }
  std::span<const double> column(std::size_t j) const {
    return std::span<const double>(u).subspan(j * n(), n());
  }
};

using Hessian = std::variant<DiagonalHessian, SparseHessian, QuasiNewtonHessian>;

inline std::size_t hessian_dim(const Hessian& h) {
  return std::visit(
      [](const auto& v) -> std::size_t {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DiagonalHessian>) {
          return v.d.size();
        } else if constexpr (std::is_same_v<T, SparseHessian>) {
          return v.m.rows();
        } else {
          return v.n();
        }
      },
      h);
}

/// out = H v, never forming H for the quasi-Newton variant.
inline void hessian_apply(const Hessian& h, std::span<const double> v,
                          std::span<double> out) {
  const std::size_t n = hessian_dim(h);
  if (v.size() != n || out.size() != n) {
    throw DimensionError("hessian_apply: vector length does not match Hessian");
  }
  std::visit(
      [&](const auto& hv) {
        using T = std::decay_t<decltype(hv)>;
        if constexpr (std::is_same_v<T, DiagonalHessian>) {
          for (std::size_t i = 0; i < n; ++i) out[i] = hv.d[i] * v[i];
        } else if constexpr (std::is_same_v<T, SparseHessian>) {
          const auto offs = hv.m.row_offsets();
          const auto cols = hv.m.col_indices();
          const auto vals = hv.m.values();
          for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (auto k = offs[i]; k < offs[i + 1]; ++k) acc += vals[k] * v[cols[k]];
            out[i] = acc;
          }
        } else {
          for (std::size_t i = 0; i < n; ++i) out[i] = hv.h0_diag[i] * v[i];
          for (std::size_t j = 0; j < hv.k(); ++j) {
            const auto col = hv.column(j);
            double proj = 0.0;
            for (std::size_t i = 0; i < n; ++i) proj += col[i] * v[i];
            proj *= hv.w[j];
            for (std::size_t i = 0; i < n; ++i) out[i] += proj * col[i];
          }
        }
      },
      h);
}

inline Vector hessian_apply(const Hessian& h, std::span<const double> v) {
  Vector out(hessian_dim(h));
  hessian_apply(h, v, out);
  return out;
}

inline Vector hessian_diagonal(const Hessian& h) {
  return std::visit(
      [](const auto& hv) -> Vector {
        using T = std::decay_t<decltype(hv)>;
        if constexpr (std::is_same_v<T, DiagonalHessian>) {
          return hv.d;
        } else if constexpr (std::is_same_v<T, SparseHessian>) {
          Vector d(hv.m.rows(), 0.0);
          for (std::size_t i = 0; i < d.size(); ++i) d[i] = hv.m.at(i, i);
          return d;
        } else {
          Vector d = hv.h0_diag;
          for (std::size_t j = 0; j < hv.k(); ++j) {
            const auto col = hv.column(j);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += hv.w[j] * col[i] * col[i];
          }
          return d;
        }
      },
      h);
}

/// Two-sided extended-real bounds; -inf / +inf mark a missing side.
struct Bounds {
  Vector lower;
  Vector upper;

  static Bounds unbounded(std::size_t n) {
    return {Vector(n, -kInf), Vector(n, kInf)};
  }
  static Bounds box(std::size_t n, double lo, double hi) {
    return {Vector(n, lo), Vector(n, hi)};
  }
  std::size_t size() const { return lower.size(); }
};

struct QpProblem {
  std::size_t n = 0;
  Hessian hessian;
  Vector p;
  SparseMatrix a;
  Bounds lin_bounds;
  SparseMatrix c;
  Vector b;
  Bounds var_bounds;

  std::size_t m_ineq() const { return a.rows(); }
  std::size_t m_eq() const { return c.rows(); }
};

/// Fills in empty constraint blocks with correctly shaped empty matrices so
/// callers only need to specify what the problem actually has.
inline QpProblem make_problem(Hessian h, Vector p, Bounds var_bounds,
                              SparseMatrix a = {}, Bounds lin_bounds = {},
                              SparseMatrix c = {}, Vector b = {}) {
  QpProblem qp;
  qp.n = p.size();
  qp.hessian = std::move(h);
  qp.p = std::move(p);
  qp.a = a.rows() == 0 && a.cols() == 0 ? SparseMatrix(0, qp.n) : std::move(a);
  qp.lin_bounds = std::move(lin_bounds);
  qp.c = c.rows() == 0 && c.cols() == 0 ? SparseMatrix(0, qp.n) : std::move(c);
  qp.b = std::move(b);
  qp.var_bounds = std::move(var_bounds);
  return qp;
}

inline double quadratic_objective(const QpProblem& qp, std::span<const double> x) {
  const Vector hx = hessian_apply(qp.hessian, x);
  double obj = 0.0;
  for (std::size_t i = 0; i < qp.n; ++i) obj += 0.5 * x[i] * hx[i] + qp.p[i] * x[i];
  return obj;
}

enum class ViolationKind {
  DimensionMismatch,
  InvertedBound,
  NonFinite,
  EmptyVariableSpace,
  AsymmetricHessian,
  NoConstraints,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::DimensionMismatch: return "dimension mismatch";
    case ViolationKind::InvertedBound: return "inverted bound";
    case ViolationKind::NonFinite: return "non-finite data";
    case ViolationKind::EmptyVariableSpace: return "empty variable space";
    case ViolationKind::AsymmetricHessian: return "asymmetric hessian";
    case ViolationKind::NoConstraints: return "no constraints";
  }
  return "unknown";
}

namespace detail {

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline void check_bounds(const Bounds& bnd, std::size_t expect, const char* name,
                         ValidationReport& report) {
  if (bnd.lower.size() != expect || bnd.upper.size() != expect) {
    std::ostringstream msg;
    msg << name << ": expected " << expect << " entries, got lower="
        << bnd.lower.size() << " upper=" << bnd.upper.size();
    report.push_back({ViolationKind::DimensionMismatch, msg.str()});
    return;
  }
  for (std::size_t i = 0; i < expect; ++i) {
    const double lo = bnd.lower[i];
    const double hi = bnd.upper[i];
    if (std::isnan(lo) || std::isnan(hi)) {
      std::ostringstream msg;
      msg << name << "[" << i << "] is NaN";
      report.push_back({ViolationKind::NonFinite, msg.str()});
    } else if (lo > hi || lo == kInf || hi == -kInf) {
      std::ostringstream msg;
      msg << name << "[" << i << "]: lower " << lo << " exceeds upper " << hi;
      report.push_back({ViolationKind::InvertedBound, msg.str()});
    }
  }
}

}  // namespace detail

inline ValidationReport validate_problem(const QpProblem& qp) {
  ValidationReport report;
  auto mismatch = [&](const std::string& what) {
    report.push_back({ViolationKind::DimensionMismatch, what});
  };

  if (qp.n == 0) {
    report.push_back({ViolationKind::EmptyVariableSpace, "problem has no variables"});
  }
  if (hessian_dim(qp.hessian) != qp.n) mismatch("hessian dimension differs from n");
  if (qp.p.size() != qp.n) mismatch("p length differs from n");
  if (qp.a.cols() != qp.n) mismatch("A column count differs from n");
  if (qp.c.cols() != qp.n) mismatch("C column count differs from n");
  if (qp.b.size() != qp.c.rows()) mismatch("b length differs from C row count");

  std::visit(
      [&](const auto& h) {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, DiagonalHessian>) {
          if (!detail::all_finite(h.d)) {
            report.push_back({ViolationKind::NonFinite, "hessian diagonal"});
          }
        } else if constexpr (std::is_same_v<T, SparseHessian>) {
          if (h.m.rows() != h.m.cols()) {
            mismatch("sparse hessian is not square");
            return;
          }
          if (!detail::all_finite(h.m.values())) {
            report.push_back({ViolationKind::NonFinite, "hessian entries"});
            return;
          }
          for (const auto& t : h.m.to_triplets()) {
            const double mirror = h.m.at(t.col, t.row);
            const double scale = std::max(std::abs(t.value), std::abs(mirror));
            if (std::abs(t.value - mirror) > 1e-12 * scale) {
              std::ostringstream msg;
              msg << "H(" << t.row << "," << t.col << ") != H(" << t.col << ","
                  << t.row << ")";
              report.push_back({ViolationKind::AsymmetricHessian, msg.str()});
              return;
            }
          }
        } else {
          if (h.u.size() != h.n() * h.k()) {
            mismatch("quasi-Newton update matrix size differs from n*k");
          }
          if (!detail::all_finite(h.h0_diag) || !detail::all_finite(h.u) ||
              !detail::all_finite(h.w)) {
            report.push_back({ViolationKind::NonFinite, "quasi-Newton data"});
          }
        }
      },
      qp.hessian);

  if (!detail::all_finite(qp.p)) report.push_back({ViolationKind::NonFinite, "p"});
  if (!detail::all_finite(qp.b)) report.push_back({ViolationKind::NonFinite, "b"});
  if (!detail::all_finite(qp.a.values())) report.push_back({ViolationKind::NonFinite, "A"});
  if (!detail::all_finite(qp.c.values())) report.push_back({ViolationKind::NonFinite, "C"});

  detail::check_bounds(qp.lin_bounds, qp.a.rows(), "linear bounds", report);
  detail::check_bounds(qp.var_bounds, qp.n, "variable bounds", report);

  auto has_finite = [](const Bounds& bnd) {
    for (std::size_t i = 0; i < bnd.size(); ++i) {
      if (std::isfinite(bnd.lower[i]) || std::isfinite(bnd.upper[i])) return true;
    }
    return false;
  };
  if (qp.c.rows() == 0 && !has_finite(qp.lin_bounds) && !has_finite(qp.var_bounds) &&
      qp.lin_bounds.lower.size() == qp.a.rows() && qp.var_bounds.lower.size() == qp.n &&
      qp.n > 0) {
    report.push_back({ViolationKind::NoConstraints,
                      "no finite bound or equality constraint; nothing for the barrier to act on"});
  }
  return report;
}

}  // namespace kipm
