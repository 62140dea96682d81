#pragma once

// Text formats: the JSON problem document, the per-iteration trace CSV and
// the solution / model documents written by the command-line tool.
//
// Problem document members (A, l, u, C, b, lx, ux are optional):
//
//   { "n": 2,
//     "hessian": {"kind": "diagonal", "d": [1, 1]}
//              | {"kind": "coo", "rows": [...], "cols": [...], "vals": [...]}
//              | {"kind": "bfgs", "h0_diag": [...], "u": [[...k], ...n], "w": [...k]},
//     "p": [0, 0],
//     "A": {"rows": [...], "cols": [...], "vals": [...]}, "l": [...], "u": [...],
//     "C": {"rows": [...], "cols": [...], "vals": [...]}, "b": [...],
//     "lx": [0, null], "ux": [null, 10] }
//
// Coordinate indices are 0-based; a null bound entry is an unbounded side.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "kipm/ipm.hpp"
#include "kipm/model.hpp"

namespace kipm::io {

using Json = nlohmann::json;

/// Malformed problem document; member() names the offending member.
class QpFileError : public std::runtime_error {
 public:
  QpFileError(std::string member, const std::string& what)
      : std::runtime_error(member + ": " + what), member_(std::move(member)) {}
  const std::string& member() const { return member_; }

 private:
  std::string member_;
};

namespace detail {

inline const Json& require(const Json& doc, const std::string& key, const std::string& path) {
  if (!doc.is_object() || !doc.contains(key)) throw QpFileError(path + key, "missing member");
  return doc.at(key);
}

inline double to_real(const Json& v, const std::string& member) {
  if (!v.is_number()) throw QpFileError(member, "expected a number");
  return v.get<double>();
}

inline Vector real_array(const Json& v, const std::string& member) {
  if (!v.is_array()) throw QpFileError(member, "expected an array of numbers");
  Vector out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(to_real(v[i], member + "[" + std::to_string(i) + "]"));
  }
  return out;
}

/// Bound array where null marks an infinite side.
inline Vector bound_array(const Json& v, const std::string& member, double missing) {
  if (!v.is_array()) throw QpFileError(member, "expected an array of numbers or nulls");
  Vector out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(v[i].is_null() ? missing
                                 : to_real(v[i], member + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline std::size_t index_of(const Json& v, const std::string& member) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw QpFileError(member, "expected a non-negative integer index");
  }
  return v.get<std::size_t>();
}

inline SparseMatrix coo_matrix(const Json& doc, std::size_t n_rows, std::size_t n_cols,
                               const std::string& member) {
  if (!doc.is_object()) throw QpFileError(member, "expected an object with rows/cols/vals");
  const Json& rows = require(doc, "rows", member + ".");
  const Json& cols = require(doc, "cols", member + ".");
  const Json& vals = require(doc, "vals", member + ".");
  if (!rows.is_array() || !cols.is_array() || !vals.is_array() || rows.size() != cols.size() ||
      rows.size() != vals.size()) {
    throw QpFileError(member, "rows, cols and vals must be arrays of equal length");
  }
  std::vector<Triplet> t;
  t.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::string at = member + "[" + std::to_string(k) + "]";
    const auto r = index_of(rows[k], member + ".rows[" + std::to_string(k) + "]");
    const auto c = index_of(cols[k], member + ".cols[" + std::to_string(k) + "]");
    if (r >= n_rows || c >= n_cols) {
      throw QpFileError(at, "entry (" + std::to_string(r) + ", " + std::to_string(c) +
                                ") outside " + std::to_string(n_rows) + "x" +
                                std::to_string(n_cols));
    }
    t.push_back({r, c, to_real(vals[k], member + ".vals[" + std::to_string(k) + "]")});
  }
  return SparseMatrix::from_triplets(n_rows, n_cols, std::move(t));
}

inline Hessian parse_hessian(const Json& doc, std::size_t n) {
  const std::string kind_member = "hessian.kind";
  const Json& kind = require(doc, "kind", "hessian.");
  if (!kind.is_string()) throw QpFileError(kind_member, "expected a string");
  const auto k = kind.get<std::string>();
  if (k == "diagonal") {
    return DiagonalHessian{real_array(require(doc, "d", "hessian."), "hessian.d")};
  }
  if (k == "coo") {
    return SparseHessian{coo_matrix(doc, n, n, "hessian")};
  }
  if (k == "bfgs") {
    QuasiNewtonHessian h;
    h.h0_diag = real_array(require(doc, "h0_diag", "hessian."), "hessian.h0_diag");
    h.w = real_array(require(doc, "w", "hessian."), "hessian.w");
    const Json& u = require(doc, "u", "hessian.");
    const std::size_t rank = h.w.size();
    if (!u.is_array() || u.size() != h.h0_diag.size()) {
      throw QpFileError("hessian.u", "expected n rows of k update coefficients");
    }
    h.u.assign(h.h0_diag.size() * rank, 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const std::string member = "hessian.u[" + std::to_string(i) + "]";
      const Vector row = real_array(u[i], member);
      if (row.size() != rank) throw QpFileError(member, "row length differs from len(w)");
      for (std::size_t j = 0; j < rank; ++j) h.u[j * h.h0_diag.size() + i] = row[j];
    }
    return h;
  }
  throw QpFileError(kind_member, "unknown kind '" + k + "' (diagonal, coo, bfgs)");
}

inline Json bound_json(const Vector& v) {
  Json arr = Json::array();
  for (double x : v) arr.push_back(std::isfinite(x) ? Json(x) : Json(nullptr));
  return arr;
}

inline Json coo_json(const SparseMatrix& m) {
  Json rows = Json::array(), cols = Json::array(), vals = Json::array();
  for (const auto& t : m.to_triplets()) {
    rows.push_back(t.row);
    cols.push_back(t.col);
    vals.push_back(t.value);
  }
  return Json{{"rows", rows}, {"cols", cols}, {"vals", vals}};
}

}  // namespace detail

/// Parses a problem document. Structural problems throw QpFileError; semantic
/// ones (inverted bounds, asymmetric H, ...) are left to validate_problem.
inline QpProblem parse_qp(const Json& doc) {
  if (!doc.is_object()) throw QpFileError("<document>", "expected a JSON object");
  QpProblem qp;
  qp.n = detail::index_of(detail::require(doc, "n", ""), "n");
  qp.hessian = detail::parse_hessian(detail::require(doc, "hessian", ""), qp.n);
  qp.p = detail::real_array(detail::require(doc, "p", ""), "p");

  Vector l, u;
  if (doc.contains("l")) l = detail::bound_array(doc["l"], "l", -kInf);
  if (doc.contains("u")) u = detail::bound_array(doc["u"], "u", kInf);
  if (doc.contains("l") != doc.contains("u")) {
    // A one-sided constraint block may list only one side.
    if (l.empty()) l.assign(u.size(), -kInf);
    if (u.empty()) u.assign(l.size(), kInf);
  }
  const std::size_t m_a = l.size();
  qp.a = doc.contains("A") ? detail::coo_matrix(doc["A"], m_a, qp.n, "A") : SparseMatrix(m_a, qp.n);
  qp.lin_bounds = {std::move(l), std::move(u)};

  qp.b = doc.contains("b") ? detail::real_array(doc["b"], "b") : Vector{};
  qp.c = doc.contains("C") ? detail::coo_matrix(doc["C"], qp.b.size(), qp.n, "C")
                           : SparseMatrix(qp.b.size(), qp.n);

  qp.var_bounds.lower =
      doc.contains("lx") ? detail::bound_array(doc["lx"], "lx", -kInf) : Vector(qp.n, -kInf);
  qp.var_bounds.upper =
      doc.contains("ux") ? detail::bound_array(doc["ux"], "ux", kInf) : Vector(qp.n, kInf);
  return qp;
}

inline QpProblem parse_qp(std::istream& in) {
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw QpFileError("<document>", e.what());
  }
  return parse_qp(doc);
}

inline QpProblem read_qp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_qp(in);
}

inline Json to_json(const QpProblem& qp) {
  Json doc;
  doc["n"] = qp.n;
  std::visit(
      [&](const auto& h) {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, DiagonalHessian>) {
          doc["hessian"] = Json{{"kind", "diagonal"}, {"d", h.d}};
        } else if constexpr (std::is_same_v<T, SparseHessian>) {
          Json hj = detail::coo_json(h.m);
          hj["kind"] = "coo";
          doc["hessian"] = hj;
        } else {
          Json rows = Json::array();
          for (std::size_t i = 0; i < h.n(); ++i) {
            Json row = Json::array();
            for (std::size_t j = 0; j < h.k(); ++j) row.push_back(h.column(j)[i]);
            rows.push_back(row);
          }
          doc["hessian"] = Json{{"kind", "bfgs"}, {"h0_diag", h.h0_diag}, {"u", rows}, {"w", h.w}};
        }
      },
      qp.hessian);
  doc["p"] = qp.p;
  if (qp.a.rows() > 0) {
    doc["A"] = detail::coo_json(qp.a);
    doc["l"] = detail::bound_json(qp.lin_bounds.lower);
    doc["u"] = detail::bound_json(qp.lin_bounds.upper);
  }
  if (qp.c.rows() > 0) {
    doc["C"] = detail::coo_json(qp.c);
    doc["b"] = qp.b;
  }
  doc["lx"] = detail::bound_json(qp.var_bounds.lower);
  doc["ux"] = detail::bound_json(qp.var_bounds.upper);
  return doc;
}

// ---------------------------------------------------------------------------
// Trace CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kTraceHeader =
    "iter,mu,primal_inf,dual_inf,compl_inf,cg_iters,cg_resid,alpha_x,alpha_lambda";

inline void write_trace(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << kTraceHeader << '\n';
  char buf[512];
  for (const auto& t : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.9e,%.9e,%.9e,%.9e,%zu,%.9e,%.9e,%.9e\n", t.iter, t.mu,
                  t.primal_inf, t.dual_inf, t.compl_inf, t.cg_iters, t.cg_resid, t.alpha_x,
                  t.alpha_lam);
    out << buf;
  }
}

inline std::vector<TraceRecord> read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw std::runtime_error("trace: missing or unexpected header");
  }
  std::vector<TraceRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    TraceRecord t;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 9) {
      throw std::runtime_error("trace line " + std::to_string(lineno) + ": expected 9 fields");
    }
    try {
      t.iter = std::stoul(fields[0]);
      t.mu = std::stod(fields[1]);
      t.primal_inf = std::stod(fields[2]);
      t.dual_inf = std::stod(fields[3]);
      t.compl_inf = std::stod(fields[4]);
      t.cg_iters = std::stoul(fields[5]);
      t.cg_resid = std::stod(fields[6]);
      t.alpha_x = std::stod(fields[7]);
      t.alpha_lam = std::stod(fields[8]);
    } catch (const std::logic_error&) {
      throw std::runtime_error("trace line " + std::to_string(lineno) + ": malformed number");
    }
    out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Result documents
// ---------------------------------------------------------------------------

inline Json solution_json(const SolveReport& r) {
  Json doc;
  doc["status"] = to_string(r.status);
  doc["x"] = r.x;
  doc["objective"] = r.objective;
  doc["iterations"] = r.trace.size();
  doc["mu"] = r.state.mu;
  if (!r.trace.empty()) {
    doc["primal_inf"] = r.trace.back().primal_inf;
    doc["dual_inf"] = r.trace.back().dual_inf;
    doc["compl_inf"] = r.trace.back().compl_inf;
  }
  doc["barrier_events"] = r.barrier_events;
  doc["linear_solver_events"] = r.linear_solver_events;
  doc["seconds"] = r.seconds;
  return doc;
}

inline void write_json_file(const std::string& path, const Json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

}  // namespace kipm::io
