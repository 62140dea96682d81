#pragma once

// Binary SVM training through the dual QP
//
//   min 1/2 a'Ha - e'a   s.t.  y'a = 0,  0 <= a <= c,
//
// with H_ij = y_i y_j K(x_i, x_j) and an RBF kernel.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kipm/model.hpp"

namespace kipm::svm {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  ParseError(const std::string& what) : std::runtime_error(what) {}

  /// 1-based line number, 0 when the error is not tied to a line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

class DatasetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sparse feature vector with 0-based, strictly increasing indices.
struct SparseVector {
  std::vector<std::size_t> indices;
  std::vector<double> values;
};

struct SvmDataset {
  std::vector<SparseVector> samples;
  std::vector<int> labels;
  std::size_t n_features = 0;

  std::size_t size() const { return samples.size(); }
};

struct SvmConfig {
  double sigma = 1.0;
  double c = 1.0;
};

struct SvmModel {
  std::vector<double> alpha;
  double bias = 0.0;
  std::vector<std::size_t> support_indices;
  const SvmDataset* data = nullptr;
  double sigma = 1.0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

/// Reads LIBSVM lines "<label> <idx>:<val> ...". Labels must be +1 or -1 and
/// indices (1-based in the text) strictly increasing within a line.
inline SvmDataset parse_libsvm(std::istream& in) {
  SvmDataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view rest = detail::trim(line);
    if (rest.empty()) continue;

    auto next_token = [&rest]() {
      const auto ws = " \t";
      const auto e = rest.find_first_of(ws);
      std::string_view tok = rest.substr(0, e);
      rest = e == std::string_view::npos ? std::string_view{} : rest.substr(e);
      const auto b = rest.find_first_not_of(ws);
      rest = b == std::string_view::npos ? std::string_view{} : rest.substr(b);
      return tok;
    };

    const std::string_view label_tok = next_token();
    double label = 0.0;
    if (!detail::parse_double(label_tok, label)) {
      throw ParseError(lineno, "malformed label '" + std::string(label_tok) + "'");
    }
    if (label != 1.0 && label != -1.0) {
      throw ParseError(lineno, "non-binary label '" + std::string(label_tok) +
                                   "' (expected +1 or -1)");
    }

    SparseVector sample;
    while (!rest.empty()) {
      const std::string_view tok = next_token();
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == tok.size()) {
        throw ParseError(lineno, "malformed feature '" + std::string(tok) + "'");
      }
      std::size_t idx = 0;
      const auto idx_tok = tok.substr(0, colon);
      auto [ptr, ec] = std::from_chars(idx_tok.data(), idx_tok.data() + idx_tok.size(), idx);
      if (ec != std::errc() || ptr != idx_tok.data() + idx_tok.size() || idx == 0) {
        throw ParseError(lineno, "malformed feature index '" + std::string(idx_tok) + "'");
      }
      double value = 0.0;
      if (!detail::parse_double(tok.substr(colon + 1), value) || !std::isfinite(value)) {
        throw ParseError(lineno, "malformed feature value '" + std::string(tok) + "'");
      }
      if (!sample.indices.empty() && idx - 1 <= sample.indices.back()) {
        throw ParseError(lineno, "feature indices must be strictly increasing");
      }
      sample.indices.push_back(idx - 1);
      sample.values.push_back(value);
      data.n_features = std::max(data.n_features, idx);
    }
    data.samples.push_back(std::move(sample));
    data.labels.push_back(label > 0 ? 1 : -1);
  }
  if (data.samples.empty()) throw ParseError("no samples");
  return data;
}

inline SvmDataset parse_libsvm(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in);
}

/// Throws DatasetError unless both classes are present.
inline void require_binary_classes(const SvmDataset& data) {
  const bool pos = std::find(data.labels.begin(), data.labels.end(), 1) != data.labels.end();
  const bool neg = std::find(data.labels.begin(), data.labels.end(), -1) != data.labels.end();
  if (!pos || !neg) {
    throw DatasetError("dataset needs samples of both classes");
  }
}

/// Squared Euclidean distance of two sparse vectors by merged iteration.
inline double squared_distance(const SparseVector& a, const SparseVector& b) {
  double acc = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.indices.size() || j < b.indices.size()) {
    if (j == b.indices.size() || (i < a.indices.size() && a.indices[i] < b.indices[j])) {
      acc += a.values[i] * a.values[i];
      ++i;
    } else if (i == a.indices.size() || b.indices[j] < a.indices[i]) {
      acc += b.values[j] * b.values[j];
      ++j;
    } else {
      const double d = a.values[i] - b.values[j];
      acc += d * d;
      ++i;
      ++j;
    }
  }
  return acc;
}

/// exp(-||xi - xj||^2 / (2 sigma))
inline double rbf_kernel(const SparseVector& xi, const SparseVector& xj, double sigma) {
  return std::exp(-squared_distance(xi, xj) / (2.0 * sigma));
}

inline constexpr std::size_t kMaxDenseSamples = 20000;

/// Dual QP with the kernel Hessian precomputed and stored explicitly.
inline QpProblem build_svm_dual(const SvmDataset& data, const SvmConfig& cfg,
                                std::size_t max_samples = kMaxDenseSamples) {
  if (!(cfg.sigma > 0.0) || !(cfg.c > 0.0)) {
    throw std::invalid_argument("sigma and c must be positive");
  }
  require_binary_classes(data);
  const std::size_t n = data.size();
  if (n > max_samples) {
    throw std::length_error("build_svm_dual: " + std::to_string(n) +
                            " samples exceed the dense Hessian cap of " +
                            std::to_string(max_samples));
  }

  // Each unordered pair is evaluated once and mirrored, so H is exactly
  // symmetric.
  std::vector<double> h(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    h[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = data.labels[i] * data.labels[j] *
                       rbf_kernel(data.samples[i], data.samples[j], cfg.sigma);
      h[i * n + j] = v;
      h[j * n + i] = v;
    }
  }
  std::vector<std::size_t> offsets(n + 1);
  std::vector<std::size_t> cols(n * n);
  for (std::size_t i = 0; i <= n; ++i) offsets[i] = i * n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cols[i * n + j] = j;
  }

  std::vector<Triplet> eq;
  eq.reserve(n);
  for (std::size_t i = 0; i < n; ++i) eq.push_back({0, i, double(data.labels[i])});

  return make_problem(
      SparseHessian{SparseMatrix(n, n, std::move(offsets), std::move(cols), std::move(h))},
      Vector(n, -1.0), Bounds::box(n, 0.0, cfg.c), SparseMatrix(0, n), Bounds{},
      SparseMatrix::from_triplets(1, n, std::move(eq)), Vector{0.0});
}

/// f(x) - b = sum over the given indices of alpha_i y_i K(x_i, x)
inline double decision_sum(const SvmDataset& data, std::span<const double> alpha,
                           std::span<const std::size_t> support, double sigma,
                           const SparseVector& x) {
  double acc = 0.0;
  for (auto i : support) acc += alpha[i] * data.labels[i] * rbf_kernel(data.samples[i], x, sigma);
  return acc;
}

/// Recovers the bias from a dual solution. Free support vectors
/// (tau < alpha < c - tau, tau = 1e-5 c) give y_j - g_j directly and are
/// averaged; without any, the bias is the midpoint of the interval implied by
/// the bounded ones.
inline SvmModel extract_model(const SvmDataset& data, const SvmConfig& cfg,
                              std::span<const double> alpha) {
  if (alpha.size() != data.size()) {
    throw DimensionError("extract_model: alpha length differs from sample count");
  }
  const double tau = 1e-5 * cfg.c;
  SvmModel model;
  model.alpha.assign(alpha.begin(), alpha.end());
  model.data = &data;
  model.sigma = cfg.sigma;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] > tau) model.support_indices.push_back(i);
  }
  if (model.support_indices.empty()) {
    throw std::runtime_error("degenerate model: no support vectors");
  }

  double free_sum = 0.0;
  std::size_t free_count = 0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < data.size(); ++j) {
    const double g =
        decision_sum(data, alpha, model.support_indices, cfg.sigma, data.samples[j]);
    const int y = data.labels[j];
    if (alpha[j] > tau && alpha[j] < cfg.c - tau) {
      free_sum += y - g;
      ++free_count;
    } else if (alpha[j] <= tau) {
      // y f(x_j) >= 1
      if (y > 0) lower = std::max(lower, 1.0 - g);
      else upper = std::min(upper, -1.0 - g);
    } else {
      // y f(x_j) <= 1
      if (y > 0) upper = std::min(upper, 1.0 - g);
      else lower = std::max(lower, -1.0 - g);
    }
  }
  if (free_count > 0) {
    model.bias = free_sum / double(free_count);
  } else if (std::isfinite(lower) && std::isfinite(upper)) {
    model.bias = 0.5 * (lower + upper);
  } else {
    model.bias = std::isfinite(lower) ? lower : upper;
  }
  return model;
}

struct Prediction {
  double score;
  int label;
};

inline Prediction predict(const SvmModel& model, const SparseVector& x) {
  const double score =
      model.bias +
      decision_sum(*model.data, model.alpha, model.support_indices, model.sigma, x);
  return {score, score >= 0.0 ? 1 : -1};
}

}  // namespace kipm::svm
