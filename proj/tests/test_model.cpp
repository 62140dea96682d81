#include <gtest/gtest.h>

#include <cmath>

#include "kipm/linalg.hpp"
#include "kipm/model.hpp"
#include "support/dense_oracles.hpp"
#include "support/random_qp.hpp"

using namespace kipm;
using kipm::testing::Rng;

namespace {

QpProblem two_var_box() {
  return make_problem(DiagonalHessian{{1.0, 2.0}}, {0.0, 0.0}, Bounds::box(2, 0.0, 1.0));
}

bool has_kind(const ValidationReport& r, ViolationKind k) {
  for (const auto& v : r) {
    if (v.kind == k) return true;
  }
  return false;
}

}  // namespace

TEST(SparseMatrix, DuplicateTripletsAreSummed) {
  auto m = SparseMatrix::from_triplets(2, 2, {{0, 1, 1.5}, {1, 0, 2.0}, {0, 1, 0.5}});
  EXPECT_EQ(m.nnz(), 2u);
  EXPECT_DOUBLE_EQ(m.at(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(m.at(1, 0), 2.0);
  EXPECT_DOUBLE_EQ(m.at(0, 0), 0.0);
}

TEST(SparseMatrix, RejectsBrokenLayouts) {
  EXPECT_THROW(SparseMatrix(2, 2, {0, 1}, {0}, {1.0}), DimensionError);
  EXPECT_THROW(SparseMatrix(2, 2, {0, 2, 1}, {0, 1}, {1.0, 1.0}), DimensionError);
  EXPECT_THROW(SparseMatrix(1, 2, {0, 2}, {1, 0}, {1.0, 1.0}), DimensionError);
  EXPECT_THROW(SparseMatrix(1, 2, {0, 1}, {2}, {1.0}), DimensionError);
  EXPECT_THROW(SparseMatrix::from_triplets(1, 1, {{0, 3, 1.0}}), DimensionError);
}

TEST(SparseMatrix, CompressedRowRoundTripMatchesDirectDense) {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t r = rng.index(1, 12), c = rng.index(1, 12);
    std::vector<Triplet> t;
    DenseMatrix direct(r, c);
    const std::size_t count = rng.index(0, 40);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t i = rng.index(0, r - 1), j = rng.index(0, c - 1);
      const double v = rng.normal();
      t.push_back({i, j, v});
      direct(i, j) += v;
    }
    const DenseMatrix via = to_dense(SparseMatrix::from_triplets(r, c, t));
    EXPECT_LE(kipm::testing::max_abs_diff(via, direct), 1e-15);
  }
}

TEST(Hessian, QuasiNewtonProductExample) {
  const Hessian h = QuasiNewtonHessian{{1.0, 1.0}, {1.0, 0.0}, {2.0}};
  const Vector y = hessian_apply(h, Vector{1.0, 1.0});
  EXPECT_DOUBLE_EQ(y[0], 3.0);
  EXPECT_DOUBLE_EQ(y[1], 1.0);
}

TEST(Hessian, DiagonalProductExample) {
  const Vector y = hessian_apply(Hessian{DiagonalHessian{{2.0, 3.0}}}, Vector{1.0, 1.0});
  EXPECT_EQ(y, (Vector{2.0, 3.0}));
}

TEST(Hessian, ApplyRejectsWrongLength) {
  EXPECT_THROW(hessian_apply(Hessian{DiagonalHessian{{2.0, 3.0}}}, Vector{1.0}), DimensionError);
}

TEST(Hessian, QuasiNewtonWithoutUpdatesIsItsDiagonal) {
  const Hessian h = QuasiNewtonHessian{{2.0, 5.0}, {}, {}};
  EXPECT_EQ(hessian_apply(h, Vector{1.0, 1.0}), (Vector{2.0, 5.0}));
}

TEST(Hessian, RandomQuasiNewtonMatchesExplicitProduct) {
  Rng rng(3);
  const Hessian h = kipm::testing::random_quasi_newton(rng, 20, 4);
  const DenseMatrix dense = kipm::testing::explicit_hessian(h);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector v = rng.normal_vector(20);
    const Vector want = kipm::testing::dense_mul(dense, v);
    const Vector got = hessian_apply(h, v);
    EXPECT_LE(kipm::testing::rel_err(got, want), 1e-13);
  }
}

TEST(Hessian, DiagonalExamples) {
  const Hessian qn = QuasiNewtonHessian{{1.0, 1.0}, {1.0, 0.0}, {2.0}};
  EXPECT_EQ(hessian_diagonal(qn), (Vector{3.0, 1.0}));
  const Vector d{0.5, 4.0, 7.0};
  EXPECT_EQ(hessian_diagonal(Hessian{DiagonalHessian{d}}), d);
}

TEST(Hessian, RandomSparseDiagonalMatchesDense) {
  Rng rng(5);
  const Hessian h = SparseHessian{kipm::testing::random_spd_sparse(rng, 10, 0.3, 0.5)};
  const DenseMatrix dense = kipm::testing::explicit_hessian(h);
  const Vector diag = hessian_diagonal(h);
  for (std::size_t j = 0; j < 10; ++j) EXPECT_DOUBLE_EQ(diag[j], dense(j, j));
}

TEST(HessianProperty, OperatorIsSymmetric) {
  Rng rng(17);
  for (int kind = 0; kind < 3; ++kind) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = rng.index(1, 25);
      const Hessian h = kipm::testing::random_hessian(rng, n, kind);
      const Vector u = rng.normal_vector(n), v = rng.normal_vector(n);
      const double uhv = dot(u, hessian_apply(h, v));
      const double vhu = dot(v, hessian_apply(h, u));
      EXPECT_LE(std::abs(uhv - vhu), 1e-12 * (1.0 + std::abs(uhv)));
    }
  }
}

TEST(HessianProperty, DiagonalEqualsUnitProbes) {
  Rng rng(19);
  for (int kind = 0; kind < 3; ++kind) {
    const std::size_t n = 12;
    const Hessian h = kipm::testing::random_hessian(rng, n, kind);
    const Vector diag = hessian_diagonal(h);
    for (std::size_t j = 0; j < n; ++j) {
      Vector e(n, 0.0);
      e[j] = 1.0;
      EXPECT_NEAR(diag[j], hessian_apply(h, e)[j], 1e-14 * (1.0 + std::abs(diag[j])));
    }
  }
}

TEST(HessianProperty, RandomHessiansArePositiveSemidefinite) {
  Rng rng(23);
  for (int kind = 0; kind < 3; ++kind) {
    const Hessian h = kipm::testing::random_hessian(rng, 15, kind);
    for (int trial = 0; trial < 50; ++trial) {
      const Vector v = rng.normal_vector(15);
      EXPECT_GE(dot(v, hessian_apply(h, v)), -1e-12 * dot(v, v));
    }
  }
}

TEST(Validate, WellFormedBoxProblemIsClean) {
  EXPECT_TRUE(validate_problem(two_var_box()).empty());
}

TEST(Validate, InvertedBound) {
  QpProblem qp = make_problem(DiagonalHessian{{1.0}}, {0.0}, Bounds{{1.0}, {0.0}});
  const auto report = validate_problem(qp);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].kind, ViolationKind::InvertedBound);
  EXPECT_STREQ(to_string(report[0].kind), "inverted bound");
}

TEST(Validate, DimensionMismatch) {
  QpProblem qp = two_var_box();
  qp.p = {0.0, 0.0, 0.0};
  const auto report = validate_problem(qp);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].kind, ViolationKind::DimensionMismatch);
  EXPECT_STREQ(to_string(report[0].kind), "dimension mismatch");
}

TEST(Validate, NonFiniteData) {
  QpProblem qp = two_var_box();
  qp.p[1] = std::nan("");
  EXPECT_TRUE(has_kind(validate_problem(qp), ViolationKind::NonFinite));
}

TEST(Validate, EmptyVariableSpace) {
  QpProblem qp = make_problem(DiagonalHessian{{}}, {}, Bounds::unbounded(0));
  EXPECT_TRUE(has_kind(validate_problem(qp), ViolationKind::EmptyVariableSpace));
}

TEST(Validate, AsymmetricSparseHessian) {
  QpProblem qp = two_var_box();
  qp.hessian = SparseHessian{SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 0.5}, {1, 1, 1.0}})};
  EXPECT_TRUE(has_kind(validate_problem(qp), ViolationKind::AsymmetricHessian));
}

TEST(Validate, InfiniteBoundsAreNotNonFiniteData) {
  QpProblem qp = make_problem(DiagonalHessian{{1.0, 1.0}}, {0.0, 0.0},
                              Bounds{{-kInf, 0.0}, {kInf, kInf}});
  EXPECT_TRUE(validate_problem(qp).empty());
}

TEST(Objective, EvaluatesQuadratic) {
  const QpProblem qp = make_problem(DiagonalHessian{{2.0, 4.0}}, {1.0, -1.0}, Bounds::unbounded(2));
  // 0.5*(2*1 + 4*4) + (1 - 2) = 8
  EXPECT_DOUBLE_EQ(quadratic_objective(qp, Vector{1.0, 2.0}), 8.0);
}

TEST(Validate, NothingForTheBarrierToActOn) {
  QpProblem qp = make_problem(DiagonalHessian{{1.0}}, {1.0}, Bounds::unbounded(1));
  EXPECT_TRUE(has_kind(validate_problem(qp), ViolationKind::NoConstraints));
}
