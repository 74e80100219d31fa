#include <doctest.h>

#include <cmath>
#include <random>

#include "cmpc/qp.hpp"
#include "support.hpp"

using namespace cmpc;
using testsupport::kInf;

namespace {

double stationarity_residual(const DenseQp& qp, const QpSolution& sol) {
  Vector r = qp.h * sol.x + qp.g;
  if (qp.num_rows() > 0) r += qp.rows.transpose() * sol.multipliers;
  return r.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("unconstrained minimum with inactive rows") {
  DenseQp qp;
  qp.h = Matrix::Identity(2, 2) * 2.0;
  qp.g = Vector(2);
  qp.g << -2.0, -4.0;
  qp.rows = Matrix::Identity(2, 2);
  qp.lo = Vector::Constant(2, -kInf);
  qp.hi = Vector::Constant(2, 100.0);
  const QpSolution sol = solve_qp(qp);
  CHECK(sol.status == QpStatus::optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.x[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(sol.multipliers.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.side[0] == QpSide::none);
}

TEST_CASE("active box bound with signed multiplier") {
  // min 1/2 x'x - 3 x1 - x2 over 0 <= x <= 2: optimum clips x1 at 2.
  DenseQp qp;
  qp.h = Matrix::Identity(2, 2);
  qp.g = Vector(2);
  qp.g << -3.0, -1.0;
  qp.rows = Matrix::Identity(2, 2);
  qp.lo = Vector::Zero(2);
  qp.hi = Vector::Constant(2, 2.0);
  const QpSolution sol = solve_qp(qp);
  CHECK(sol.x[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.side[0] == QpSide::upper);
  CHECK(sol.side[1] == QpSide::none);
  // Stationarity x1 + g1 + mult = 0 puts the upper-bound multiplier at +1.
  CHECK(sol.multipliers[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.lagrange(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.lagrange(1) == 0.0);
  CHECK(stationarity_residual(qp, sol) < 1e-10);
}

TEST_CASE("equality row is honored exactly") {
  DenseQp qp;
  qp.h = Matrix::Identity(2, 2);
  qp.g = Vector::Zero(2);
  qp.rows = Matrix(1, 2);
  qp.rows << 1.0, 1.0;
  qp.lo = Vector::Constant(1, 3.0);
  qp.hi = Vector::Constant(1, 3.0);
  const QpSolution sol = solve_qp(qp);
  CHECK(sol.x[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(sol.x[1] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(sol.side[0] == QpSide::equality);
  CHECK(stationarity_residual(qp, sol) < 1e-10);
}

TEST_CASE("contradictory rows raise QpInfeasible naming the rows") {
  DenseQp qp;
  qp.h = Matrix::Identity(1, 1);
  qp.g = Vector::Zero(1);
  qp.rows = Matrix(2, 1);
  qp.rows << 1.0, 1.0;
  qp.lo = Vector(2);
  qp.hi = Vector(2);
  qp.lo << 1.0, -kInf;
  qp.hi << kInf, 0.0;
  CHECK_THROWS_AS(solve_qp(qp), QpInfeasible);
  try {
    solve_qp(qp);
  } catch (const QpInfeasible& e) {
    CHECK(!e.rows.empty());
  }
}

TEST_CASE("validate rejects malformed problems") {
  DenseQp qp;
  qp.h = Matrix(2, 2);
  qp.h << 1.0, 0.5, -0.5, 1.0;  // not symmetric
  qp.g = Vector::Zero(2);
  qp.rows = Matrix::Zero(0, 2);
  qp.lo.resize(0);
  qp.hi.resize(0);
  CHECK_THROWS_AS(qp.validate(), std::invalid_argument);
  qp.h << 1.0, 0.0, 0.0, -1.0;  // indefinite
  CHECK_THROWS_AS(qp.validate(), std::invalid_argument);
  qp.h = Matrix::Identity(2, 2);
  qp.rows = Matrix::Ones(1, 2);
  qp.lo = Vector::Constant(1, 2.0);
  qp.hi = Vector::Constant(1, 1.0);  // lo > hi
  CHECK_THROWS_AS(qp.validate(), std::invalid_argument);
}

TEST_CASE("grazing row stays optimal with zero multiplier") {
  DenseQp qp;
  qp.h = Matrix::Identity(1, 1);
  qp.g = Vector::Zero(1);
  qp.rows = Matrix::Identity(1, 1);
  qp.lo = Vector::Zero(1);
  qp.hi = Vector::Constant(1, kInf);
  const QpSolution sol = solve_qp(qp);
  CHECK(sol.status == QpStatus::optimal);
  CHECK(sol.x[0] == doctest::Approx(0.0));
  CHECK(std::abs(sol.lagrange(0)) < 1e-9);
}

TEST_CASE("random problems agree with active-set enumeration") {
  std::mt19937_64 rng(2024);
  int solved = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const DenseQp qp = testsupport::random_qp(rng);
    const testsupport::EnumResult oracle = testsupport::enumerate_qp(qp);
    REQUIRE(oracle.found);  // built around a feasible point
    const QpSolution sol = solve_qp(qp);
    CHECK(sol.status == QpStatus::optimal);
    const double scale = std::max(1.0, oracle.x.cwiseAbs().maxCoeff());
    CHECK((sol.x - oracle.x).cwiseAbs().maxCoeff() < 1e-8 * scale);
    CHECK(stationarity_residual(qp, sol) <
          1e-7 * std::max(1.0, qp.h.cwiseAbs().maxCoeff() * scale));
    // Complementarity: rows marked inactive carry no multiplier.
    for (int i = 0; i < qp.num_rows(); ++i)
      if (sol.side[i] == QpSide::none) CHECK(sol.multipliers[i] == 0.0);
    ++solved;
  }
  CHECK(solved == 60);
}

TEST_CASE("workspace reuse matches fresh solves across varying gradients") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  DenseQp qp = testsupport::random_qp(rng, 5, 4);
  while (qp.num_rows() == 0) qp = testsupport::random_qp(rng, 5, 4);
  QpWorkspace work(qp.h, qp.rows);
  for (int rep = 0; rep < 10; ++rep) {
    for (int i = 0; i < qp.num_vars(); ++i) qp.g[i] = 2.0 * normal(rng);
    const QpSolution fresh = solve_qp(qp);
    const QpSolution reused = work.solve(qp.g, qp.lo, qp.hi, 1e-9);
    CHECK((fresh.x - reused.x).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("a feasible warm start yields the same optimum") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseQp qp = testsupport::random_qp(rng, 4, 3);
    const QpSolution cold = solve_qp(qp);
    const QpSolution warm = solve_qp(qp, 1e-9, cold.x);
    CHECK((cold.x - warm.x).cwiseAbs().maxCoeff() < 1e-9);
  }
}
