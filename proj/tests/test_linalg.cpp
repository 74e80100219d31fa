#include <doctest.h>

#include <cmath>
#include <random>

#include "cmpc/linalg.hpp"
#include "support.hpp"

using namespace cmpc;

TEST_CASE("SymMatrix stores one slot per unordered pair") {
  SymMatrix m(3);
  m.at(0, 1) = 2.5;
  CHECK(m.at(1, 0) == 2.5);
  m.at(2, 2) = -1.0;
  m.at(1, 2) = 0.75;
  const Matrix d = m.dense();
  CHECK(d(0, 1) == 2.5);
  CHECK(d(1, 0) == 2.5);
  CHECK(d(2, 1) == 0.75);
  CHECK(d(2, 2) == -1.0);
  CHECK(d(0, 0) == 0.0);
}

TEST_CASE("SymMatrix::from_dense averages the two triangles") {
  Matrix a(2, 2);
  a << 1.0, 3.0, 1.0, 2.0;
  const SymMatrix m = SymMatrix::from_dense(a);
  CHECK(m.at(0, 1) == doctest::Approx(2.0));
  CHECK(m.at(0, 0) == 1.0);
}

TEST_CASE("sym_eig solves a known 2x2") {
  Matrix a(2, 2);
  a << 2.0, 1.0, 1.0, 2.0;
  const EigResult e = sym_eig(a);
  CHECK(e.values[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(e.values[1] == doctest::Approx(3.0).epsilon(1e-14));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(e.vectors(0, 1)) == doctest::Approx(inv_sqrt2));
  CHECK(e.vectors.col(1)(0) == doctest::Approx(e.vectors.col(1)(1)));
}

TEST_CASE("sym_eig reconstructs random symmetric matrices") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 7);
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
    a = Matrix(0.5 * (a + a.transpose()));
    const EigResult e = sym_eig(a);
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    CHECK((a * e.vectors - e.vectors * e.values.asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff() <
          1e-12 * scale);
    CHECK((e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() <
          1e-12);
    for (int i = 0; i + 1 < n; ++i) CHECK(e.values[i] <= e.values[i + 1]);
  }
}

TEST_CASE("sym_eig is deterministic with a fixed sign convention") {
  Matrix a(3, 3);
  a << 4.0, 1.0, -2.0, 1.0, 3.0, 0.5, -2.0, 0.5, 1.0;
  const EigResult e1 = sym_eig(a);
  const EigResult e2 = sym_eig(a);
  CHECK((e1.vectors - e2.vectors).cwiseAbs().maxCoeff() == 0.0);
  for (int c = 0; c < 3; ++c) {
    int imax = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(e1.vectors(i, c)) > std::abs(e1.vectors(imax, c))) imax = i;
    CHECK(e1.vectors(imax, c) > 0.0);
  }
}

TEST_CASE("expm matches closed forms") {
  CHECK((expm(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = -1.0;
  d(1, 1) = 2.0;
  const Matrix ed = expm(d);
  CHECK(ed(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(ed(1, 1) == doctest::Approx(std::exp(2.0)).epsilon(1e-14));
  CHECK(ed(0, 1) == 0.0);

  Matrix nil = Matrix::Zero(2, 2);
  nil(0, 1) = 1.0;
  const Matrix en = expm(nil);
  CHECK(en(0, 0) == doctest::Approx(1.0));
  CHECK(en(0, 1) == doctest::Approx(1.0));
  CHECK(en(1, 0) == 0.0);

  const double th = 0.7;
  Matrix rot(2, 2);
  rot << 0.0, -th, th, 0.0;
  const Matrix er = expm(rot);
  CHECK(er(0, 0) == doctest::Approx(std::cos(th)).epsilon(1e-14));
  CHECK(er(1, 0) == doctest::Approx(std::sin(th)).epsilon(1e-14));
}

TEST_CASE("expm agrees with a Taylor sum on small random matrices") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = 0.3 * normal(rng);
    Matrix sum = Matrix::Identity(n, n), term = Matrix::Identity(n, n);
    for (int k = 1; k <= 30; ++k) {
      term = Matrix(term * a / k);
      sum += term;
    }
    CHECK((expm(a) - sum).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("dlyap satisfies its equation and rejects unit-circle spectra") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 4);
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
    a *= 0.8 / std::max(1e-9, testsupport::spectral_radius_oracle(a));
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = normal(rng);
    const Matrix q = Matrix(m.transpose() * m) + 0.1 * Matrix::Identity(n, n);
    const Matrix p = dlyap(a, q);
    CHECK((p - a.transpose() * p * a - q).cwiseAbs().maxCoeff() < 1e-10 * q.cwiseAbs().maxCoeff());
    CHECK((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-12 * p.cwiseAbs().maxCoeff());
    CHECK(sym_eig(p).values[0] > 0.0);
  }
  CHECK_THROWS(dlyap(Matrix::Identity(2, 2), Matrix::Identity(2, 2)));
}

TEST_CASE("spectral_radius on a known companion matrix") {
  Matrix a(2, 2);
  a << 0.0, 1.0, -0.25, 0.0;  // eigenvalues +-0.5i
  CHECK(spectral_radius(a) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(spectral_radius(Matrix::Identity(3, 3)) == doctest::Approx(1.0));
}

TEST_CASE("all_finite flags NaN and infinity") {
  Matrix a = Matrix::Zero(2, 2);
  CHECK(all_finite(a));
  a(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(!all_finite(a));
  Vector v = Vector::Zero(3);
  CHECK(all_finite(v));
  v[2] = std::numeric_limits<double>::infinity();
  CHECK(!all_finite(v));
}
