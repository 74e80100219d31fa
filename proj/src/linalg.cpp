#include "cmpc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cmpc {

SymMatrix::SymMatrix(int n) : n_(n), packed_(static_cast<size_t>(n) * (n + 1) / 2, 0.0) {
  if (n < 0) throw std::invalid_argument("SymMatrix: negative order");
}

SymMatrix SymMatrix::from_dense(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("SymMatrix: not square");
  SymMatrix s(static_cast<int>(m.rows()));
  for (int i = 0; i < s.n_; ++i)
    for (int j = i; j < s.n_; ++j) s.at(i, j) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

int SymMatrix::idx(int i, int j) const {
  if (i > j) std::swap(i, j);
  // row-major upper triangle: row i starts after i full rows of shrinking length
  return i * n_ - i * (i - 1) / 2 + (j - i);
}

double& SymMatrix::at(int i, int j) { return packed_[idx(i, j)]; }
double SymMatrix::at(int i, int j) const { return packed_[idx(i, j)]; }

Matrix SymMatrix::dense() const {
  Matrix m(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j) m(i, j) = m(j, i) = at(i, j);
  return m;
}

namespace {

double off_diag_norm(const Matrix& a) {
  double s = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

EigResult sym_eig(const SymMatrix& m) {
  const int n = m.order();
  Matrix a = m.dense();
  Matrix v = Matrix::Identity(n, n);
  if (n == 0) return {Vector(0), v};

  const double scale = std::max(a.norm(), 1e-300);
  const double tol = 1e-14 * scale;
  const int max_sweeps = 50;

  int sweep = 0;
  while (off_diag_norm(a) > tol) {
    if (++sweep > max_sweeps) throw std::runtime_error("sym_eig: Jacobi sweep limit exceeded");
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300 * scale) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // A <- J^T A J with J the (p,q) rotation
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });

  EigResult r;
  r.values.resize(n);
  r.vectors.resize(n, n);
  for (int i = 0; i < n; ++i) {
    r.values(i) = a(order[i], order[i]);
    Vector col = v.col(order[i]);
    int imax = 0;
    col.cwiseAbs().maxCoeff(&imax);
    if (col(imax) < 0.0) col = -col;
    r.vectors.col(i) = col;
  }
  return r;
}

EigResult sym_eig(const Matrix& m) { return sym_eig(SymMatrix::from_dense(m)); }

Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("expm: not square");
  const int n = static_cast<int>(a.rows());
  if (n == 0) return Matrix(0, 0);
  if (!all_finite(a)) throw std::invalid_argument("expm: nonfinite input");

  // scale so the Pade(6) approximant operates on a matrix of norm <= 0.5
  const double nrm = a.cwiseAbs().rowwise().sum().maxCoeff();  // infinity norm
  int s = 0;
  if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  const Matrix as = a / std::ldexp(1.0, s);

  // diagonal Pade(6): coefficients 1, 1/2, 5/44, 1/66, 1/792, 1/15840, 1/665280
  static const double c[7] = {1.0,       1.0 / 2.0,     5.0 / 44.0,    1.0 / 66.0,
                              1.0 / 792, 1.0 / 15840.0, 1.0 / 665280.0};
  const Matrix a2 = as * as;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix i = Matrix::Identity(n, n);
  const Matrix u = as * (c[1] * i + c[3] * a2 + c[5] * a4);
  const Matrix v = c[0] * i + c[2] * a2 + c[4] * a4 + c[6] * a6;

  Matrix e = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < s; ++k) e = e * e;
  return e;
}

Matrix dlyap(const Matrix& a, const Matrix& q) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || q.rows() != n || q.cols() != n)
    throw std::invalid_argument("dlyap: dimension mismatch");
  if (n == 0) return Matrix(0, 0);

  // vec(P) - (A^T (x) A^T) vec(P) = vec(Q)
  Matrix at = a.transpose();
  Matrix m = Matrix::Identity(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m.block(i * n, j * n, n, n) -= at(i, j) * at;

  Vector vq(n * n);
  for (int j = 0; j < n; ++j) vq.segment(j * n, n) = q.col(j);
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible()) throw std::runtime_error("dlyap: singular system (A not Schur stable?)");
  Vector vp = lu.solve(vq);

  Matrix p(n, n);
  for (int j = 0; j < n; ++j) p.col(j) = vp.segment(j * n, n);
  return 0.5 * (p + p.transpose());
}

double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("spectral_radius: not square");
  if (a.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace cmpc
