#pragma once

#include <Eigen/Dense>
#include <vector>

namespace cmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Symmetric matrix stored as the packed upper triangle (row-major, diagonal
// included).  Symmetry holds by construction: there is exactly one slot per
// unordered index pair.
class SymMatrix {
 public:
  explicit SymMatrix(int n);
  // Builds from a dense matrix, averaging m and m^T.  Use when the input is
  // symmetric up to roundoff.
  static SymMatrix from_dense(const Matrix& m);

  int order() const { return n_; }
  double& at(int i, int j);
  double at(int i, int j) const;
  Matrix dense() const;

 private:
  int idx(int i, int j) const;
  int n_;
  std::vector<double> packed_;
};

struct EigResult {
  Vector values;   // ascending
  Matrix vectors;  // orthonormal columns, vectors.col(i) pairs with values(i)
};

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Deterministic: fixed sweep order, eigenvalues sorted ascending, each
// eigenvector's largest-magnitude component made positive.
// Throws std::runtime_error if the sweep limit is hit.
EigResult sym_eig(const SymMatrix& m);
EigResult sym_eig(const Matrix& m);  // convenience; symmetrizes first

// Matrix exponential by scaling-and-squaring with a diagonal Pade(6)
// approximant.
Matrix expm(const Matrix& a);

// Solves the discrete Lyapunov equation P = A^T P A + Q by Kronecker
// vectorization.  Intended for small n.  Throws if the linear system is
// singular (A has reciprocal eigenvalue pairs).
Matrix dlyap(const Matrix& a, const Matrix& q);

// Spectral radius of a (small) square matrix, via the real Schur-free route:
// eigenvalues of the companion... (implemented with Eigen's general solver;
// used for diagnostics and validation, not inside iteration loops).
double spectral_radius(const Matrix& a);

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

}  // namespace cmpc
