#pragma once

#include <Eigen/Cholesky>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmpc/linalg.hpp"

namespace cmpc {

// Convex quadratic program
//   minimize 1/2 x^T H x + g^T x   subject to   lo_i <= rows_i . x <= hi_i
// Either bound may be infinite; lo_i == hi_i makes row i an equality.
struct DenseQp {
  Matrix h;     // n x n, symmetric positive (semi)definite
  Vector g;     // n
  Matrix rows;  // m x n constraint normals
  Vector lo;    // m, -inf allowed
  Vector hi;    // m, +inf allowed

  int num_vars() const { return static_cast<int>(h.rows()); }
  int num_rows() const { return static_cast<int>(rows.rows()); }
  // Checks symmetry, PSD-ness of h (smallest eigenvalue >= -1e-8 * ||h||),
  // bound ordering, and finiteness.  Throws std::invalid_argument on failure.
  void validate() const;
};

enum class QpStatus { optimal, max_iterations };

// Row activity at the solution.
enum class QpSide : std::int8_t { none = 0, lower = -1, upper = 1, equality = 2 };

struct QpSolution {
  Vector x;
  // Signed multipliers in the stationarity convention H x + g + rows^T mult = 0:
  // nonnegative on rows active at their upper bound, nonpositive at the lower.
  Vector multipliers;
  std::vector<QpSide> side;
  QpStatus status = QpStatus::optimal;
  int iterations = 0;
  double kkt_residual = 0.0;

  // Lagrange multiplier of row i in the sign-free convention (>= 0 for an
  // active inequality at either bound, signed for an equality, 0 inactive).
  double lagrange(int i) const;
};

struct QpInfeasible : std::runtime_error {
  QpInfeasible(const std::string& what, std::vector<int> bad_rows);
  std::vector<int> rows;  // indices of rows that could not be satisfied
};

// Primal active-set solver.  The working-set subproblems reuse a single
// Cholesky factor of H; the small Schur systems over active rows are
// refactored as rows enter and leave.  Without x0 a slack phase-I run finds a
// feasible start (and detects infeasibility, naming the violated rows).
// With x0 the caller promises feasibility (checked).
QpSolution solve_qp(const DenseQp& qp, double tol = 1e-9);
QpSolution solve_qp(const DenseQp& qp, double tol, const Vector& x0);

// Reusable solver state for a fixed Hessian and fixed constraint rows with
// varying gradient and bounds (the receding-horizon use).  Factors H once and
// caches H^-1 rows_i^T columns as rows first become active.
class QpWorkspace {
 public:
  QpWorkspace(const Matrix& h, const Matrix& rows);

  // x0, when given, must be feasible for (lo, hi).
  QpSolution solve(const Vector& g, const Vector& lo, const Vector& hi, double tol,
                   const Vector* x0 = nullptr);

 private:
  Vector h_solve(const Vector& r) const;
  double m_entry(int i, int j);  // rows_norm_i . H^-1 rows_norm_j^T, with column caching
  QpSolution solve_feasible(const Vector& g, const Vector& lo, const Vector& hi, double tol,
                            const Vector& x0);

  int n_ = 0, m_ = 0;
  Matrix h_;  // symmetrized Hessian
  Eigen::LLT<Matrix> llt_;
  Matrix rows_norm_;     // rows scaled to unit infinity norm
  Vector row_scale_;     // rows_norm_i = rows_i / row_scale_i
  std::vector<char> row_zero_;
  Matrix vcache_;
  std::vector<char> have_v_;
};

}  // namespace cmpc
