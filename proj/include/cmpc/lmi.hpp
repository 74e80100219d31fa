#pragma once

#include "cmpc/linalg.hpp"

namespace cmpc {

// Conditioning-optimal search for a quadratic stage cost consistent with a
// given linear feedback.  For the plant pair (A, B) and feedback gain K, the
// decision variables are symmetric Gamma (m x m) and P (n x n), entering
//
//   H(Gamma, P) = [K I]^T Gamma [K I] + [I 0]^T P [I 0] - [A B]^T P [A B]
//
// and the program is:  minimize beta  s.t.  I <= H(Gamma, P) <= beta I.
// H is linear and homogeneous in (Gamma, P), so any positive definite H can
// be rescaled onto the feasible set; beta is the achievable condition number.
struct LmiProblem {
  Matrix a;      // n x n
  Matrix b;      // n x m
  Matrix k_hat;  // m x n, must stabilize: rho(a - b k_hat) < 1
  void validate() const;
};

struct LmiSolution {
  Matrix gamma;       // m x m
  Matrix p;           // n x n
  double beta = 0.0;  // lambda_max(H) at the returned point (lambda_min ~ 1)
  // Certificates, recomputed from the returned (gamma, p, beta) by the
  // symmetric eigensolver: lambda_min(H - I) and lambda_max(H - beta I).
  double cert_lower = 0.0;
  double cert_upper = 0.0;
  int bisection_steps = 0;
};

// Bisection on beta; each trial level is attacked by log-det barrier
// (analytic-center) Newton steps, restarted from the best point found so far
// via cone scaling.  A discrete Lyapunov pre-solve on (A - B K) seeds P and
// rejects non-stabilizing gains.  Throws std::invalid_argument when the gain
// does not stabilize the model.
LmiSolution solve_lmi(const LmiProblem& prob, double tol = 1e-7);

// The H map above, exposed for tests and certificate checks.
Matrix lmi_objective_matrix(const LmiProblem& prob, const Matrix& gamma, const Matrix& p);

}  // namespace cmpc
