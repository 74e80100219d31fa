#pragma once

#include "cmpc/linalg.hpp"
#include "cmpc/lmi.hpp"
#include "cmpc/pi.hpp"
#include "cmpc/reactor.hpp"

namespace cmpc {

// Deviation model of plant plus PI loop.  State x~ = (x, xi) where xi is the
// controller integrator; the unsaturated PI move is u = -k_hat x~, and the
// integrator row of (a_tilde, b_tilde) driven by the APPLIED input
// reproduces the back-calculation update exactly, saturation included.
struct AugmentedPlant {
  Matrix a_tilde;  // (n+1) x (n+1)
  Matrix b_tilde;  // (n+1) x 1
  Matrix k_hat;    // 1 x (n+1)
  Matrix c_tilde;  // constrained-output row: plant c padded with a zero
  double ts = 1.0;
  int n = 0;  // plant state dimension
};

AugmentedPlant build_augmented(const LinearPlant& plant, const PiGains& gains);

// Quadratic stage cost l(x, u) = x'Qx + u'Ru + 2 u'Sx.
struct StageCost {
  Matrix q;
  Matrix r;
  Matrix s;

  Matrix blockform() const;  // [[Q, S'], [S, R]]
  void validate() const;     // shapes, symmetry, joint positive semidefiniteness
};

// Infinite-horizon quadratic regulator for a cost with cross terms, by
// value iteration to a fixed point.  Gain convention u = -k x.
struct RiccatiResult {
  Matrix p;
  Matrix k;
  int iterations = 0;
};
RiccatiResult solve_riccati(const Matrix& a, const Matrix& b, const StageCost& cost,
                            int max_iter = 20000, double tol = 1e-13);

// Stage cost whose unconstrained receding-horizon law equals the PI feedback.
struct MatchedCost {
  StageCost cost;      // on the augmented model
  Matrix p;            // value matrix; also the consistent terminal weight
  Matrix gamma;        // conditioning-program variables, kept for reporting
  Matrix p_lmi;
  double beta = 0.0;
  double cert_lower = 0.0;
  double cert_upper = 0.0;
  int bisection_steps = 0;
  double gain_gap = 0.0;  // max-abs error of the Riccati-recovered gain vs k_hat
};

// Runs the conditioning program on (a_tilde, b_tilde, k_hat) and converts
// its variables into (Q, R, S): the resulting Bellman operator has value
// x' P x and minimizer -k_hat x by construction, so the recovered regulator
// reproduces the PI law identically.
MatchedCost match_controller(const AugmentedPlant& aug, double tol = 1e-7);

// Rolls x+ = a x + b sat(u), u = -k x, returning the applied input sequence.
std::vector<double> simulate_linear_law(const Matrix& a, const Matrix& b, const Matrix& k,
                                        Vector x0, int steps, double u_lo, double u_hi);

}  // namespace cmpc
