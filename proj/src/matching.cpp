#include "cmpc/matching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace cmpc {

AugmentedPlant build_augmented(const LinearPlant& plant, const PiGains& gains) {
  const auto n = plant.a.rows();
  if (plant.b.cols() != 1 || plant.c.rows() != 1)
    throw std::invalid_argument("build_augmented: plant must be single-input single-output");
  const double ts = plant.ts;

  AugmentedPlant aug;
  aug.n = static_cast<int>(n);
  aug.ts = ts;
  aug.k_hat = Matrix(1, n + 1);
  aug.k_hat.leftCols(n) = (gains.kp + ts * gains.ki) * plant.c;
  aug.k_hat(0, n) = -1.0;

  Matrix a_hat = Matrix::Zero(n + 1, n + 1);
  a_hat.topLeftCorner(n, n) = plant.a;
  a_hat.bottomLeftCorner(1, n) = -ts * gains.ki * plant.c;
  a_hat(n, n) = 1.0;
  Matrix b_hat = Matrix::Zero(n + 1, 1);
  b_hat.topRows(n) = plant.b;

  // Back-calculation appears as a rank-one correction on the integrator row;
  // it cancels exactly whenever the applied input equals -k_hat x~.
  aug.a_tilde = a_hat;
  aug.a_tilde.bottomRows(1) += ts * gains.kaw * aug.k_hat;
  aug.b_tilde = b_hat;
  aug.b_tilde(n, 0) = ts * gains.kaw;

  aug.c_tilde = Matrix::Zero(1, n + 1);
  aug.c_tilde.leftCols(n) = plant.c;
  return aug;
}

Matrix StageCost::blockform() const {
  const auto n = q.rows();
  const auto m = r.rows();
  Matrix blk(n + m, n + m);
  blk.topLeftCorner(n, n) = q;
  blk.topRightCorner(n, m) = s.transpose();
  blk.bottomLeftCorner(m, n) = s;
  blk.bottomRightCorner(m, m) = r;
  return blk;
}

void StageCost::validate() const {
  const auto n = q.rows();
  const auto m = r.rows();
  if (q.cols() != n || r.cols() != m || s.rows() != m || s.cols() != n)
    throw std::invalid_argument("StageCost: dimension mismatch");
  const double scale = std::max({1.0, q.cwiseAbs().maxCoeff(), r.cwiseAbs().maxCoeff()});
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale ||
      (r - r.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("StageCost: q and r must be symmetric");
  const EigResult e = sym_eig(blockform());
  if (e.values[0] < -1e-8 * scale)
    throw std::invalid_argument("StageCost: joint cost matrix must be positive semidefinite");
}

RiccatiResult solve_riccati(const Matrix& a, const Matrix& b, const StageCost& cost, int max_iter,
                            double tol) {
  cost.validate();
  const auto n = a.rows();
  if (a.cols() != n || b.rows() != n || cost.q.rows() != n || cost.s.cols() != n ||
      cost.r.rows() != b.cols())
    throw std::invalid_argument("solve_riccati: dimension mismatch");
  RiccatiResult res;
  res.p = cost.q;
  for (int it = 1; it <= max_iter; ++it) {
    const Matrix bpa = cost.s + b.transpose() * res.p * a;
    const Matrix rpb = cost.r + b.transpose() * res.p * b;
    const Eigen::LDLT<Matrix> ld(rpb);
    if (ld.info() != Eigen::Success)
      throw std::runtime_error("solve_riccati: input-weight block not invertible");
    res.k = ld.solve(bpa);
    Matrix next = cost.q + a.transpose() * res.p * a - bpa.transpose() * res.k;
    next = 0.5 * (next + next.transpose());
    const double diff = (next - res.p).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, res.p.cwiseAbs().maxCoeff());
    res.p = next;
    res.iterations = it;
    if (diff <= tol * scale) return res;
  }
  throw std::runtime_error("solve_riccati: no fixed point within iteration limit");
}

MatchedCost match_controller(const AugmentedPlant& aug, double tol) {
  LmiProblem prob{aug.a_tilde, aug.b_tilde, aug.k_hat};
  const LmiSolution lmi = solve_lmi(prob, tol);

  MatchedCost mc;
  mc.gamma = lmi.gamma;
  mc.p_lmi = lmi.p;
  mc.beta = lmi.beta;
  mc.cert_lower = lmi.cert_lower;
  mc.cert_upper = lmi.cert_upper;
  mc.bisection_steps = lmi.bisection_steps;

  const Matrix& at = aug.a_tilde;
  const Matrix& bt = aug.b_tilde;
  const Matrix& kh = aug.k_hat;
  const Matrix& p = lmi.p;
  mc.cost.q = kh.transpose() * lmi.gamma * kh + p - at.transpose() * p * at;
  mc.cost.q = 0.5 * (mc.cost.q + mc.cost.q.transpose());
  mc.cost.r = lmi.gamma - bt.transpose() * p * bt;
  mc.cost.r = 0.5 * (mc.cost.r + mc.cost.r.transpose());
  mc.cost.s = lmi.gamma * kh - bt.transpose() * p * at;
  mc.p = p;
  mc.cost.validate();

  const RiccatiResult ric = solve_riccati(at, bt, mc.cost);
  mc.gain_gap = (ric.k - kh).cwiseAbs().maxCoeff();
  return mc;
}

std::vector<double> simulate_linear_law(const Matrix& a, const Matrix& b, const Matrix& k,
                                        Vector x0, int steps, double u_lo, double u_hi) {
  std::vector<double> applied;
  applied.reserve(steps);
  Vector x = std::move(x0);
  for (int i = 0; i < steps; ++i) {
    const double u = std::clamp(-(k * x)(0, 0), u_lo, u_hi);
    applied.push_back(u);
    x = a * x + b.col(0) * u;
  }
  return applied;
}

}  // namespace cmpc
