#pragma once

// Test-side oracles and generators.  Everything here is written against the
// defining equations, independently of the library implementations it checks:
// brute-force enumeration for QPs, plain backward recursions for regulator
// gains, closed-form moments for the discretized linear SDE.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cmpc/qp.hpp"

namespace testsupport {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Backward Riccati sweep for 1/2-free stage cost x'Qx + u'Ru + 2u'Sx, gain
// convention u = -Kx.  Terminal weight pt, `steps` backward steps; returns
// the gain at the far end (the receding-horizon first move).
inline MatrixXd finite_horizon_gain(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q,
                                    const MatrixXd& r, const MatrixXd& s, const MatrixXd& pt,
                                    int steps) {
  MatrixXd p = pt;
  MatrixXd k;
  for (int i = 0; i < steps; ++i) {
    const MatrixXd rpb = r + b.transpose() * p * b;
    const MatrixXd spa = s + b.transpose() * p * a;
    k = rpb.ldlt().solve(spa);
    p = q + a.transpose() * p * a - spa.transpose() * k;
    p = 0.5 * (p + p.transpose()).eval();
  }
  return k;
}

struct DlqrResult {
  MatrixXd p, k;
};

// Infinite-horizon gain by iterating the same sweep to a fixed point.
inline DlqrResult dlqr_oracle(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q,
                              const MatrixXd& r, const MatrixXd& s, double tol = 1e-13,
                              int max_iter = 100000) {
  DlqrResult res;
  res.p = q;
  for (int i = 0; i < max_iter; ++i) {
    const MatrixXd rpb = r + b.transpose() * res.p * b;
    const MatrixXd spa = s + b.transpose() * res.p * a;
    res.k = rpb.ldlt().solve(spa);
    MatrixXd next = q + a.transpose() * res.p * a - spa.transpose() * res.k;
    next = 0.5 * (next + next.transpose()).eval();
    const double diff = (next - res.p).cwiseAbs().maxCoeff();
    res.p = next;
    if (diff <= tol * std::max(1.0, res.p.cwiseAbs().maxCoeff())) return res;
  }
  throw std::runtime_error("dlqr_oracle: no convergence");
}

inline double spectral_radius_oracle(const MatrixXd& a) {
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

// Random (A, B) with a stabilizing gain K produced by an LQ design, so K is
// nontrivial and rho(A - BK) < 1 by construction.  A itself may be unstable.
struct RandomSystem {
  MatrixXd a, b, k;
};

inline RandomSystem random_stabilized(std::mt19937_64& rng, int n, int m) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.3, 1.2);
  for (int attempt = 0; attempt < 100; ++attempt) {
    RandomSystem sys;
    sys.a.resize(n, n);
    sys.b.resize(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) sys.a(i, j) = normal(rng);
    const double rho = spectral_radius_oracle(sys.a);
    if (rho > 0.0) sys.a *= unif(rng) / rho;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) sys.b(i, j) = normal(rng);
    MatrixXd q = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) q(i, i) = 0.1 + std::abs(normal(rng));
    MatrixXd r = MatrixXd::Identity(m, m) * (0.1 + std::abs(normal(rng)));
    try {
      sys.k = dlqr_oracle(sys.a, sys.b, q, r, MatrixXd::Zero(m, n)).k;
    } catch (const std::runtime_error&) {
      continue;
    }
    if (spectral_radius_oracle(sys.a - sys.b * sys.k) < 1.0 - 1e-6) return sys;
  }
  throw std::runtime_error("random_stabilized: no stabilizable draw in 100 attempts");
}

// Brute-force QP oracle: enumerates every assignment of {inactive, at lower,
// at upper} over the rows, solves the equality-constrained KKT system for
// each, and keeps assignments that are primal feasible with correctly signed
// multipliers.  Exponential in the row count; meant for m <= 6.
struct EnumResult {
  VectorXd x;
  double objective = kInf;
  bool found = false;
};

inline EnumResult enumerate_qp(const cmpc::DenseQp& qp, double feas_tol = 1e-7,
                               double dual_tol = 1e-7) {
  const int n = qp.num_vars();
  const int m = qp.num_rows();
  // Option codes per row: 0 inactive, 1 at lower, 2 at upper.
  std::vector<std::vector<int>> options(m);
  for (int i = 0; i < m; ++i) {
    const bool has_lo = std::isfinite(qp.lo[i]);
    const bool has_hi = std::isfinite(qp.hi[i]);
    if (has_lo && has_hi && qp.lo[i] == qp.hi[i]) {
      options[i] = {1};  // equality: always active, sign-free multiplier
    } else {
      options[i].push_back(0);
      if (has_lo) options[i].push_back(1);
      if (has_hi) options[i].push_back(2);
    }
  }

  EnumResult best;
  std::vector<int> pick(m, 0);
  const auto objective = [&](const VectorXd& x) {
    return 0.5 * x.dot(qp.h * x) + qp.g.dot(x);
  };

  while (true) {
    std::vector<int> active;
    for (int i = 0; i < m; ++i)
      if (pick[i] != 0) active.push_back(i);
    const int na = static_cast<int>(active.size());

    MatrixXd kkt = MatrixXd::Zero(n + na, n + na);
    kkt.topLeftCorner(n, n) = qp.h;
    VectorXd rhs(n + na);
    rhs.head(n) = -qp.g;
    for (int j = 0; j < na; ++j) {
      const int i = active[j];
      kkt.block(0, n + j, n, 1) = qp.rows.row(i).transpose();
      kkt.block(n + j, 0, 1, n) = qp.rows.row(i);
      rhs[n + j] = pick[i] == 1 ? qp.lo[i] : qp.hi[i];
    }
    const Eigen::FullPivLU<MatrixXd> lu(kkt);
    if (lu.isInvertible()) {
      const VectorXd sol = lu.solve(rhs);
      const VectorXd x = sol.head(n);
      bool ok = true;
      const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
      for (int i = 0; i < m && ok; ++i) {
        const double v = qp.rows.row(i).dot(x);
        if (v < qp.lo[i] - feas_tol * scale || v > qp.hi[i] + feas_tol * scale) ok = false;
      }
      for (int j = 0; j < na && ok; ++j) {
        const int i = active[j];
        if (qp.lo[i] == qp.hi[i]) continue;
        const double mult = sol[n + j];  // convention H x + g + rows^T mult = 0
        if (pick[i] == 2 && mult < -dual_tol) ok = false;
        if (pick[i] == 1 && mult > dual_tol) ok = false;
      }
      if (ok) {
        const double obj = objective(x);
        if (!best.found || obj < best.objective) {
          best.x = x;
          best.objective = obj;
          best.found = true;
        }
      }
    }

    int pos = m - 1;
    while (pos >= 0) {
      const auto it = std::find(options[pos].begin(), options[pos].end(), pick[pos]);
      if (it + 1 != options[pos].end()) {
        pick[pos] = *(it + 1);
        break;
      }
      pick[pos] = options[pos].front();
      --pos;
    }
    if (pos < 0) break;
  }
  return best;
}

// Random strictly convex QP built around a known feasible point, with a mix
// of one-sided, two-sided, and occasionally tight (grazing) rows.
inline cmpc::DenseQp random_qp(std::mt19937_64& rng, int max_vars = 8, int max_rows = 6) {
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> nvars(1, max_vars), nrows(0, max_rows);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int n = nvars(rng);
  const int m = nrows(rng);
  cmpc::DenseQp qp;
  MatrixXd mfac(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) mfac(i, j) = normal(rng);
  qp.h = mfac.transpose() * mfac + (0.1 + unif(rng)) * MatrixXd::Identity(n, n);
  qp.g.resize(n);
  for (int i = 0; i < n; ++i) qp.g[i] = 3.0 * normal(rng);
  qp.rows.resize(m, n);
  qp.lo = VectorXd::Constant(m, -kInf);
  qp.hi = VectorXd::Constant(m, kInf);
  VectorXd feas(n);
  for (int i = 0; i < n; ++i) feas[i] = normal(rng);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) qp.rows(i, j) = normal(rng);
    const double c = qp.rows.row(i).dot(feas);
    const double w1 = std::abs(normal(rng)), w2 = std::abs(normal(rng)) + 0.1;
    const double style = unif(rng);
    if (style < 0.3) {
      qp.lo[i] = c - (unif(rng) < 0.15 ? 0.0 : w1);
    } else if (style < 0.6) {
      qp.hi[i] = c + (unif(rng) < 0.15 ? 0.0 : w1);
    } else {
      qp.lo[i] = c - w1;
      qp.hi[i] = c + w2;
    }
  }
  return qp;
}

// Moments of the Euler chain x_{k+1} = (1 + a dt) x_k + b u dt + s sqrt(dt) xi
// after `steps` steps: the exact distribution of the simulated linear SDE.
struct ChainMoments {
  double mean = 0.0;
  double var = 0.0;
};

inline ChainMoments linear_chain_moments(double x0, double a, double bu, double sigma, double dt,
                                         int steps) {
  const double alpha = 1.0 + a * dt;
  ChainMoments mo;
  double geo;  // sum_{j<steps} alpha^j
  if (std::abs(alpha - 1.0) < 1e-14) {
    geo = steps;
    mo.var = sigma * sigma * dt * steps;
  } else {
    const double an = std::pow(alpha, steps);
    geo = (1.0 - an) / (1.0 - alpha);
    mo.var = sigma * sigma * dt * (1.0 - an * an) / (1.0 - alpha * alpha);
  }
  mo.mean = std::pow(alpha, steps) * x0 + bu * dt * geo;
  return mo;
}

// Minimal linear SDE model for exercising the simulation machinery without
// reactor physics: dx = (a x + b u) dt + sigma dW, z = x.
struct LinearSde {
  static constexpr int state_dim = 1;
  static constexpr int noise_dim = 1;
  double a = -1.0;
  double b = 1.0;
  double sigma = 0.1;
  double rv = 0.0;

  void drift(std::span<const double> x, double u, std::span<double> out) const {
    out[0] = a * x[0] + b * u;
  }
  void diffusion(std::span<const double>, double, std::span<double> out) const { out[0] = sigma; }
  double output(std::span<const double> x) const { return x[0]; }
  double measurement_variance() const { return rv; }
  double input_record_scale() const { return 1.0; }
  std::array<double, 1> initial_state(double v) const { return {v}; }
};

struct ConstController {
  double u = 0.0;
  double step(double, int) { return u; }
  void reset() {}
};

inline double fd_central(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace testsupport
