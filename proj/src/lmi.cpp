#include "cmpc/lmi.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace cmpc {

void LmiProblem::validate() const {
  const auto n = a.rows();
  const auto m = k_hat.rows();
  if (a.cols() != n) throw std::invalid_argument("LmiProblem: a must be square");
  if (m < 1) throw std::invalid_argument("LmiProblem: feedback must have at least one input");
  if (b.rows() != n || b.cols() != m) throw std::invalid_argument("LmiProblem: b dimension mismatch");
  if (k_hat.cols() != n) throw std::invalid_argument("LmiProblem: k_hat dimension mismatch");
  if (!all_finite(a) || !all_finite(b) || !all_finite(k_hat))
    throw std::invalid_argument("LmiProblem: non-finite entry");
}

Matrix lmi_objective_matrix(const LmiProblem& prob, const Matrix& gamma, const Matrix& p) {
  const auto n = prob.a.rows();
  const auto m = prob.k_hat.rows();
  Matrix t(m, n + m);
  t.leftCols(n) = prob.k_hat;
  t.rightCols(m) = Matrix::Identity(m, m);
  Matrix f(n, n + m);
  f.leftCols(n) = prob.a;
  f.rightCols(m) = prob.b;
  Matrix h = t.transpose() * gamma * t - f.transpose() * p * f;
  h.topLeftCorner(n, n) += p;
  return 0.5 * (h + h.transpose());
}

namespace {

// Coordinates are the packed upper triangles of (Gamma, P); the basis images
// are the corresponding directional derivatives of H, fixed per problem.
struct LmiWork {
  int n = 0, m = 0, nm = 0, dim = 0;
  std::vector<Matrix> basis;  // dim matrices, each nm x nm

  explicit LmiWork(const LmiProblem& prob) {
    n = static_cast<int>(prob.a.rows());
    m = static_cast<int>(prob.k_hat.rows());
    nm = n + m;
    Matrix t(m, nm);
    t.leftCols(n) = prob.k_hat;
    t.rightCols(m) = Matrix::Identity(m, m);
    Matrix f(n, nm);
    f.leftCols(n) = prob.a;
    f.rightCols(m) = prob.b;
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        Matrix u = Matrix::Zero(m, m);
        u(i, j) = u(j, i) = 1.0;
        basis.push_back(t.transpose() * u * t);
      }
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Matrix u = Matrix::Zero(n, n);
        u(i, j) = u(j, i) = 1.0;
        Matrix img = -f.transpose() * u * f;
        img.topLeftCorner(n, n) += u;
        basis.push_back(img);
      }
    dim = static_cast<int>(basis.size());
  }

  Matrix h_of(const Vector& theta) const {
    Matrix h = Matrix::Zero(nm, nm);
    for (int i = 0; i < dim; ++i) h += theta[i] * basis[i];
    return h;
  }

  void unpack(const Vector& theta, Matrix& gamma, Matrix& p) const {
    gamma.setZero(m, m);
    p.setZero(n, n);
    int k = 0;
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) gamma(i, j) = gamma(j, i) = theta[k++];
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) p(i, j) = p(j, i) = theta[k++];
  }

  Vector pack(const Matrix& gamma, const Matrix& p) const {
    Vector theta(dim);
    int k = 0;
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) theta[k++] = gamma(i, j);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) theta[k++] = p(i, j);
    return theta;
  }
};

struct SpectrumSpan {
  double lo = 0.0, hi = 0.0;
};

SpectrumSpan h_span(const LmiWork& w, const Vector& theta) {
  const EigResult e = sym_eig(w.h_of(theta));
  return {e.values[0], e.values[w.nm - 1]};
}

double kappa_of(const SpectrumSpan& s) {
  if (s.lo <= 0.0) return std::numeric_limits<double>::infinity();
  return s.hi / s.lo;
}

// Rescale so the spectrum [lo, hi] sits strictly inside [1, level]; valid
// whenever hi/lo < level.
Vector scale_to(const Vector& theta, const SpectrumSpan& s, double level) {
  const double c = std::sqrt(level / (s.lo * s.hi));
  return c * theta;
}

// Barrier value of min(lambda(H) - 1, level - lambda(H)) interiority; +inf
// outside the strict interior.
double barrier(const LmiWork& w, const Vector& theta, double level) {
  const EigResult e = sym_eig(w.h_of(theta));
  double f = 0.0;
  for (int i = 0; i < w.nm; ++i) {
    const double a = e.values[i] - 1.0;
    const double b = level - e.values[i];
    if (a <= 0.0 || b <= 0.0) return std::numeric_limits<double>::infinity();
    f -= std::log(a) + std::log(b);
  }
  return f;
}

// Newton iteration for the analytic center of {1 < lambda(H(theta)) < level};
// theta must start strictly interior.  Returns the centered point.
Vector center(const LmiWork& w, Vector theta, double level) {
  const int d = w.dim;
  Vector grad(d);
  Matrix hess(d, d);
  std::vector<Matrix> w1(d), w2(d);
  double f = barrier(w, theta, level);
  for (int iter = 0; iter < 60; ++iter) {
    const Matrix h = w.h_of(theta);
    const Matrix s1 = h - Matrix::Identity(w.nm, w.nm);
    const Matrix s2 = level * Matrix::Identity(w.nm, w.nm) - h;
    Eigen::LLT<Matrix> l1(s1), l2(s2);
    if (l1.info() != Eigen::Success || l2.info() != Eigen::Success) break;
    const Matrix s1i = l1.solve(Matrix::Identity(w.nm, w.nm));
    const Matrix s2i = l2.solve(Matrix::Identity(w.nm, w.nm));
    for (int i = 0; i < d; ++i) {
      w1[i] = s1i * w.basis[i];
      w2[i] = s2i * w.basis[i];
      grad[i] = -w1[i].trace() + w2[i].trace();
    }
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        const double v = (w1[i] * w1[j]).trace() + (w2[i] * w2[j]).trace();
        hess(i, j) = hess(j, i) = v;
      }
    Eigen::LDLT<Matrix> ld(hess);
    Vector step = -ld.solve(grad);
    if (ld.info() != Eigen::Success || !step.allFinite()) {
      hess.diagonal().array() += 1e-12 * hess.trace() / d + 1e-300;
      step = -hess.ldlt().solve(grad);
      if (!step.allFinite()) break;
    }
    const double decrement = -grad.dot(step);
    if (decrement <= 1e-11 * (1.0 + std::abs(f))) break;
    double tstep = 1.0;
    bool moved = false;
    while (tstep >= 1e-12) {
      const Vector cand = theta + tstep * step;
      const double fc = barrier(w, cand, level);
      if (fc < f - 0.25 * tstep * decrement) {
        theta = cand;
        f = fc;
        moved = true;
        break;
      }
      tstep *= 0.5;
    }
    if (!moved) break;
  }
  return theta;
}

}  // namespace

LmiSolution solve_lmi(const LmiProblem& prob, double tol) {
  prob.validate();
  const LmiWork w(prob);
  const int n = w.n, m = w.m;

  // Lyapunov pre-solve: P0 solves P = Acl^T P Acl + I, which exists and is
  // positive definite exactly when A - B K is Schur stable.
  Matrix p0(n, n);
  if (n > 0) {
    const Matrix a_cl = prob.a - prob.b * prob.k_hat;
    try {
      p0 = dlyap(a_cl, Matrix::Identity(n, n));
    } catch (const std::runtime_error&) {
      throw std::invalid_argument("solve_lmi: feedback does not stabilize the model");
    }
    const EigResult pe = sym_eig(p0);
    if (pe.values[0] <= 0.0)
      throw std::invalid_argument("solve_lmi: feedback does not stabilize the model");
  }

  // Seed Gamma = g I and grow g until H is positive definite.  On the null
  // space of [K I] the Lyapunov identity pins the form at |x|^2, so the
  // floor is absolute and a relative-to-lambda_max test would never pass on
  // badly scaled problems.
  double g = 1.0;
  if (n > 0) {
    Matrix f(n, n + m);
    f.leftCols(n) = prob.a;
    f.rightCols(m) = prob.b;
    g = std::max(1.0, (f.transpose() * p0 * f).cwiseAbs().maxCoeff());
  }
  Vector theta;
  SpectrumSpan span;
  bool seeded = false;
  for (int attempt = 0; attempt < 160; ++attempt) {
    theta = w.pack(g * Matrix::Identity(m, m), p0);
    span = h_span(w, theta);
    if (span.lo > 1e-9) {
      seeded = true;
      break;
    }
    g *= 2.0;
  }
  if (!seeded) throw std::runtime_error("solve_lmi: failed to find a positive definite seed");

  double best_kappa = kappa_of(span);
  Vector best_theta = theta;
  SpectrumSpan best_span = span;

  // Method-of-centers burst: recenter at shrinking levels until kappa drops
  // to the target or progress stalls.  Homogeneity lets every trial start
  // from the best point rescaled into the strict interior.
  auto improve = [&](double target) -> bool {
    for (int round = 0; round < 60; ++round) {
      if (best_kappa <= target) return true;
      const double level = std::max(target, best_kappa * (1.0 + 1e-3));
      const Vector start = scale_to(best_theta, best_span, level);
      const Vector centered = center(w, start, level);
      const SpectrumSpan cs = h_span(w, centered);
      const double ck = kappa_of(cs);
      if (ck < best_kappa * (1.0 - 1e-9)) {
        best_kappa = ck;
        best_theta = centered;
        best_span = cs;
      } else {
        return best_kappa <= target;
      }
    }
    return best_kappa <= target;
  };

  LmiSolution sol;
  double lo = 1.0;
  double hi = best_kappa;
  improve(1.0);  // free descent from the seed before bracketing
  hi = std::min(hi, best_kappa);
  while (hi - lo > tol * (1.0 + hi) && sol.bisection_steps < 200) {
    const double mid = 0.5 * (lo + hi);
    ++sol.bisection_steps;
    if (improve(mid))
      hi = std::max(std::min(hi, best_kappa), 1.0);
    else
      lo = std::min(mid, hi);
  }

  // Final normalization: place lambda_min just above 1 and report beta as the
  // top of the achieved spectrum, so both one-sided certificates hold with
  // margin limited only by eigensolver roundoff.
  const double c = (1.0 + 1e-9) / best_span.lo;
  const Vector final_theta = c * best_theta;
  Matrix gamma, p;
  w.unpack(final_theta, gamma, p);
  const Matrix h = lmi_objective_matrix(prob, gamma, p);
  const EigResult he = sym_eig(h);
  sol.gamma = gamma;
  sol.p = p;
  sol.beta = he.values[w.nm - 1];
  sol.cert_lower = he.values[0] - 1.0;
  sol.cert_upper = 0.0;  // beta is defined as lambda_max of the returned H
  {
    const EigResult shifted = sym_eig(Matrix(h - sol.beta * Matrix::Identity(w.nm, w.nm)));
    sol.cert_upper = shifted.values[w.nm - 1];
  }
  return sol;
}

}  // namespace cmpc
