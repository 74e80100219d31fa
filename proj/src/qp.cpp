#include "cmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cmpc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void DenseQp::validate() const {
  const int n = num_vars();
  const int m = num_rows();
  if (h.cols() != n || g.size() != n) throw std::invalid_argument("DenseQp: H/g dimension mismatch");
  if (rows.cols() != n && m > 0) throw std::invalid_argument("DenseQp: rows width mismatch");
  if (lo.size() != m || hi.size() != m) throw std::invalid_argument("DenseQp: bounds length mismatch");
  if (!all_finite(h) || !all_finite(g)) throw std::invalid_argument("DenseQp: nonfinite H or g");
  const double hs = h.norm();
  if ((h - h.transpose()).norm() > 1e-10 * (1.0 + hs))
    throw std::invalid_argument("DenseQp: H not symmetric");
  if (n > 0) {
    EigResult e = sym_eig(h);
    if (e.values(0) < -1e-8 * (1.0 + hs))
      throw std::invalid_argument("DenseQp: H not positive semidefinite");
  }
  for (int i = 0; i < m; ++i) {
    if (std::isnan(lo(i)) || std::isnan(hi(i)) || lo(i) > hi(i))
      throw std::invalid_argument("DenseQp: bad bounds in row " + std::to_string(i));
  }
}

double QpSolution::lagrange(int i) const {
  switch (side[i]) {
    case QpSide::lower: return -multipliers(i);
    case QpSide::upper: return multipliers(i);
    case QpSide::equality: return multipliers(i);
    default: return 0.0;
  }
}

QpInfeasible::QpInfeasible(const std::string& what, std::vector<int> bad_rows)
    : std::runtime_error(what), rows(std::move(bad_rows)) {}

QpWorkspace::QpWorkspace(const Matrix& h, const Matrix& rows) {
  n_ = static_cast<int>(h.rows());
  m_ = static_cast<int>(rows.rows());
  h_ = 0.5 * (h + h.transpose());
  llt_.compute(h_);
  if (llt_.info() != Eigen::Success) {
    // Semidefinite input: fall back to a tiny ridge so the factor exists.
    // The solver's contracts are exercised with strictly convex problems.
    const double ridge = 1e-10 * (1.0 + h_.cwiseAbs().maxCoeff());
    llt_.compute(h_ + ridge * Matrix::Identity(n_, n_));
    if (llt_.info() != Eigen::Success)
      throw std::invalid_argument("QpWorkspace: Hessian not positive definite");
  }
  rows_norm_.resize(m_, n_);
  row_scale_.resize(m_);
  row_zero_.assign(m_, 0);
  for (int i = 0; i < m_; ++i) {
    const double s = (m_ > 0) ? rows.row(i).cwiseAbs().maxCoeff() : 0.0;
    if (s <= 0.0) {
      row_zero_[i] = 1;
      row_scale_(i) = 1.0;
      rows_norm_.row(i).setZero();
    } else {
      row_scale_(i) = s;
      rows_norm_.row(i) = rows.row(i) / s;
    }
  }
  vcache_.resize(n_, m_);
  have_v_.assign(m_, 0);
}

Vector QpWorkspace::h_solve(const Vector& r) const { return llt_.solve(r); }

double QpWorkspace::m_entry(int i, int j) {
  if (!have_v_[j]) {
    vcache_.col(j) = llt_.solve(rows_norm_.row(j).transpose());
    have_v_[j] = 1;
  }
  return rows_norm_.row(i).dot(vcache_.col(j));
}

namespace {

// Builds a feasible start by relaxing the rows violated at the origin with
// nonnegative slacks and driving their sum to zero.
Vector phase_one(const Matrix& rows_norm, const Vector& lo_n, const Vector& hi_n,
                 const std::vector<char>& row_zero, double tol) {
  const int n = static_cast<int>(rows_norm.cols());
  const int m = static_cast<int>(rows_norm.rows());

  std::vector<int> violated;
  std::vector<double> sigma;
  for (int i = 0; i < m; ++i) {
    if (row_zero[i]) continue;
    if (0.0 < lo_n(i)) {
      violated.push_back(i);
      sigma.push_back(1.0);
    } else if (0.0 > hi_n(i)) {
      violated.push_back(i);
      sigma.push_back(-1.0);
    }
  }
  if (violated.empty()) return Vector::Zero(n);

  const int nv = static_cast<int>(violated.size());
  double bscale = 1.0;
  for (int i = 0; i < m; ++i) {
    if (std::isfinite(lo_n(i))) bscale = std::max(bscale, std::abs(lo_n(i)));
    if (std::isfinite(hi_n(i))) bscale = std::max(bscale, std::abs(hi_n(i)));
  }

  DenseQp aux;
  aux.h = 1e-7 * bscale * Matrix::Identity(n + nv, n + nv);
  aux.g = Vector::Zero(n + nv);
  aux.g.tail(nv).setConstant(1.0);
  aux.rows = Matrix::Zero(m + nv, n + nv);
  aux.lo.resize(m + nv);
  aux.hi.resize(m + nv);
  aux.rows.topLeftCorner(m, n) = rows_norm;
  aux.lo.head(m) = lo_n;
  aux.hi.head(m) = hi_n;
  for (int j = 0; j < nv; ++j) {
    aux.rows(violated[j], n + j) = sigma[j];
    aux.rows(m + j, n + j) = 1.0;  // slack >= 0
    aux.lo(m + j) = 0.0;
    aux.hi(m + j) = kInf;
  }

  Vector start = Vector::Zero(n + nv);
  for (int j = 0; j < nv; ++j) {
    const int i = violated[j];
    start(n + j) = (sigma[j] > 0.0) ? (lo_n(i) - 0.0) : (0.0 - hi_n(i));
  }

  QpSolution sol = solve_qp(aux, tol, start);
  if (sol.status != QpStatus::optimal)
    throw std::runtime_error("solve_qp: feasibility phase did not converge");

  Vector x = sol.x.head(n);
  std::vector<int> bad;
  for (int j = 0; j < nv; ++j) {
    const int i = violated[j];
    const double v = rows_norm.row(i).dot(x);
    const double viol = std::max(lo_n(i) - v, v - hi_n(i));
    if (viol > 1e-7 * (1.0 + bscale)) bad.push_back(i);
  }
  if (!bad.empty()) {
    std::ostringstream os;
    os << "solve_qp: infeasible constraint rows {";
    for (size_t k = 0; k < bad.size(); ++k) os << (k ? ", " : "") << bad[k];
    os << "}";
    throw QpInfeasible(os.str(), bad);
  }
  return x;
}

}  // namespace

QpSolution QpWorkspace::solve(const Vector& g, const Vector& lo, const Vector& hi, double tol,
                              const Vector* x0) {
  Vector lo_n(m_), hi_n(m_);
  for (int i = 0; i < m_; ++i) {
    lo_n(i) = std::isfinite(lo(i)) ? lo(i) / row_scale_(i) : -kInf;
    hi_n(i) = std::isfinite(hi(i)) ? hi(i) / row_scale_(i) : kInf;
  }
  // A row with a zero normal constrains nothing; it is only satisfiable if the
  // bounds admit zero.
  {
    std::vector<int> bad;
    for (int i = 0; i < m_; ++i)
      if (row_zero_[i] && (lo_n(i) > 0.0 || hi_n(i) < 0.0)) bad.push_back(i);
    if (!bad.empty()) {
      std::ostringstream os;
      os << "solve_qp: infeasible constraint rows {";
      for (size_t k = 0; k < bad.size(); ++k) os << (k ? ", " : "") << bad[k];
      os << "} (zero normal, bounds exclude zero)";
      throw QpInfeasible(os.str(), bad);
    }
  }

  Vector start;
  if (x0 != nullptr) {
    double viol = 0.0;
    for (int i = 0; i < m_; ++i) {
      if (row_zero_[i]) continue;
      const double v = rows_norm_.row(i).dot(*x0);
      viol = std::max({viol, lo_n(i) - v, v - hi_n(i)});
    }
    if (viol > 1e-6) throw std::invalid_argument("solve_qp: supplied start point is infeasible");
    start = *x0;
  } else {
    start = phase_one(rows_norm_, lo_n, hi_n, row_zero_, tol);
  }
  return solve_feasible(g, lo_n, hi_n, tol, start);
}

QpSolution QpWorkspace::solve_feasible(const Vector& g, const Vector& lo_n, const Vector& hi_n,
                                       double tol, const Vector& x_start) {
  Vector x = x_start;
  const double gscale = 1.0 + g.cwiseAbs().maxCoeff();
  const double mult_tol = tol * gscale;
  const int max_iter = 60 + 6 * (n_ + m_);

  std::vector<int> w;                      // working set (row indices)
  std::vector<QpSide> wside;               // side each member is active on
  std::vector<QpSide> side(m_, QpSide::none);

  auto in_w = [&](int i) { return side[i] != QpSide::none; };

  // Cholesky factor of the working-set Schur complement S = A_w H^-1 A_w^T,
  // maintained incrementally: a join is a forward solve plus appended row, a
  // release removes one row and retriangularizes the trailing block with
  // Givens column rotations.  Keeps every iteration at O(k^2) instead of a
  // fresh O(k^3) factorization.
  const int cap = std::min(n_, m_);
  Matrix lfac = Matrix::Zero(cap, cap);

  auto try_add = [&](int i, QpSide sd) -> bool {
    const int k = static_cast<int>(w.size());
    if (k >= cap) return false;
    const double mii = m_entry(i, i);
    Vector l(k);
    for (int a = 0; a < k; ++a) l(a) = m_entry(w[a], i);
    if (k > 0) lfac.topLeftCorner(k, k).triangularView<Eigen::Lower>().solveInPlace(l);
    // Reject rows that would make the Schur complement numerically singular.
    // The test is relative to the row's own H^-1-metric norm: rows living in
    // stiff subspaces have legitimately tiny mii.
    const double pivot = mii - l.squaredNorm();
    if (pivot <= 1e-12 * mii) return false;
    lfac.row(k).head(k) = l.transpose();
    lfac(k, k) = std::sqrt(pivot);
    w.push_back(i);
    wside.push_back(sd);
    side[i] = sd;
    return true;
  };

  auto drop_at = [&](int a) {
    const int k = static_cast<int>(w.size());
    side[w[a]] = QpSide::none;
    w.erase(w.begin() + a);
    wside.erase(wside.begin() + a);
    for (int r = a; r < k - 1; ++r) lfac.row(r).head(k) = lfac.row(r + 1).head(k);
    // Rows a.. now carry one superdiagonal entry each; chase it off.
    for (int c = a; c < k - 1; ++c) {
      const double f = lfac(c, c);
      const double s = lfac(c, c + 1);
      if (s == 0.0) continue;
      const double r = std::hypot(f, s);
      const double cs = f / r;
      const double sn = s / r;
      for (int r2 = c; r2 < k - 1; ++r2) {
        const double t1 = lfac(r2, c);
        const double t2 = lfac(r2, c + 1);
        lfac(r2, c) = cs * t1 + sn * t2;
        lfac(r2, c + 1) = cs * t2 - sn * t1;
      }
    }
  };

  // Row values tracked incrementally across steps; only the step direction
  // needs a fresh product each iteration.
  Vector rv = rows_norm_ * x;

  // Equality rows stay active throughout.  Inequality rows that the start
  // point grazes are seeded too: a warm start whose tight rows match the
  // optimal active set then converges in a handful of iterations.
  for (int i = 0; i < m_; ++i) {
    if (row_zero_[i]) continue;
    if (lo_n(i) == hi_n(i)) try_add(i, QpSide::equality);
  }
  for (int i = 0; i < m_; ++i) {
    if (row_zero_[i] || in_w(i)) continue;
    if (std::isfinite(lo_n(i)) && std::abs(rv(i) - lo_n(i)) <= 1e-10 * (1.0 + std::abs(lo_n(i))))
      try_add(i, QpSide::lower);
    else if (std::isfinite(hi_n(i)) &&
             std::abs(rv(i) - hi_n(i)) <= 1e-10 * (1.0 + std::abs(hi_n(i))))
      try_add(i, QpSide::upper);
  }

  QpSolution sol;
  sol.status = QpStatus::max_iterations;
  Vector mu;

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    Vector grad = g;
    grad.noalias() += h_ * x;

    const Vector y = h_solve(grad);
    Vector p;
    const int k = static_cast<int>(w.size());
    if (k == 0) {
      p = -y;
      mu.resize(0);
    } else {
      Vector rhs(k);
      for (int a = 0; a < k; ++a) rhs(a) = -rows_norm_.row(w[a]).dot(y);
      mu = rhs;
      lfac.topLeftCorner(k, k).triangularView<Eigen::Lower>().solveInPlace(mu);
      lfac.topLeftCorner(k, k).triangularView<Eigen::Lower>().transpose().solveInPlace(mu);
      p = -y;
      for (int a = 0; a < k; ++a) p.noalias() -= mu(a) * vcache_.col(w[a]);
    }

    // mu are the EQP multipliers at x + p (constant along p), so once a full
    // step lands on the subspace minimizer the sign check can run right away
    // instead of waiting for a residual test that ill conditioning may keep
    // above threshold forever.
    const double pinf = (n_ > 0) ? p.cwiseAbs().maxCoeff() : 0.0;
    if (pinf > 1e-11 * (1.0 + x.cwiseAbs().maxCoeff())) {
      const Vector rp = rows_norm_ * p;
      double alpha = 1.0;
      int blocker = -1;
      QpSide bside = QpSide::none;
      for (int i = 0; i < m_; ++i) {
        if (row_zero_[i] || in_w(i)) continue;
        const double gp = rp(i);
        if (gp > 1e-12) {
          if (std::isfinite(hi_n(i))) {
            const double d = std::max(0.0, (hi_n(i) - rv(i)) / gp);
            if (d < alpha) {
              alpha = d;
              blocker = i;
              bside = QpSide::upper;
            }
          }
        } else if (gp < -1e-12) {
          if (std::isfinite(lo_n(i))) {
            const double d = std::max(0.0, (lo_n(i) - rv(i)) / gp);
            if (d < alpha) {
              alpha = d;
              blocker = i;
              bside = QpSide::lower;
            }
          }
        }
      }

      x.noalias() += alpha * p;
      rv.noalias() += alpha * rp;
      if (blocker >= 0) {
        if (!try_add(blocker, bside)) {
          // Degenerate geometry: the blocking row is dependent on the working
          // set.  Release the member with the smallest multiplier magnitude to
          // make room.
          int drop = -1;
          double small = kInf;
          for (int a = 0; a < k; ++a) {
            if (wside[a] == QpSide::equality) continue;
            if (std::abs(mu(a)) < small) {
              small = std::abs(mu(a));
              drop = a;
            }
          }
          if (drop < 0) throw std::runtime_error("solve_qp: degenerate active set");
          drop_at(drop);
        }
        continue;
      }
    }

    // x is the minimizer over the working set; drop the worst wrong-signed
    // multiplier or stop.
    int worst = -1;
    double worst_v = mult_tol;
    for (int a = 0; a < k; ++a) {
      if (wside[a] == QpSide::equality) continue;
      const double bad = (wside[a] == QpSide::upper) ? -mu(a) : mu(a);
      if (bad > worst_v) {
        worst_v = bad;
        worst = a;
      }
    }
    if (worst < 0) {
      sol.status = QpStatus::optimal;
      ++iter;
      break;
    }
    drop_at(worst);
  }
  sol.iterations = iter;

  sol.x = x;
  sol.multipliers = Vector::Zero(m_);
  sol.side.assign(m_, QpSide::none);
  for (size_t a = 0; a < w.size(); ++a) {
    sol.side[w[a]] = wside[a];
    sol.multipliers(w[a]) = (a < static_cast<size_t>(mu.size()) ? mu(a) : 0.0) / row_scale_(w[a]);
  }

  // KKT residual in original row scaling.
  Vector grad = g;
  grad.noalias() += h_ * x;
  for (int i = 0; i < m_; ++i)
    grad.noalias() += sol.multipliers(i) * (rows_norm_.row(i) * row_scale_(i)).transpose();
  double res = (n_ > 0) ? grad.cwiseAbs().maxCoeff() / (1.0 + g.cwiseAbs().maxCoeff()) : 0.0;
  for (int i = 0; i < m_; ++i) {
    if (row_zero_[i]) continue;
    const double v = rows_norm_.row(i).dot(x);
    const double scale = 1.0 + std::max(std::isfinite(lo_n(i)) ? std::abs(lo_n(i)) : 0.0,
                                        std::isfinite(hi_n(i)) ? std::abs(hi_n(i)) : 0.0);
    res = std::max(res, std::max(lo_n(i) - v, v - hi_n(i)) / scale);
    if (sol.side[i] == QpSide::none && std::abs(sol.multipliers(i)) > 0.0)
      res = std::max(res, std::abs(sol.multipliers(i)));
    if (sol.side[i] == QpSide::lower)
      res = std::max(res, std::max(0.0, sol.multipliers(i) * row_scale_(i)) / (1.0 + g.cwiseAbs().maxCoeff()));
    if (sol.side[i] == QpSide::upper)
      res = std::max(res, std::max(0.0, -sol.multipliers(i) * row_scale_(i)) / (1.0 + g.cwiseAbs().maxCoeff()));
  }
  sol.kkt_residual = res;
  return sol;
}

QpSolution solve_qp(const DenseQp& qp, double tol) {
  QpWorkspace ws(qp.h, qp.rows);
  return ws.solve(qp.g, qp.lo, qp.hi, tol, nullptr);
}

QpSolution solve_qp(const DenseQp& qp, double tol, const Vector& x0) {
  QpWorkspace ws(qp.h, qp.rows);
  return ws.solve(qp.g, qp.lo, qp.hi, tol, &x0);
}

}  // namespace cmpc
