#include "cmpc/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmpc {

void MpcSpec::validate() const {
  const auto nx = aug.a_tilde.rows();
  if (nx < 2 || aug.a_tilde.cols() != nx || aug.b_tilde.rows() != nx || aug.b_tilde.cols() != 1 ||
      aug.k_hat.rows() != 1 || aug.k_hat.cols() != nx || aug.c_tilde.cols() != nx)
    throw std::invalid_argument("MpcSpec: augmented model dimensions are inconsistent");
  if (cost.q.rows() != nx || cost.r.rows() != 1 || cost.s.rows() != 1 || cost.s.cols() != nx)
    throw std::invalid_argument("MpcSpec: cost dimensions do not match the augmented model");
  if (p_terminal.rows() != nx || p_terminal.cols() != nx)
    throw std::invalid_argument("MpcSpec: terminal weight dimension mismatch");
  if (horizon < 1) throw std::invalid_argument("MpcSpec: horizon must be at least 1");
  if (!(u_min < u_max) || !(u_bar >= u_min) || !(u_bar <= u_max))
    throw std::invalid_argument("MpcSpec: need u_min <= u_bar <= u_max with u_min < u_max");
  if (!(weights.slack_quad > 0.0) || !(weights.slack_lin >= 0.0))
    throw std::invalid_argument("MpcSpec: slack weights must be positive");
  if (!(qp_tol > 0.0)) throw std::invalid_argument("MpcSpec: qp_tol must be positive");
}

MpcController::MpcController(const MpcSpec& spec) : spec_(spec) {
  spec_.validate();
  const int nx = static_cast<int>(spec_.aug.a_tilde.rows());
  const int big_n = spec_.horizon;
  const bool has_lo = std::isfinite(spec_.z_min);
  const bool has_hi = std::isfinite(spec_.z_max);
  n_slack_lo_ = has_lo ? big_n + 1 : 0;
  n_slack_hi_ = has_hi ? big_n + 1 : 0;
  nv_ = big_n + n_slack_lo_ + n_slack_hi_;

  // Prediction over the horizon: X = sx x~0 + su U stacked over k = 0..N.
  Matrix sx = Matrix::Zero((big_n + 1) * nx, nx);
  Matrix su = Matrix::Zero((big_n + 1) * nx, big_n);
  sx.topRows(nx).setIdentity();
  for (int k = 0; k < big_n; ++k) {
    sx.middleRows((k + 1) * nx, nx) = spec_.aug.a_tilde * sx.middleRows(k * nx, nx);
    su.middleRows((k + 1) * nx, nx) = spec_.aug.a_tilde * su.middleRows(k * nx, nx);
    su.block((k + 1) * nx, k, nx, 1) += spec_.aug.b_tilde;
  }

  // Condensed cost: stage weights for k < N, the terminal weight at k = N,
  // and the cross term over k < N.
  Matrix wsu((big_n + 1) * nx, big_n), wsx((big_n + 1) * nx, nx);
  for (int k = 0; k <= big_n; ++k) {
    const Matrix& w = k == big_n ? spec_.p_terminal : spec_.cost.q;
    wsu.middleRows(k * nx, nx) = w * su.middleRows(k * nx, nx);
    wsx.middleRows(k * nx, nx) = w * sx.middleRows(k * nx, nx);
  }
  Matrix ssu = Matrix::Zero(big_n, big_n), ssx = Matrix::Zero(big_n, nx);
  for (int k = 0; k < big_n; ++k) {
    ssu.row(k) = spec_.cost.s * su.middleRows(k * nx, nx);
    ssx.row(k) = spec_.cost.s * sx.middleRows(k * nx, nx);
  }
  Matrix hu = su.transpose() * wsu;
  hu.diagonal().array() += spec_.cost.r(0, 0);
  hu += ssu + ssu.transpose();
  hu = Matrix(hu + hu.transpose());  // doubles and symmetrizes: J = 1/2 U'HU + g'U
  fu_ = 2.0 * (su.transpose() * wsx + ssx);

  zphi_x_.resize(big_n + 1, nx);
  zphi_u_.resize(big_n + 1, big_n);
  for (int k = 0; k <= big_n; ++k) {
    zphi_x_.row(k) = spec_.aug.c_tilde * sx.middleRows(k * nx, nx);
    zphi_u_.row(k) = spec_.aug.c_tilde * su.middleRows(k * nx, nx);
  }

  Matrix h = Matrix::Zero(nv_, nv_);
  h.topLeftCorner(big_n, big_n) = hu;
  for (int i = big_n; i < nv_; ++i) h(i, i) = 2.0 * spec_.weights.slack_quad;

  // Rows: input box, soft lower output bound, soft upper output bound, and
  // slack nonnegativity.  Bounds on the soft rows move with x~0 every step.
  nrows_ = big_n + 2 * n_slack_lo_ + 2 * n_slack_hi_;
  Matrix rows = Matrix::Zero(nrows_, nv_);
  lo_base_ = Vector::Constant(nrows_, -std::numeric_limits<double>::infinity());
  hi_base_ = Vector::Constant(nrows_, std::numeric_limits<double>::infinity());
  int r = 0;
  for (int k = 0; k < big_n; ++k, ++r) {
    rows(r, k) = 1.0;
    lo_base_[r] = spec_.u_min - spec_.u_bar;
    hi_base_[r] = spec_.u_max - spec_.u_bar;
  }
  if (has_lo)
    for (int k = 0; k <= big_n; ++k, ++r) {
      rows.block(r, 0, 1, big_n) = zphi_u_.row(k);
      rows(r, big_n + k) = 1.0;  // z_k + slack >= bound
    }
  if (has_hi)
    for (int k = 0; k <= big_n; ++k, ++r) {
      rows.block(r, 0, 1, big_n) = zphi_u_.row(k);
      rows(r, big_n + n_slack_lo_ + k) = -1.0;  // z_k - slack <= bound
    }
  for (int i = big_n; i < nv_; ++i, ++r) {
    rows(r, i) = 1.0;
    lo_base_[r] = 0.0;
  }

  work_.emplace(h, rows);
  g_ = Vector::Zero(nv_);
  for (int i = big_n; i < nv_; ++i) g_[i] = spec_.weights.slack_lin;
  lo_ = lo_base_;
  hi_ = hi_base_;
  start_ = Vector::Zero(nv_);
  xtilde_ = Vector::Zero(nx);
}

void MpcController::reset() {
  xi_ = 0.0;
  diag_ = Diagnostics{};
}

double MpcController::step(double y, int) {
  const int nx = static_cast<int>(spec_.aug.a_tilde.rows());
  const int big_n = spec_.horizon;
  const double y_dev = y - spec_.y_bar;
  Vector x_dev;
  if (estimator_) {
    x_dev = estimator_(y_dev);
    if (x_dev.size() != nx - 1)
      throw std::runtime_error("MpcController: estimator returned wrong state size");
  } else {
    if (nx != 2)
      throw std::runtime_error("MpcController: need an estimator when the plant state is not scalar");
    x_dev = Vector::Constant(1, y_dev);
  }
  xtilde_.head(nx - 1) = x_dev;
  xtilde_[nx - 1] = xi_;

  g_.head(big_n) = fu_ * xtilde_;
  start_.setZero();
  const Vector zfree = zphi_x_ * xtilde_;
  int r = big_n;
  if (n_slack_lo_ > 0) {
    const double bound = spec_.z_min - spec_.y_bar;
    for (int k = 0; k <= big_n; ++k, ++r) {
      lo_[r] = bound - zfree[k];
      start_[big_n + k] = std::max(0.0, lo_[r]);
    }
  }
  if (n_slack_hi_ > 0) {
    const double bound = spec_.z_max - spec_.y_bar;
    for (int k = 0; k <= big_n; ++k, ++r) {
      hi_[r] = bound - zfree[k];
      start_[big_n + n_slack_lo_ + k] = std::max(0.0, -hi_[r]);
    }
  }

  const QpSolution sol = work_->solve(g_, lo_, hi_, spec_.qp_tol, &start_);
  const double u_dev =
      std::clamp(sol.x[0], spec_.u_min - spec_.u_bar, spec_.u_max - spec_.u_bar);

  diag_.status = sol.status;
  diag_.qp_iterations = sol.iterations;
  diag_.kkt_residual = sol.kkt_residual;
  diag_.slack_lower0 = n_slack_lo_ > 0 ? sol.x[big_n] : 0.0;
  diag_.slack_upper0 = n_slack_hi_ > 0 ? sol.x[big_n + n_slack_lo_] : 0.0;
  diag_.matched_gap = std::abs(sol.x[0] - (-(spec_.aug.k_hat * xtilde_)(0, 0)));

  xi_ = (spec_.aug.a_tilde.row(nx - 1) * xtilde_)(0, 0) + spec_.aug.b_tilde(nx - 1, 0) * u_dev;
  return spec_.u_bar + u_dev;
}

}  // namespace cmpc
