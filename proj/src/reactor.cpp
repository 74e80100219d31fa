#include "cmpc/reactor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmpc {

void ReactorParameters::validate() const {
  if (!(k0 > 0.0)) throw std::invalid_argument("ReactorParameters: k0 must be positive");
  if (!(ea_over_r > 0.0)) throw std::invalid_argument("ReactorParameters: ea_over_r must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("ReactorParameters: beta must be positive");
  if (!(volume > 0.0)) throw std::invalid_argument("ReactorParameters: volume must be positive");
  if (!(cain > 0.0) || !(cbin > 0.0))
    throw std::invalid_argument("ReactorParameters: inflow concentrations must be positive");
  if (!(ctin > 0.0)) throw std::invalid_argument("ReactorParameters: ctin must be positive");
  if (!(sigma_t >= 0.0)) throw std::invalid_argument("ReactorParameters: sigma_t must be nonnegative");
  if (!(rv >= 0.0)) throw std::invalid_argument("ReactorParameters: rv must be nonnegative");
  if (!(f_min_ml >= 0.0) || !(f_max_ml > f_min_ml))
    throw std::invalid_argument("ReactorParameters: flow bounds must satisfy 0 <= f_min < f_max");
}

double ReactorParameters::c_t_max() const {
  return ctin + beta * std::min(cain, 0.5 * cbin);
}

double arrhenius(const ReactorParameters& par, double c_t) {
  if (!(c_t > 0.0)) throw std::domain_error("arrhenius: temperature must be positive");
  return par.k0 * std::exp(-par.ea_over_r / c_t);
}

std::array<double, 2> manifold_concentrations(const ReactorParameters& par, double c_t) {
  const double shift = (par.ctin - c_t) / par.beta;
  return {par.cain + shift, par.cbin + 2.0 * shift};
}

namespace {

// Rate with reagent clamping: concentrations can graze zero numerically and
// the rate must not turn negative there.
double clamped_rate(const ReactorParameters& par, double c_a, double c_b, double c_t) {
  return arrhenius(par, c_t) * std::max(c_a, 0.0) * std::max(c_b, 0.0);
}

}  // namespace

double drift_1state(const ReactorParameters& par, double c_t, double flow_ls) {
  const auto [c_a, c_b] = manifold_concentrations(par, c_t);
  return flow_ls / par.volume * (par.ctin - c_t) + par.beta * clamped_rate(par, c_a, c_b, c_t);
}

Linearization linearize_1state(const ReactorParameters& par, double c_t, double flow_ls) {
  Linearization lin;
  lin.b_c = (par.ctin - c_t) / par.volume;
  lin.a_c = -flow_ls / par.volume;
  const auto [c_a, c_b] = manifold_concentrations(par, c_t);
  if (c_a > 0.0 && c_b > 0.0) {
    const double k = arrhenius(par, c_t);
    lin.a_c += par.beta * k * par.ea_over_r / (c_t * c_t) * c_a * c_b - k * (c_b + 2.0 * c_a);
  }
  return lin;
}

std::vector<SteadyState> steady_states(const ReactorParameters& par, double flow_ls) {
  par.validate();
  if (flow_ls < 0.0) throw std::invalid_argument("steady_states: flow must be nonnegative");
  if (flow_ls == 0.0) return {{par.c_t_max(), true}};

  const double lo = par.ctin * (1.0 + 1e-12);
  const double hi = par.c_t_max() * (1.0 - 1e-12);
  const int cells = 4000;
  std::vector<double> roots;
  double prev_t = lo;
  double prev_f = drift_1state(par, prev_t, flow_ls);
  for (int i = 1; i <= cells; ++i) {
    const double t = lo + (hi - lo) * i / cells;
    const double f = drift_1state(par, t, flow_ls);
    if (prev_f == 0.0) {
      roots.push_back(prev_t);
    } else if (prev_f * f < 0.0) {
      double a = prev_t, b = t, fa = prev_f;
      for (int it = 0; it < 200 && b - a > 1e-13 * std::max(1.0, std::abs(b)); ++it) {
        const double m = 0.5 * (a + b);
        const double fm = drift_1state(par, m, flow_ls);
        if (fm == 0.0) {
          a = b = m;
          break;
        }
        if (fa * fm < 0.0)
          b = m;
        else {
          a = m;
          fa = fm;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    prev_t = t;
    prev_f = f;
  }
  if (prev_f == 0.0) roots.push_back(prev_t);

  std::vector<SteadyState> out;
  for (double r : roots) {
    if (!out.empty() && std::abs(r - out.back().c_t) < 1e-8) continue;
    out.push_back({r, linearize_1state(par, r, flow_ls).a_c < 0.0});
  }
  if (out.empty()) throw std::runtime_error("steady_states: no equilibrium found");
  return out;
}

SteadyState steady_state(const ReactorParameters& par, double flow_ls, Branch branch) {
  const auto roots = steady_states(par, flow_ls);
  switch (branch) {
    case Branch::low:
      return roots.front();
    case Branch::high:
      return roots.back();
    case Branch::middle:
      if (roots.size() != 3)
        throw std::runtime_error("steady_state: no middle branch at this flow");
      return roots[1];
  }
  throw std::logic_error("steady_state: bad branch");
}

std::pair<Matrix, Matrix> discretize(const Matrix& a, const Matrix& b, double ts) {
  const auto n = a.rows();
  const auto m = b.cols();
  if (a.cols() != n || b.rows() != n) throw std::invalid_argument("discretize: dimension mismatch");
  if (!(ts > 0.0)) throw std::invalid_argument("discretize: ts must be positive");
  Matrix block = Matrix::Zero(n + m, n + m);
  block.topLeftCorner(n, n) = a * ts;
  block.topRightCorner(n, m) = b * ts;
  const Matrix e = expm(block);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

LinearPlant plant_statespace(const ReactorParameters& par, double flow_ls, double ts, Branch branch) {
  const SteadyState ss = steady_state(par, flow_ls, branch);
  const Linearization lin = linearize_1state(par, ss.c_t, flow_ls);
  Matrix ac(1, 1), bc(1, 1);
  ac(0, 0) = lin.a_c;
  bc(0, 0) = lin.b_c;
  LinearPlant plant;
  std::tie(plant.a, plant.b) = discretize(ac, bc, ts);
  plant.c = Matrix::Identity(1, 1);
  plant.ts = ts;
  plant.x_bar = ss.c_t;
  plant.u_bar = flow_ls;
  return plant;
}

ReactorParameters calibrate(const ReactorParameters& base, const CalibrationAnchors& anchors) {
  if (!(anchors.flow_ml > 0.0) || !(anchors.temp_k > base.ctin) ||
      !(anchors.a_cl > 0.0 && anchors.a_cl < 1.0) || !(anchors.ts > 0.0))
    throw std::invalid_argument("calibrate: bad anchors");

  const double flow = ml_min_to_ls(anchors.flow_ml);
  const double tbar = anchors.temp_k;
  const double delta = tbar - base.ctin;
  const double dil = flow / base.volume;
  const double a_c_target = std::log(anchors.a_cl) / anchors.ts;

  // Stationarity gives beta*k*cA*cB = q; the linearization anchor then gives
  // k*(cB + 2 cA) = s.  With w = delta/beta both reduce to a quadratic in w.
  const double q = dil * delta;
  const double s = -dil + q * base.ea_over_r / (tbar * tbar) - a_c_target;
  if (!(s > 0.0)) throw std::runtime_error("calibrate: anchors not attainable");
  const double csum = base.cbin + 2.0 * base.cain;
  const double a2 = 2.0 * s * delta + 4.0 * q;
  const double a1 = -csum * (s * delta + q);
  const double a0 = base.cain * base.cbin * s * delta;
  const double disc = a1 * a1 - 4.0 * a2 * a0;
  if (!(disc >= 0.0)) throw std::runtime_error("calibrate: anchors not attainable");
  const double w_cap = std::min(base.cain, 0.5 * base.cbin);
  double w = -1.0;
  for (double cand : {(-a1 - std::sqrt(disc)) / (2.0 * a2), (-a1 + std::sqrt(disc)) / (2.0 * a2)}) {
    if (cand > 0.0 && cand < w_cap) {
      w = cand;
      break;
    }
  }
  if (w < 0.0) throw std::runtime_error("calibrate: no physical root");

  ReactorParameters par = base;
  par.beta = delta / w;
  const double k = s / (csum - 4.0 * w);
  par.k0 = k * std::exp(base.ea_over_r / tbar);
  par.validate();

  // Newton polish on (log k0, beta) against the two anchor residuals.
  for (int it = 0; it < 12; ++it) {
    auto resid = [&](const ReactorParameters& p) {
      Vector r(2);
      r[0] = drift_1state(p, tbar, flow);
      r[1] = linearize_1state(p, tbar, flow).a_c - a_c_target;
      return r;
    };
    const Vector r = resid(par);
    if (std::abs(r[0]) < 1e-13 * q && std::abs(r[1]) < 1e-15) break;
    Matrix j(2, 2);
    const double h1 = 1e-7;
    const double h2 = 1e-7 * par.beta;
    ReactorParameters pk = par;
    pk.k0 = par.k0 * std::exp(h1);
    j.col(0) = (resid(pk) - r) / h1;
    ReactorParameters pb = par;
    pb.beta = par.beta + h2;
    j.col(1) = (resid(pb) - r) / h2;
    const Vector step = j.partialPivLu().solve(r);
    par.k0 *= std::exp(-step[0]);
    par.beta -= step[1];
  }
  par.validate();
  return par;
}

void Cstr3Sde::drift(std::span<const double> x, double u, std::span<double> out) const {
  const double c_a = x[0] / par_.volume;
  const double c_b = x[1] / par_.volume;
  const double c_t = x[2] / par_.volume;
  const double rv = clamped_rate(par_, c_a, c_b, c_t) * par_.volume;
  out[0] = u * (par_.cain - c_a) - rv;
  out[1] = u * (par_.cbin - c_b) - 2.0 * rv;
  out[2] = u * (par_.ctin - c_t) + par_.beta * rv;
}

void Cstr3Sde::diffusion(std::span<const double> x, double u, std::span<double> out) const {
  (void)x;
  out[0] = 0.0;
  out[1] = 0.0;
  out[2] = u * par_.sigma_t;
}

std::array<double, 3> Cstr3Sde::initial_state(double c_t) const {
  const auto [c_a, c_b] = manifold_concentrations(par_, c_t);
  return {c_a * par_.volume, c_b * par_.volume, c_t * par_.volume};
}

}  // namespace cmpc
