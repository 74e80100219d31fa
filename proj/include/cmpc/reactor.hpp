#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "cmpc/linalg.hpp"
#include "cmpc/units.hpp"

namespace cmpc {

// Exothermic A + 2B -> C reactor in a constant-volume vessel with inflow and
// outflow at the same volumetric rate.  The full state is the amount vector
// n = (n_A, n_B, n_T) in (mol, mol, K*L); the thermal coordinate n_T is the
// vessel temperature times the volume so that all three balances share the
// transport structure dn/dt = F c_in - F n/V + s r V.  The k0 and beta
// defaults are the calibrate() output for the default anchors, frozen to
// full precision.
struct ReactorParameters {
  double k0 = 4.8287386925489449e+10;   // L/(mol s), Arrhenius prefactor
  double ea_over_r = 8500.0;            // K, activation temperature
  double beta = 133.76662758746366;     // K L/mol, adiabatic temperature rise per mol reacted
  double volume = 0.105;                // L
  double cain = 0.8;                    // mol/L, inflow concentration of A
  double cbin = 1.2;                    // mol/L, inflow concentration of B
  double ctin = 273.65;                 // K, inflow temperature
  double sigma_t = 5.0;                 // K sqrt(s), thermal noise scale (multiplies flow)
  double rv = 0.1;                      // K^2, measurement noise variance
  double f_min_ml = 0.0;                // mL/min, actuator range
  double f_max_ml = 1000.0;

  void validate() const;
  // Highest temperature reachable on the inflow-consistent manifold (the
  // limiting reagent is exhausted there and the rate term vanishes).
  double c_t_max() const;
};

double arrhenius(const ReactorParameters& par, double c_t);  // throws std::domain_error for c_t <= 0

// Along trajectories started on it, the concentration state stays on the
// two-parameter family c_A = cain + (ctin - c_T)/beta, c_B = cbin +
// 2 (ctin - c_T)/beta; this collapses the model to the single coordinate c_T.
std::array<double, 2> manifold_concentrations(const ReactorParameters& par, double c_t);

// Temperature drift of the one-state model, K/s.  flow in L/s.
double drift_1state(const ReactorParameters& par, double c_t, double flow_ls);

struct Linearization {
  double a_c = 0.0;  // 1/s, d(drift)/d(c_T)
  double b_c = 0.0;  // K/L, d(drift)/d(flow)
};
Linearization linearize_1state(const ReactorParameters& par, double c_t, double flow_ls);

enum class Branch { low, middle, high };

struct SteadyState {
  double c_t = 0.0;
  bool stable = false;
};

// All equilibria of the one-state model at the given flow, sorted by
// temperature.  The cooled regime typically has one low root; an S-shaped
// region has three (low stable, middle unstable, high stable).
std::vector<SteadyState> steady_states(const ReactorParameters& par, double flow_ls);

// Selects one equilibrium by branch.  middle requires three roots; low/high
// pick the extremes and work for any root count.  Throws std::runtime_error
// when the requested branch does not exist at this flow.
SteadyState steady_state(const ReactorParameters& par, double flow_ls, Branch branch);

// Zero-order-hold discretization of xdot = a x + b u over one sample period.
std::pair<Matrix, Matrix> discretize(const Matrix& a, const Matrix& b, double ts);

// Discrete linear deviation model around an equilibrium: x = c_T - x_bar,
// u = flow - u_bar (L/s), z = y = c x.
struct LinearPlant {
  Matrix a;  // 1 x 1
  Matrix b;  // 1 x 1
  Matrix c;  // 1 x 1
  double ts = 1.0;
  double x_bar = 0.0;  // K
  double u_bar = 0.0;  // L/s
};
LinearPlant plant_statespace(const ReactorParameters& par, double flow_ls, double ts,
                             Branch branch = Branch::high);

// Anchors that pin down (k0, beta) given the remaining parameters: at the
// anchor flow the high branch sits at temp_k, and the one-step transition of
// the linearized loop equals a_cl for the sample period ts.
struct CalibrationAnchors {
  double flow_ml = 630.0;
  double temp_k = 332.45;
  double a_cl = 0.9572;
  double ts = 1.0;
};

// Returns base with (k0, beta) replaced so both anchors hold.  The two
// conditions reduce analytically to a quadratic in (ctin-derived) conversion;
// the physical root keeps both reagent concentrations positive.  A short
// Newton polish removes the residual floating-point drift.
ReactorParameters calibrate(const ReactorParameters& base, const CalibrationAnchors& anchors = {});

// Three-state stochastic model.  Input u is flow in L/s; the one driving
// noise channel enters the thermal balance with intensity u * sigma_t.
class Cstr3Sde {
 public:
  static constexpr int state_dim = 3;
  static constexpr int noise_dim = 1;

  explicit Cstr3Sde(const ReactorParameters& par) : par_(par) {}

  void drift(std::span<const double> x, double u, std::span<double> out) const;
  void diffusion(std::span<const double> x, double u, std::span<double> out) const;
  double output(std::span<const double> x) const { return x[2] / par_.volume; }
  double measurement_variance() const { return par_.rv; }
  double input_record_scale() const { return kMlMinPerLs; }

  std::array<double, 3> initial_state(double c_t) const;
  const ReactorParameters& parameters() const { return par_; }

 private:
  ReactorParameters par_;
};

// One-state stochastic model on the manifold; state is c_T in K.
class Cstr1Sde {
 public:
  static constexpr int state_dim = 1;
  static constexpr int noise_dim = 1;

  explicit Cstr1Sde(const ReactorParameters& par) : par_(par) {}

  void drift(std::span<const double> x, double u, std::span<double> out) const {
    out[0] = drift_1state(par_, x[0], u);
  }
  void diffusion(std::span<const double> x, double u, std::span<double> out) const {
    (void)x;
    out[0] = u * par_.sigma_t / par_.volume;
  }
  double output(std::span<const double> x) const { return x[0]; }
  double measurement_variance() const { return par_.rv; }
  double input_record_scale() const { return kMlMinPerLs; }

  std::array<double, 1> initial_state(double c_t) const { return {c_t}; }
  const ReactorParameters& parameters() const { return par_; }

 private:
  ReactorParameters par_;
};

}  // namespace cmpc
