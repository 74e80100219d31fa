#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cmpc/mpc.hpp"
#include "cmpc/reactor.hpp"
#include "cmpc/sim.hpp"
#include "cmpc/tuning.hpp"

namespace cmpc {

struct OperatingPoint {
  double flow_ml = 630.0;
  Branch branch = Branch::high;
  // Setpoint in Celsius; NaN derives it from the steady state at flow_ml.
  double setpoint_c = std::numeric_limits<double>::quiet_NaN();
  // Temperature below which the reactor counts as out of range.  Sits under
  // the soft MPC bound z_min_c; excursions this deep risk falling off the
  // upper steady-state branch entirely.
  double critical_c = 57.26;
};

// Everything an experiment needs, serialized as one JSON document.  Schema
// (all keys optional, defaults below; unknown keys are rejected):
//   reactor:   k0, ea_over_r, beta, volume, cain, cbin, ctin, sigma_t, rv,
//              f_min_ml, f_max_ml
//   operating: flow_ml, branch ("low"|"middle"|"high"), setpoint_c, critical_c
//   sim:       t_final, ts, substeps
//   pi:        kp, ki, kaw              (native units, (L/s)/K family)
//   tuning:    objective ("tracking"|"tracking_plus_move"), q_z, q_du,
//              input_scale, paths, seed, start_c,
//              kp_grid/ki_grid/kaw_grid: {lo, hi, points, log}
//   mpc:       horizon, z_min_c, z_max_c, slack_quad, slack_lin, cost_scale
//   compare:   paths, seed
//   threads:   worker cap, 0 = hardware
struct ExperimentConfig {
  ReactorParameters reactor;
  OperatingPoint operating;
  SimConfig sim;
  PiGains pi{-5e-4, -5e-4, 0.1};

  ObjectiveKind objective = ObjectiveKind::tracking;
  double q_z = 1.0;
  double q_du = 5000.0;
  double input_scale = 1.0 / 1000.0;
  GridSpec kp_grid{-5e-3, -1e-5, 100, false};
  GridSpec ki_grid{-1e-3, -1e-6, 100, false};
  GridSpec kaw_grid{0.0, 1.0, 100, false};
  int tune_paths = 1000;
  std::uint64_t tune_seed = 2026;
  double start_c = 30.0;

  int horizon = 50;
  double z_min_c = 59.0;
  double z_max_c = std::numeric_limits<double>::quiet_NaN();
  double slack_quad = 1e6;
  double slack_lin = 1e6;
  // Matching fixes the cost only up to a positive multiple.  The matched
  // (Q, R, S, P) are rescaled jointly (gain preserved) so that the effective
  // weight on deviating from the PI law, gamma = R + B~' P B~ in (L/s)^-2,
  // equals this value; against the fixed slack weights it sets how strongly
  // the controller defends the soft bounds.
  double cost_scale = 1.3e12;

  int compare_paths = 100;
  std::uint64_t compare_seed = 7;
  int threads = 0;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string dump_config(const ExperimentConfig& cfg);  // canonical: ordered keys, round-trip doubles
void save_config(const ExperimentConfig& cfg, const std::string& path);

void save_reactor(const ReactorParameters& par, const std::string& path);
ReactorParameters load_reactor(const std::string& path);

// CSV helpers; values are printed with %.17g so files round-trip exactly.
std::string format_g17(double v);
void write_record_csv(const SimRecord& rec, const std::string& path);
SimRecord read_record_csv(const std::string& path);
void write_curve_csv(const std::vector<double>& values, const std::vector<double>& objectives,
                     const std::vector<double>& stderrs, const std::string& path,
                     const std::string& value_name);
void write_quantiles_csv(const std::vector<double>& levels,
                         const std::vector<std::vector<double>>& quantiles,
                         const std::vector<double>& mean_z, double ts, const std::string& path);

struct SweepRow {
  double flow_ml = 0.0;
  double c_t = 0.0;
  bool stable = false;
};
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

std::uint64_t fnv1a64(std::string_view text);

// manifest.json in out_dir: the config hash and the files a command wrote.
// Contains nothing run-dependent, so repeated runs diff empty.
void write_manifest(const std::string& out_dir, const ExperimentConfig& cfg,
                    const std::vector<std::string>& files);

}  // namespace cmpc
