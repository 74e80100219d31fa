#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmpc/config.hpp"
#include "cmpc/ensemble.hpp"
#include "cmpc/matching.hpp"
#include "cmpc/mpc.hpp"
#include "cmpc/tuning.hpp"

namespace cmpc {

// Command implementations behind the CLI, callable directly from tests.
// out_dir empty skips all file output; log null silences progress text.
// Each command that writes files also writes manifest_<name>.json listing
// them with the config hash, and nothing run-dependent.

struct Operating {
  double flow_ls = 0.0;
  SteadyState ss;
  double y_bar = 0.0;  // K
  PiSetpoint sp;
  LinearPlant plant;
};
Operating resolve_operating(const ExperimentConfig& cfg);

TuningObjective make_objective(const ExperimentConfig& cfg, const Operating& op);

struct MpcBundle {
  Operating op;
  AugmentedPlant aug;
  MatchedCost mc;
  MpcSpec spec;
};
MpcBundle build_mpc_bundle(const ExperimentConfig& cfg, const PiGains& gains);

enum class ControllerKind { pi, mpc };

struct CalibrateResult {
  ReactorParameters params;
  double steady_residual = 0.0;  // K/s at the anchor point
  double acl_residual = 0.0;     // one-step transition error at the anchor
};
CalibrateResult cmd_calibrate(const ExperimentConfig& cfg, const std::string& out_dir,
                              std::ostream* log);

struct SweepResult {
  std::vector<SweepRow> rows;
};
SweepResult cmd_steady_sweep(const ExperimentConfig& cfg, double flow_lo_ml, double flow_hi_ml,
                             int points, const std::string& out_dir, std::ostream* log);

SimRecord cmd_simulate(const ExperimentConfig& cfg, ControllerKind kind, std::uint64_t seed,
                       const std::string& out_dir, std::ostream* log);

TuneResult cmd_tune(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream* log);

struct MatchResult {
  Operating op;
  AugmentedPlant aug;
  MatchedCost mc;
};
MatchResult cmd_match(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream* log);

struct RunResult {
  EnsembleResult ensemble;
};
RunResult cmd_run(const ExperimentConfig& cfg, ControllerKind kind, const std::string& out_dir,
                  std::ostream* log);

// Violations count samples below operating.critical_c; phi1 is the tracking
// objective and phi2 adds the input-move term, both on the same seed set.
struct CompareResult {
  PiGains gains;
  double pi_violation = 0.0;
  double mpc_violation = 0.0;
  double violation_ratio = 0.0;  // mpc / pi
  double pi_phi1 = 0.0, pi_phi2 = 0.0;
  double mpc_phi1 = 0.0, mpc_phi2 = 0.0;
  int pi_failed = 0;
  int mpc_failed = 0;
};
CompareResult cmd_compare(const ExperimentConfig& cfg, const PiGains& gains,
                          const std::string& out_dir, std::ostream* log);

}  // namespace cmpc
