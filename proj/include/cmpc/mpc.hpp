#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <utility>

#include "cmpc/matching.hpp"
#include "cmpc/qp.hpp"

namespace cmpc {

struct MpcWeights {
  double slack_quad = 1e6;  // quadratic penalty on each constraint slack
  double slack_lin = 1e6;   // linear penalty, drives slacks exactly to zero when feasible
};

// Receding-horizon controller on the augmented (plant + integrator) model.
// The stage cost is the matched (Q, R, S) with the value matrix as terminal
// weight, so with no active constraints the first move equals the PI law.
// Output bounds are softened with nonnegative per-stage slacks; input bounds
// stay hard.  All levels are native units (K, L/s).
struct MpcSpec {
  AugmentedPlant aug;
  StageCost cost;
  Matrix p_terminal;
  int horizon = 50;
  double u_min = 0.0;
  double u_max = 0.0;
  double u_bar = 0.0;
  double y_bar = 0.0;
  double z_min = std::numeric_limits<double>::quiet_NaN();  // NaN disables
  double z_max = std::numeric_limits<double>::quiet_NaN();
  MpcWeights weights;
  double qp_tol = 1e-9;

  void validate() const;
};

class MpcController {
 public:
  explicit MpcController(const MpcSpec& spec);

  double step(double y, int k);
  void reset();

  struct Diagnostics {
    QpStatus status = QpStatus::optimal;
    int qp_iterations = 0;
    double kkt_residual = 0.0;
    double slack_lower0 = 0.0;  // stage-0 slack against the lower output bound
    double slack_upper0 = 0.0;
    double matched_gap = 0.0;  // |u0 - (-k_hat x~0)|, meaningful when nothing is active
  };
  const Diagnostics& last() const { return diag_; }
  // Stage-0 soft-bound slacks of the last solve, for trajectory records.
  std::pair<double, double> last_slacks() const {
    return {diag_.slack_lower0, diag_.slack_upper0};
  }
  const Vector& last_augmented_state() const { return xtilde_; }
  double integrator() const { return xi_; }

  // Optional state estimator: measurement deviation to plant-state deviation.
  // Without one the plant state must be scalar and directly measured.
  void set_estimator(std::function<Vector(double)> est) { estimator_ = std::move(est); }

 private:
  MpcSpec spec_;
  int n_slack_lo_ = 0, n_slack_hi_ = 0, nv_ = 0, nrows_ = 0;
  Matrix fu_;                   // QP gradient map: g_u = fu_ * x~0
  Matrix zphi_x_, zphi_u_;      // predicted constrained output: zphi_x x~0 + zphi_u U
  Vector g_, lo_, hi_, start_;  // per-step buffers
  Vector lo_base_, hi_base_;
  std::optional<QpWorkspace> work_;
  std::function<Vector(double)> estimator_;
  double xi_ = 0.0;
  Vector xtilde_;
  Diagnostics diag_;
};

}  // namespace cmpc
