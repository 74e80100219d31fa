#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "cmpc/ensemble.hpp"
#include "cmpc/pi.hpp"

namespace cmpc {

// Closed-loop performance of one trajectory.  tracking sums squared output
// deviation over all samples; tracking_plus_move adds squared input moves.
// Moves are taken in record units scaled by input_scale (recorded mL/min
// against weights stated per L/min by default), with the operating flow as
// the move reference ahead of the first sample.
enum class ObjectiveKind { tracking, tracking_plus_move };

struct TuningObjective {
  ObjectiveKind kind = ObjectiveKind::tracking;
  double q_z = 1.0;
  double q_du = 5000.0;
  double z_bar = 0.0;         // K
  double u_bar_record = 0.0;  // record units (mL/min)
  double input_scale = 1.0 / 1000.0;
};

double evaluate_objective(const SimRecord& rec, const TuningObjective& obj);

struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  int points = 100;
  bool log_spaced = false;  // geometric in magnitude; lo and hi must share sign

  std::vector<double> values() const;
};

enum class GainIndex { kp, ki, kaw };

struct GainGridResult {
  std::vector<double> values;
  std::vector<double> objectives;
  std::vector<double> stderrs;  // standard error of each grid-point mean
  double base_objective = 0.0;  // incumbent gains under the same seeds
  double best_value = 0.0;
  double best_objective = 0.0;
  int best_index = -1;  // -1 when the incumbent stays best
};

struct TuneStage {
  GainIndex which = GainIndex::kp;
  GainGridResult grid;
  PiGains gains_after;
};

struct TuneResult {
  PiGains initial, tuned;
  std::vector<TuneStage> stages;
  double initial_objective = 0.0;
  double tuned_objective = 0.0;
};

namespace detail {

inline double& gain_ref(PiGains& g, GainIndex which) {
  switch (which) {
    case GainIndex::kp:
      return g.kp;
    case GainIndex::ki:
      return g.ki;
    case GainIndex::kaw:
      return g.kaw;
  }
  throw std::logic_error("gain_ref: bad gain index");
}

}  // namespace detail

// Mean ensemble objective as a function of one gain, the other two held at
// their incumbent values.  Every evaluation reuses the same path seeds, so
// curves are smooth in the gain and comparable across stages.  The winner is
// the grid argmin unless the incumbent is at least as good (ties keep the
// incumbent; grid ties prefer the smaller magnitude), which makes staged
// tuning monotone in the objective.
template <SdeModel M>
GainGridResult tune_gain(const M& model, std::span<const double> x0, const PiSetpoint& sp,
                         double ts, const PiGains& base, GainIndex which, const GridSpec& grid,
                         const TuningObjective& obj, const EnsembleOptions& eopts) {
  auto eval = [&](const PiGains& g) {
    EnsembleOptions o = eopts;
    o.objective = [&obj](const SimRecord& r) { return evaluate_objective(r, obj); };
    o.quantile_levels.clear();
    auto factory = [&](int) { return PiController(g, sp, ts); };
    return run_ensemble(model, factory, x0, o);
  };

  GainGridResult res;
  res.values = grid.values();
  const EnsembleResult base_res = eval(base);
  res.base_objective = base_res.mean_objective;
  res.objectives.reserve(res.values.size());
  res.stderrs.reserve(res.values.size());
  int best = -1;
  int dead_points = 0;
  for (std::size_t i = 0; i < res.values.size(); ++i) {
    PiGains g = base;
    detail::gain_ref(g, which) = res.values[i];
    const EnsembleResult er = eval(g);
    const double phi = er.mean_objective;
    dead_points += er.failed_paths == eopts.paths;
    res.objectives.push_back(phi);
    res.stderrs.push_back(er.objective_stderr);
    if (best < 0 || phi < res.objectives[best] ||
        (phi == res.objectives[best] && std::abs(res.values[i]) < std::abs(res.values[best])))
      best = static_cast<int>(i);
  }
  if (dead_points == static_cast<int>(res.values.size()) &&
      base_res.failed_paths == eopts.paths)
    throw std::runtime_error("tune_gain: every path diverged at every grid point");
  PiGains incumbent = base;
  if (res.objectives[best] < res.base_objective) {
    res.best_index = best;
    res.best_value = res.values[best];
    res.best_objective = res.objectives[best];
  } else {
    res.best_index = -1;
    res.best_value = detail::gain_ref(incumbent, which);
    res.best_objective = res.base_objective;
  }
  return res;
}

struct TunePlan {
  PiGains initial;
  GridSpec kp_grid{-5e-3, -1e-5, 100, false};
  GridSpec ki_grid{-1e-3, -1e-6, 100, false};
  GridSpec kaw_grid{0.0, 1.0, 100, false};
  TuningObjective objective;
  EnsembleOptions ensemble;
};

// Coordinate descent over (kp, ki, kaw), one grid sweep each, all from the
// same far-from-setpoint start.
template <SdeModel M>
TuneResult tune_pi(const M& model, std::span<const double> x0, const PiSetpoint& sp, double ts,
                   const TunePlan& plan) {
  TuneResult res;
  res.initial = plan.initial;
  PiGains g = plan.initial;
  const GainIndex order[] = {GainIndex::kp, GainIndex::ki, GainIndex::kaw};
  const GridSpec* grids[] = {&plan.kp_grid, &plan.ki_grid, &plan.kaw_grid};
  for (int s = 0; s < 3; ++s) {
    TuneStage stage;
    stage.which = order[s];
    stage.grid =
        tune_gain(model, x0, sp, ts, g, order[s], *grids[s], plan.objective, plan.ensemble);
    detail::gain_ref(g, order[s]) = stage.grid.best_value;
    stage.gains_after = g;
    if (s == 0) res.initial_objective = stage.grid.base_objective;
    res.tuned_objective = stage.grid.best_objective;
    res.stages.push_back(std::move(stage));
  }
  res.tuned = g;
  return res;
}

}  // namespace cmpc
