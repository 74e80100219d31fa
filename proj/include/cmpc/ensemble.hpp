#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "cmpc/sim.hpp"

namespace cmpc {

// Runs fn(0..n-1) on a small worker pool; fn must only touch slot i state.
void parallel_for(int n, const std::function<void(int)>& fn, int max_threads = 0);

// Linear-interpolation sample quantile of an unsorted copy of values.
double quantile_type7(std::vector<double> values, double p);

struct EnsembleOptions {
  int paths = 100;
  std::uint64_t base_seed = 0;
  SimConfig sim;
  // Objective per trajectory; empty means record zero.
  std::function<double(const SimRecord&)> objective;
  // Optional second objective evaluated on the same trajectories.
  std::function<double(const SimRecord&)> objective2;
  // Lower output bound for violation counting, native units; NaN disables.
  double z_min = std::numeric_limits<double>::quiet_NaN();
  double failure_penalty = 1e6;
  // Per-sample output quantile levels to collect; empty disables collection.
  std::vector<double> quantile_levels;
  int max_threads = 0;
};

struct PathStats {
  double objective = 0.0;
  double objective2 = 0.0;
  double violation_fraction = 0.0;
  bool failed = false;
};

struct EnsembleResult {
  std::vector<PathStats> paths;
  double mean_objective = 0.0;      // failed paths enter at the penalty value
  double objective_stderr = 0.0;    // standard error of mean_objective
  double mean_objective2 = 0.0;
  double violation_fraction = 0.0;  // violating samples / all samples, completed paths only
  int failed_paths = 0;
  double sims_per_second = 0.0;     // wall-clock throughput, reporting only
  // Per-sample output mean and quantiles[level][k] over completed paths,
  // when quantile levels were requested.
  std::vector<double> mean_z;
  std::vector<std::vector<double>> quantiles;
};

// Independent closed-loop trajectories with per-path derived seeds.  The
// controller factory is called once per path so each worker owns its state.
// Results land in per-path slots, making the reduction independent of
// scheduling; identical options give identical results at any thread count.
template <SdeModel M, typename Factory>
EnsembleResult run_ensemble(const M& model, Factory&& make_controller, std::span<const double> x0,
                            const EnsembleOptions& opt) {
  if (opt.paths < 1) throw std::invalid_argument("run_ensemble: need at least one path");
  const int big_k = opt.sim.samples();
  EnsembleResult res;
  res.paths.resize(opt.paths);
  const bool want_q = !opt.quantile_levels.empty();
  std::vector<std::vector<double>> z_store;
  if (want_q) z_store.resize(opt.paths);

  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(
      opt.paths,
      [&](int p) {
        auto controller = make_controller(p);
        SimConfig cfg = opt.sim;
        cfg.seed = derive_path_seed(opt.base_seed, static_cast<std::uint64_t>(p));
        PathStats st;
        try {
          SimRecord rec = simulate_closed_loop(model, controller, x0, cfg);
          st.objective = opt.objective ? opt.objective(rec) : 0.0;
          st.objective2 = opt.objective2 ? opt.objective2(rec) : 0.0;
          if (!std::isfinite(st.objective)) throw SimDiverged(rec.samples());
          if (std::isfinite(opt.z_min)) {
            int bad = 0;
            for (double z : rec.z) bad += z < opt.z_min;
            st.violation_fraction = static_cast<double>(bad) / rec.z.size();
          }
          if (want_q) z_store[p] = std::move(rec.z);
        } catch (const SimDiverged&) {
          st.objective = opt.failure_penalty;
          st.objective2 = opt.failure_penalty;
          st.violation_fraction = 1.0;
          st.failed = true;
        }
        res.paths[p] = std::move(st);
      },
      opt.max_threads);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t0;

  double obj_sum = 0.0, obj2_sum = 0.0, viol_sum = 0.0;
  int ok = 0;
  for (const PathStats& st : res.paths) {
    obj_sum += st.objective;
    obj2_sum += st.objective2;
    if (!st.failed) {
      viol_sum += st.violation_fraction;
      ++ok;
    } else {
      ++res.failed_paths;
    }
  }
  res.mean_objective = obj_sum / opt.paths;
  res.mean_objective2 = obj2_sum / opt.paths;
  res.violation_fraction = ok > 0 ? viol_sum / ok : 1.0;
  res.sims_per_second = elapsed.count() > 0.0 ? opt.paths / elapsed.count() : 0.0;
  if (opt.paths > 1) {
    double ss = 0.0;
    for (const PathStats& st : res.paths) {
      const double d = st.objective - res.mean_objective;
      ss += d * d;
    }
    res.objective_stderr = std::sqrt(ss / (opt.paths - 1) / opt.paths);
  }

  if (want_q && ok > 0) {
    res.mean_z.assign(big_k + 1, 0.0);
    res.quantiles.assign(opt.quantile_levels.size(), std::vector<double>(big_k + 1, 0.0));
    std::vector<double> column;
    column.reserve(ok);
    for (int k = 0; k <= big_k; ++k) {
      column.clear();
      for (int p = 0; p < opt.paths; ++p)
        if (!res.paths[p].failed) column.push_back(z_store[p][k]);
      double mz = 0.0;
      for (double z : column) mz += z;
      res.mean_z[k] = mz / column.size();
      for (std::size_t q = 0; q < opt.quantile_levels.size(); ++q)
        res.quantiles[q][k] = quantile_type7(column, opt.quantile_levels[q]);
    }
  }
  return res;
}

}  // namespace cmpc
