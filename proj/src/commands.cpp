#include "cmpc/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <json.hpp>

namespace cmpc {

namespace {

using Json = nlohmann::ordered_json;

void ensure_dir(const std::string& out_dir) {
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
}

std::string joined(const std::string& out_dir, const std::string& name) {
  return (std::filesystem::path(out_dir) / name).string();
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Json gains_to_json(const PiGains& g) {
  return Json{{"kp", g.kp}, {"ki", g.ki}, {"kaw", g.kaw}};
}

void write_json(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

const char* kind_name(ControllerKind k) { return k == ControllerKind::pi ? "pi" : "mpc"; }

}  // namespace

Operating resolve_operating(const ExperimentConfig& cfg) {
  Operating op;
  op.flow_ls = ml_min_to_ls(cfg.operating.flow_ml);
  op.ss = steady_state(cfg.reactor, op.flow_ls, cfg.operating.branch);
  op.y_bar = std::isfinite(cfg.operating.setpoint_c) ? celsius_to_kelvin(cfg.operating.setpoint_c)
                                                     : op.ss.c_t;
  op.sp = PiSetpoint{op.y_bar, op.flow_ls, ml_min_to_ls(cfg.reactor.f_min_ml),
                     ml_min_to_ls(cfg.reactor.f_max_ml)};
  op.plant = plant_statespace(cfg.reactor, op.flow_ls, cfg.sim.ts, cfg.operating.branch);
  return op;
}

TuningObjective make_objective(const ExperimentConfig& cfg, const Operating& op) {
  TuningObjective obj;
  obj.kind = cfg.objective;
  obj.q_z = cfg.q_z;
  obj.q_du = cfg.q_du;
  obj.z_bar = op.y_bar;
  obj.u_bar_record = ls_to_ml_min(op.flow_ls);
  obj.input_scale = cfg.input_scale;
  return obj;
}

MpcBundle build_mpc_bundle(const ExperimentConfig& cfg, const PiGains& gains) {
  MpcBundle b;
  b.op = resolve_operating(cfg);
  b.aug = build_augmented(b.op.plant, gains);
  b.mc = match_controller(b.aug);
  b.spec.aug = b.aug;
  // Matching fixes the stage cost only up to a positive multiple, and scaling
  // (Q, R, S, P) together preserves the matched gain.  Completing the square
  // turns the horizon cost into gamma * sum (u_k - u_PI(x_k))^2 plus a
  // constant, with gamma = R + B~' P B~, so the multiple sets the exchange
  // rate between following the PI law and defending the soft bounds.  The
  // certificate normalization leaves gamma wildly gain-dependent; rescaling
  // it to the configured value makes the trade-off a stable config property.
  const double f = cfg.cost_scale / b.mc.gamma(0, 0);
  b.spec.cost = b.mc.cost;
  b.spec.cost.q *= f;
  b.spec.cost.r *= f;
  b.spec.cost.s *= f;
  b.spec.p_terminal = b.mc.p * f;
  b.spec.horizon = cfg.horizon;
  b.spec.u_min = ml_min_to_ls(cfg.reactor.f_min_ml);
  b.spec.u_max = ml_min_to_ls(cfg.reactor.f_max_ml);
  b.spec.u_bar = b.op.flow_ls;
  b.spec.y_bar = b.op.y_bar;
  b.spec.z_min = std::isfinite(cfg.z_min_c) ? celsius_to_kelvin(cfg.z_min_c)
                                            : std::numeric_limits<double>::quiet_NaN();
  b.spec.z_max = std::isfinite(cfg.z_max_c) ? celsius_to_kelvin(cfg.z_max_c)
                                            : std::numeric_limits<double>::quiet_NaN();
  b.spec.weights = MpcWeights{cfg.slack_quad, cfg.slack_lin};
  b.spec.validate();
  return b;
}

CalibrateResult cmd_calibrate(const ExperimentConfig& cfg, const std::string& out_dir,
                              std::ostream* log) {
  const CalibrationAnchors anchors;
  CalibrateResult res;
  res.params = calibrate(cfg.reactor, anchors);
  const double flow = ml_min_to_ls(anchors.flow_ml);
  res.steady_residual = drift_1state(res.params, anchors.temp_k, flow);
  const Linearization lin = linearize_1state(res.params, anchors.temp_k, flow);
  res.acl_residual = std::exp(lin.a_c * anchors.ts) - anchors.a_cl;
  if (log)
    *log << "calibrate: k0=" << format_g17(res.params.k0) << " L/(mol s), beta="
         << format_g17(res.params.beta) << " K L/mol, steady residual "
         << format_g17(res.steady_residual) << " K/s, transition residual "
         << format_g17(res.acl_residual) << "\n";
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    save_reactor(res.params, joined(out_dir, "calibrated_reactor.json"));
    write_manifest(out_dir, cfg, {"calibrated_reactor.json"});
  }
  return res;
}

SweepResult cmd_steady_sweep(const ExperimentConfig& cfg, double flow_lo_ml, double flow_hi_ml,
                             int points, const std::string& out_dir, std::ostream* log) {
  if (!(flow_lo_ml >= 0.0) || !(flow_hi_ml > flow_lo_ml) || points < 2)
    throw std::invalid_argument("steady_sweep: bad flow range");
  SweepResult res;
  for (int i = 0; i < points; ++i) {
    const double flow_ml = flow_lo_ml + (flow_hi_ml - flow_lo_ml) * i / (points - 1);
    for (const SteadyState& ss : steady_states(cfg.reactor, ml_min_to_ls(flow_ml)))
      res.rows.push_back({flow_ml, ss.c_t, ss.stable});
  }
  if (log) *log << "steady_sweep: " << res.rows.size() << " equilibria over " << points
                << " flows\n";
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_sweep_csv(res.rows, joined(out_dir, "sweep.csv"));
    write_manifest(out_dir, cfg, {"sweep.csv"});
  }
  return res;
}

SimRecord cmd_simulate(const ExperimentConfig& cfg, ControllerKind kind, std::uint64_t seed,
                       const std::string& out_dir, std::ostream* log) {
  const Cstr3Sde model(cfg.reactor);
  SimConfig sc = cfg.sim;
  sc.seed = seed;
  const auto x0 = model.initial_state(celsius_to_kelvin(cfg.start_c));
  SimRecord rec;
  if (kind == ControllerKind::pi) {
    const Operating op = resolve_operating(cfg);
    PiController ctrl(cfg.pi, op.sp, cfg.sim.ts);
    rec = simulate_closed_loop(model, ctrl, x0, sc);
  } else {
    const MpcBundle b = build_mpc_bundle(cfg, cfg.pi);
    MpcController ctrl(b.spec);
    rec = simulate_closed_loop(model, ctrl, x0, sc);
  }
  if (log)
    *log << "simulate(" << kind_name(kind) << "): " << rec.samples() << " samples, final z "
         << format_g17(rec.z.back()) << " K\n";
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    const std::string name = std::string("record_") + kind_name(kind) + ".csv";
    write_record_csv(rec, joined(out_dir, name));
    write_manifest(out_dir, cfg, {name});
  }
  return rec;
}

TuneResult cmd_tune(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream* log) {
  const Operating op = resolve_operating(cfg);
  const Cstr3Sde model(cfg.reactor);
  TunePlan plan;
  plan.initial = cfg.pi;
  plan.kp_grid = cfg.kp_grid;
  plan.ki_grid = cfg.ki_grid;
  plan.kaw_grid = cfg.kaw_grid;
  plan.objective = make_objective(cfg, op);
  plan.ensemble.paths = cfg.tune_paths;
  plan.ensemble.base_seed = cfg.tune_seed;
  plan.ensemble.sim = cfg.sim;
  plan.ensemble.max_threads = cfg.threads;
  const auto x0 = model.initial_state(celsius_to_kelvin(cfg.start_c));
  const TuneResult res = tune_pi(model, x0, op.sp, cfg.sim.ts, plan);
  if (log) {
    *log << "tune: initial objective " << format_g17(res.initial_objective) << ", tuned "
         << format_g17(res.tuned_objective) << "\n";
    *log << "tune: gains kp=" << format_g17(res.tuned.kp) << " ki=" << format_g17(res.tuned.ki)
         << " kaw=" << format_g17(res.tuned.kaw) << "\n";
  }
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    Json j;
    j["objective"] = cfg.objective == ObjectiveKind::tracking ? "tracking" : "tracking_plus_move";
    j["initial"] = gains_to_json(res.initial);
    j["tuned"] = gains_to_json(res.tuned);
    j["initial_objective"] = res.initial_objective;
    j["tuned_objective"] = res.tuned_objective;
    Json stages = Json::array();
    const char* names[] = {"kp", "ki", "kaw"};
    for (std::size_t s = 0; s < res.stages.size(); ++s) {
      const TuneStage& st = res.stages[s];
      stages.push_back(Json{{"gain", names[s]},
                            {"base_objective", st.grid.base_objective},
                            {"best_value", st.grid.best_value},
                            {"best_objective", st.grid.best_objective},
                            {"best_index", st.grid.best_index}});
    }
    j["stages"] = stages;
    write_json(j, joined(out_dir, "tuned_gains.json"));
    std::vector<std::string> files{"tuned_gains.json"};
    for (std::size_t s = 0; s < res.stages.size(); ++s) {
      const std::string name = std::string("curve_") + names[s] + ".csv";
      write_curve_csv(res.stages[s].grid.values, res.stages[s].grid.objectives,
                      res.stages[s].grid.stderrs, joined(out_dir, name), names[s]);
      files.push_back(name);
    }
    write_manifest(out_dir, cfg, files);
  }
  return res;
}

MatchResult cmd_match(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream* log) {
  const MpcBundle b = build_mpc_bundle(cfg, cfg.pi);
  MatchResult res{b.op, b.aug, b.mc};
  if (log)
    *log << "match: beta " << format_g17(res.mc.beta) << ", certificates ("
         << format_g17(res.mc.cert_lower) << ", " << format_g17(res.mc.cert_upper)
         << "), gain gap " << format_g17(res.mc.gain_gap) << "\n";
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    Json j;
    j["a_tilde"] = matrix_to_json(res.aug.a_tilde);
    j["b_tilde"] = matrix_to_json(res.aug.b_tilde);
    j["k_hat"] = matrix_to_json(res.aug.k_hat);
    j["gamma"] = matrix_to_json(res.mc.gamma);
    j["p_lmi"] = matrix_to_json(res.mc.p_lmi);
    j["beta"] = res.mc.beta;
    j["cert_lower"] = res.mc.cert_lower;
    j["cert_upper"] = res.mc.cert_upper;
    j["bisection_steps"] = res.mc.bisection_steps;
    j["q"] = matrix_to_json(res.mc.cost.q);
    j["r"] = matrix_to_json(res.mc.cost.r);
    j["s"] = matrix_to_json(res.mc.cost.s);
    j["p"] = matrix_to_json(res.mc.p);
    j["gain_gap"] = res.mc.gain_gap;
    write_json(j, joined(out_dir, "matched_cost.json"));
    write_manifest(out_dir, cfg, {"matched_cost.json"});
  }
  return res;
}

namespace {

// Ensemble under the configured objective, with the complementary objective
// kind evaluated alongside so callers get both tracking flavors in one pass.
// Violations are counted against the critical temperature, not the softer
// MPC bound.
EnsembleResult run_kind(const ExperimentConfig& cfg, ControllerKind kind, const PiGains& gains,
                        int paths, std::uint64_t seed, bool want_quantiles) {
  const Cstr3Sde model(cfg.reactor);
  const Operating op = resolve_operating(cfg);
  const TuningObjective obj = make_objective(cfg, op);
  TuningObjective obj2 = obj;
  obj2.kind = obj.kind == ObjectiveKind::tracking ? ObjectiveKind::tracking_plus_move
                                                  : ObjectiveKind::tracking;
  EnsembleOptions eo;
  eo.paths = paths;
  eo.base_seed = seed;
  eo.sim = cfg.sim;
  eo.objective = [obj](const SimRecord& r) { return evaluate_objective(r, obj); };
  eo.objective2 = [obj2](const SimRecord& r) { return evaluate_objective(r, obj2); };
  eo.z_min = std::isfinite(cfg.operating.critical_c)
                 ? celsius_to_kelvin(cfg.operating.critical_c)
                 : std::numeric_limits<double>::quiet_NaN();
  eo.max_threads = cfg.threads;
  if (want_quantiles) eo.quantile_levels = {0.1, 0.5, 0.9};
  const auto x0 = model.initial_state(op.ss.c_t);  // stationary start at the operating point
  if (kind == ControllerKind::pi) {
    PiController proto(gains, op.sp, cfg.sim.ts);
    return run_ensemble(model, [&](int) { return proto; }, x0, eo);
  }
  const MpcBundle b = build_mpc_bundle(cfg, gains);
  MpcController proto(b.spec);
  return run_ensemble(model, [&](int) { return proto; }, x0, eo);
}

}  // namespace

RunResult cmd_run(const ExperimentConfig& cfg, ControllerKind kind, const std::string& out_dir,
                  std::ostream* log) {
  RunResult res;
  res.ensemble = run_kind(cfg, kind, cfg.pi, cfg.compare_paths, cfg.compare_seed, true);
  if (log)
    *log << "run(" << kind_name(kind) << "): mean objective "
         << format_g17(res.ensemble.mean_objective) << ", violation fraction "
         << format_g17(res.ensemble.violation_fraction) << ", " << res.ensemble.failed_paths
         << " failed, " << format_g17(res.ensemble.sims_per_second) << " paths/s\n";
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    Json j;
    j["controller"] = kind_name(kind);
    j["paths"] = cfg.compare_paths;
    j["mean_objective"] = res.ensemble.mean_objective;
    j["objective_stderr"] = res.ensemble.objective_stderr;
    j["critical_c"] = cfg.operating.critical_c;
    j["violation_fraction"] = res.ensemble.violation_fraction;
    j["failed_paths"] = res.ensemble.failed_paths;
    const std::string stats = std::string("run_stats_") + kind_name(kind) + ".json";
    const std::string quant = std::string("quantiles_") + kind_name(kind) + ".csv";
    write_json(j, joined(out_dir, stats));
    write_quantiles_csv({0.1, 0.5, 0.9}, res.ensemble.quantiles, res.ensemble.mean_z, cfg.sim.ts,
                        joined(out_dir, quant));
    write_manifest(out_dir, cfg, {stats, quant});
  }
  return res;
}

CompareResult cmd_compare(const ExperimentConfig& cfg, const PiGains& gains,
                          const std::string& out_dir, std::ostream* log) {
  CompareResult res;
  res.gains = gains;
  const EnsembleResult pi =
      run_kind(cfg, ControllerKind::pi, gains, cfg.compare_paths, cfg.compare_seed, false);
  const EnsembleResult mpc =
      run_kind(cfg, ControllerKind::mpc, gains, cfg.compare_paths, cfg.compare_seed, false);
  res.pi_violation = pi.violation_fraction;
  res.mpc_violation = mpc.violation_fraction;
  res.violation_ratio = pi.violation_fraction > 0.0
                            ? mpc.violation_fraction / pi.violation_fraction
                            : (mpc.violation_fraction > 0.0 ? INFINITY : 0.0);
  const bool primary_is_phi1 = cfg.objective == ObjectiveKind::tracking;
  res.pi_phi1 = primary_is_phi1 ? pi.mean_objective : pi.mean_objective2;
  res.pi_phi2 = primary_is_phi1 ? pi.mean_objective2 : pi.mean_objective;
  res.mpc_phi1 = primary_is_phi1 ? mpc.mean_objective : mpc.mean_objective2;
  res.mpc_phi2 = primary_is_phi1 ? mpc.mean_objective2 : mpc.mean_objective;
  res.pi_failed = pi.failed_paths;
  res.mpc_failed = mpc.failed_paths;
  if (log)
    *log << "compare: below " << format_g17(cfg.operating.critical_c) << " C pi "
         << format_g17(res.pi_violation) << " vs mpc " << format_g17(res.mpc_violation)
         << " (ratio " << format_g17(res.violation_ratio) << ")\n"
         << "compare: phi1 pi " << format_g17(res.pi_phi1) << " vs mpc "
         << format_g17(res.mpc_phi1) << ", phi2 pi " << format_g17(res.pi_phi2) << " vs mpc "
         << format_g17(res.mpc_phi2) << "\n";
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    Json j;
    j["gains"] = gains_to_json(gains);
    j["paths"] = cfg.compare_paths;
    j["critical_c"] = cfg.operating.critical_c;
    j["pi"] = Json{{"violation_fraction", res.pi_violation},
                   {"phi1", res.pi_phi1},
                   {"phi2", res.pi_phi2},
                   {"failed_paths", res.pi_failed}};
    j["mpc"] = Json{{"violation_fraction", res.mpc_violation},
                    {"phi1", res.mpc_phi1},
                    {"phi2", res.mpc_phi2},
                    {"failed_paths", res.mpc_failed}};
    j["violation_ratio"] = res.violation_ratio;
    j["phi1_gap"] = res.mpc_phi1 / res.pi_phi1 - 1.0;
    j["phi2_gap"] = res.mpc_phi2 / res.pi_phi2 - 1.0;
    write_json(j, joined(out_dir, "compare.json"));
    write_manifest(out_dir, cfg, {"compare.json"});
  }
  return res;
}

}  // namespace cmpc
