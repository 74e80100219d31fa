#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmpc/commands.hpp"

namespace {

cmpc::PiGains load_gains_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gains file " + path);
  const auto j = nlohmann::json::parse(in);
  const auto& g = j.contains("tuned") ? j.at("tuned") : j;
  return {g.at("kp").get<double>(), g.at("ki").get<double>(), g.at("kaw").get<double>()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Stochastic reactor control workbench: closed-loop PI tuning by parallel "
      "simulation, cost design that reproduces the tuned loop as a predictive "
      "controller, and constrained closed-loop evaluation."};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  int threads = -1;
  std::string objective;
  int paths = -1;
  std::int64_t seed = -1;
  app.add_option("--config", config_path, "JSON configuration file (defaults when omitted)");
  app.add_option("--out", out_dir, "output directory ('' disables file output)");
  app.add_option("--threads", threads, "worker thread cap (0 = hardware)");
  app.add_option("--objective", objective, "tuning objective: phi1 (tracking) or phi2 (adds moves)")
      ->check(CLI::IsMember({"phi1", "phi2"}));
  app.add_option("--paths", paths, "override ensemble path count (tune and compare alike)");
  app.add_option("--seed", seed, "override the base seed (tune and compare alike)");

  auto* c_cal = app.add_subcommand("calibrate", "fit (k0, beta) to the operating anchors");

  auto* c_sweep = app.add_subcommand("sweep", "equilibrium branches across a flow range");
  double sweep_lo = 200.0, sweep_hi = 1000.0;
  int sweep_points = 161;
  c_sweep->add_option("--lo", sweep_lo, "lowest flow, mL/min");
  c_sweep->add_option("--hi", sweep_hi, "highest flow, mL/min");
  c_sweep->add_option("--points", sweep_points, "number of flows");

  auto* c_sim = app.add_subcommand("simulate", "one closed-loop trajectory from the cold start");
  std::string sim_controller = "pi";
  std::uint64_t sim_seed = 1;
  c_sim->add_option("--controller", sim_controller, "pi or mpc")
      ->check(CLI::IsMember({"pi", "mpc"}));
  c_sim->add_option("--seed", sim_seed, "path seed");

  auto* c_tune = app.add_subcommand("tune", "staged closed-loop gain search");

  auto* c_match = app.add_subcommand("match", "design a stage cost reproducing the PI loop");

  auto* c_run = app.add_subcommand("run", "ensemble statistics for one controller");
  std::string run_controller = "pi";
  c_run->add_option("--controller", run_controller, "pi or mpc")
      ->check(CLI::IsMember({"pi", "mpc"}));

  auto* c_cmp = app.add_subcommand("compare", "PI vs matched MPC on shared noise");
  std::string gains_file;
  c_cmp->add_option("--gains-file", gains_file,
                    "JSON with kp/ki/kaw (or a tune output); defaults to the config gains");

  CLI11_PARSE(app, argc, argv);

  try {
    cmpc::ExperimentConfig cfg =
        config_path.empty() ? cmpc::ExperimentConfig{} : cmpc::load_config(config_path);
    if (threads >= 0) cfg.threads = threads;
    if (!objective.empty())
      cfg.objective = objective == "phi1" ? cmpc::ObjectiveKind::tracking
                                          : cmpc::ObjectiveKind::tracking_plus_move;
    if (paths >= 1) {
      cfg.tune_paths = paths;
      cfg.compare_paths = paths;
    }
    if (seed >= 0) {
      cfg.tune_seed = static_cast<std::uint64_t>(seed);
      cfg.compare_seed = static_cast<std::uint64_t>(seed);
    }
    std::ostream* log = &std::cout;
    const auto kind_of = [](const std::string& s) {
      return s == "pi" ? cmpc::ControllerKind::pi : cmpc::ControllerKind::mpc;
    };
    if (c_cal->parsed()) cmpc::cmd_calibrate(cfg, out_dir, log);
    if (c_sweep->parsed())
      cmpc::cmd_steady_sweep(cfg, sweep_lo, sweep_hi, sweep_points, out_dir, log);
    if (c_sim->parsed()) cmpc::cmd_simulate(cfg, kind_of(sim_controller), sim_seed, out_dir, log);
    if (c_tune->parsed()) cmpc::cmd_tune(cfg, out_dir, log);
    if (c_match->parsed()) cmpc::cmd_match(cfg, out_dir, log);
    if (c_run->parsed()) cmpc::cmd_run(cfg, kind_of(run_controller), out_dir, log);
    if (c_cmp->parsed()) {
      const cmpc::PiGains gains = gains_file.empty() ? cfg.pi : load_gains_file(gains_file);
      cmpc::cmd_compare(cfg, gains, out_dir, log);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
