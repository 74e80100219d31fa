#include "cmpc/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cmpc {

namespace {

using Json = nlohmann::ordered_json;

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw std::invalid_argument("config: unknown key '" + item.key() + "' in " + where);
}

double num_or(const Json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.at(key).get<double>();
}

template <typename T>
T val_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::string branch_name(Branch b) {
  switch (b) {
    case Branch::low:
      return "low";
    case Branch::middle:
      return "middle";
    case Branch::high:
      return "high";
  }
  throw std::logic_error("branch_name: bad branch");
}

Branch branch_from(const std::string& s) {
  if (s == "low") return Branch::low;
  if (s == "middle") return Branch::middle;
  if (s == "high") return Branch::high;
  throw std::invalid_argument("config: branch must be low, middle, or high");
}

std::string objective_name(ObjectiveKind k) {
  return k == ObjectiveKind::tracking ? "tracking" : "tracking_plus_move";
}

ObjectiveKind objective_from(const std::string& s) {
  if (s == "tracking") return ObjectiveKind::tracking;
  if (s == "tracking_plus_move") return ObjectiveKind::tracking_plus_move;
  throw std::invalid_argument("config: objective must be tracking or tracking_plus_move");
}

Json grid_to_json(const GridSpec& g) {
  return Json{{"lo", g.lo}, {"hi", g.hi}, {"points", g.points}, {"log", g.log_spaced}};
}

GridSpec grid_from_json(const Json& j, const GridSpec& fallback, const std::string& where) {
  if (j.is_null()) return fallback;
  check_keys(j, {"lo", "hi", "points", "log"}, where);
  GridSpec g = fallback;
  g.lo = num_or(j, "lo", g.lo);
  g.hi = num_or(j, "hi", g.hi);
  g.points = val_or(j, "points", g.points);
  g.log_spaced = val_or(j, "log", g.log_spaced);
  return g;
}

Json reactor_to_json(const ReactorParameters& p) {
  return Json{{"k0", p.k0},           {"ea_over_r", p.ea_over_r}, {"beta", p.beta},
              {"volume", p.volume},   {"cain", p.cain},           {"cbin", p.cbin},
              {"ctin", p.ctin},       {"sigma_t", p.sigma_t},     {"rv", p.rv},
              {"f_min_ml", p.f_min_ml}, {"f_max_ml", p.f_max_ml}};
}

ReactorParameters reactor_from_json(const Json& j, const ReactorParameters& fallback) {
  check_keys(j,
             {"k0", "ea_over_r", "beta", "volume", "cain", "cbin", "ctin", "sigma_t", "rv",
              "f_min_ml", "f_max_ml"},
             "reactor");
  ReactorParameters p = fallback;
  p.k0 = num_or(j, "k0", p.k0);
  p.ea_over_r = num_or(j, "ea_over_r", p.ea_over_r);
  p.beta = num_or(j, "beta", p.beta);
  p.volume = num_or(j, "volume", p.volume);
  p.cain = num_or(j, "cain", p.cain);
  p.cbin = num_or(j, "cbin", p.cbin);
  p.ctin = num_or(j, "ctin", p.ctin);
  p.sigma_t = num_or(j, "sigma_t", p.sigma_t);
  p.rv = num_or(j, "rv", p.rv);
  p.f_min_ml = num_or(j, "f_min_ml", p.f_min_ml);
  p.f_max_ml = num_or(j, "f_max_ml", p.f_max_ml);
  p.validate();
  return p;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: JSON parse failed: ") + e.what());
  }
  check_keys(j, {"reactor", "operating", "sim", "pi", "tuning", "mpc", "compare", "threads"},
             "top level");
  ExperimentConfig cfg;
  if (j.contains("reactor")) cfg.reactor = reactor_from_json(j["reactor"], cfg.reactor);
  if (j.contains("operating")) {
    const Json& o = j["operating"];
    check_keys(o, {"flow_ml", "branch", "setpoint_c", "critical_c"}, "operating");
    cfg.operating.flow_ml = num_or(o, "flow_ml", cfg.operating.flow_ml);
    if (o.contains("branch")) cfg.operating.branch = branch_from(o.at("branch").get<std::string>());
    cfg.operating.setpoint_c = num_or(o, "setpoint_c", cfg.operating.setpoint_c);
    cfg.operating.critical_c = num_or(o, "critical_c", cfg.operating.critical_c);
  }
  if (j.contains("sim")) {
    const Json& s = j["sim"];
    check_keys(s, {"t_final", "ts", "substeps"}, "sim");
    cfg.sim.t_final = num_or(s, "t_final", cfg.sim.t_final);
    cfg.sim.ts = num_or(s, "ts", cfg.sim.ts);
    cfg.sim.substeps = val_or(s, "substeps", cfg.sim.substeps);
    cfg.sim.samples();
  }
  if (j.contains("pi")) {
    const Json& p = j["pi"];
    check_keys(p, {"kp", "ki", "kaw"}, "pi");
    cfg.pi.kp = num_or(p, "kp", cfg.pi.kp);
    cfg.pi.ki = num_or(p, "ki", cfg.pi.ki);
    cfg.pi.kaw = num_or(p, "kaw", cfg.pi.kaw);
  }
  if (j.contains("tuning")) {
    const Json& t = j["tuning"];
    check_keys(t,
               {"objective", "q_z", "q_du", "input_scale", "paths", "seed", "start_c", "kp_grid",
                "ki_grid", "kaw_grid"},
               "tuning");
    if (t.contains("objective")) cfg.objective = objective_from(t.at("objective").get<std::string>());
    cfg.q_z = num_or(t, "q_z", cfg.q_z);
    cfg.q_du = num_or(t, "q_du", cfg.q_du);
    cfg.input_scale = num_or(t, "input_scale", cfg.input_scale);
    cfg.tune_paths = val_or(t, "paths", cfg.tune_paths);
    cfg.tune_seed = val_or(t, "seed", cfg.tune_seed);
    cfg.start_c = num_or(t, "start_c", cfg.start_c);
    if (t.contains("kp_grid")) cfg.kp_grid = grid_from_json(t["kp_grid"], cfg.kp_grid, "kp_grid");
    if (t.contains("ki_grid")) cfg.ki_grid = grid_from_json(t["ki_grid"], cfg.ki_grid, "ki_grid");
    if (t.contains("kaw_grid"))
      cfg.kaw_grid = grid_from_json(t["kaw_grid"], cfg.kaw_grid, "kaw_grid");
  }
  if (j.contains("mpc")) {
    const Json& m = j["mpc"];
    check_keys(m, {"horizon", "z_min_c", "z_max_c", "slack_quad", "slack_lin", "cost_scale"},
               "mpc");
    cfg.horizon = val_or(m, "horizon", cfg.horizon);
    cfg.z_min_c = num_or(m, "z_min_c", cfg.z_min_c);
    cfg.z_max_c = num_or(m, "z_max_c", cfg.z_max_c);
    cfg.slack_quad = num_or(m, "slack_quad", cfg.slack_quad);
    cfg.slack_lin = num_or(m, "slack_lin", cfg.slack_lin);
    cfg.cost_scale = num_or(m, "cost_scale", cfg.cost_scale);
  }
  if (j.contains("compare")) {
    const Json& c = j["compare"];
    check_keys(c, {"paths", "seed"}, "compare");
    cfg.compare_paths = val_or(c, "paths", cfg.compare_paths);
    cfg.compare_seed = val_or(c, "seed", cfg.compare_seed);
  }
  cfg.threads = val_or(j, "threads", cfg.threads);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
  Json j;
  j["reactor"] = reactor_to_json(cfg.reactor);
  j["operating"] = Json{{"flow_ml", cfg.operating.flow_ml},
                        {"branch", branch_name(cfg.operating.branch)},
                        {"setpoint_c", cfg.operating.setpoint_c},
                        {"critical_c", cfg.operating.critical_c}};
  j["sim"] =
      Json{{"t_final", cfg.sim.t_final}, {"ts", cfg.sim.ts}, {"substeps", cfg.sim.substeps}};
  j["pi"] = Json{{"kp", cfg.pi.kp}, {"ki", cfg.pi.ki}, {"kaw", cfg.pi.kaw}};
  j["tuning"] = Json{{"objective", objective_name(cfg.objective)},
                     {"q_z", cfg.q_z},
                     {"q_du", cfg.q_du},
                     {"input_scale", cfg.input_scale},
                     {"paths", cfg.tune_paths},
                     {"seed", cfg.tune_seed},
                     {"start_c", cfg.start_c},
                     {"kp_grid", grid_to_json(cfg.kp_grid)},
                     {"ki_grid", grid_to_json(cfg.ki_grid)},
                     {"kaw_grid", grid_to_json(cfg.kaw_grid)}};
  j["mpc"] = Json{{"horizon", cfg.horizon},
                  {"z_min_c", cfg.z_min_c},
                  {"z_max_c", cfg.z_max_c},
                  {"slack_quad", cfg.slack_quad},
                  {"slack_lin", cfg.slack_lin},
                  {"cost_scale", cfg.cost_scale}};
  j["compare"] = Json{{"paths", cfg.compare_paths}, {"seed", cfg.compare_seed}};
  j["threads"] = cfg.threads;
  return j.dump(2) + "\n";
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << dump_config(cfg);
}

void save_reactor(const ReactorParameters& par, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << reactor_to_json(par).dump(2) << "\n";
}

ReactorParameters load_reactor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: JSON parse failed: ") + e.what());
  }
  return reactor_from_json(j, ReactorParameters{});
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_record_csv(const SimRecord& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  out << "t";
  for (int i = 0; i < rec.state_dim; ++i) out << ",x" << (i + 1);
  out << ",y,z,u,slack_lo,slack_hi\n";
  for (std::size_t k = 0; k < rec.t.size(); ++k) {
    out << format_g17(rec.t[k]);
    for (int i = 0; i < rec.state_dim; ++i)
      out << ',' << format_g17(rec.x[k * rec.state_dim + i]);
    out << ',' << format_g17(rec.y[k]) << ',' << format_g17(rec.z[k]) << ','
        << format_g17(rec.u[k]) << ',' << format_g17(rec.slack_lo[k]) << ','
        << format_g17(rec.slack_hi[k]) << '\n';
  }
}

SimRecord read_record_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,", 0) != 0)
    throw std::runtime_error("csv: bad header in " + path);
  int n_cols = 1;
  for (char c : line) n_cols += c == ',';
  const int state_dim = n_cols - 6;
  if (state_dim < 0 || line.find(",y,z,u,slack_lo,slack_hi") == std::string::npos)
    throw std::runtime_error("csv: bad header in " + path);
  SimRecord rec;
  rec.state_dim = state_dim;
  std::vector<double> vals(n_cols);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    for (double& v : vals) {
      if (!std::getline(row, cell, ',')) throw std::runtime_error("csv: short row in " + path);
      v = std::stod(cell);
    }
    rec.t.push_back(vals[0]);
    for (int i = 0; i < state_dim; ++i) rec.x.push_back(vals[1 + i]);
    rec.y.push_back(vals[1 + state_dim]);
    rec.z.push_back(vals[2 + state_dim]);
    rec.u.push_back(vals[3 + state_dim]);
    rec.slack_lo.push_back(vals[4 + state_dim]);
    rec.slack_hi.push_back(vals[5 + state_dim]);
  }
  if (rec.t.size() >= 2) rec.ts = rec.t[1] - rec.t[0];
  return rec;
}

void write_curve_csv(const std::vector<double>& values, const std::vector<double>& objectives,
                     const std::vector<double>& stderrs, const std::string& path,
                     const std::string& value_name) {
  if (values.size() != objectives.size() || values.size() != stderrs.size())
    throw std::invalid_argument("csv: curve columns differ in length");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  out << value_name << ",objective,stderr\n";
  for (std::size_t i = 0; i < values.size(); ++i)
    out << format_g17(values[i]) << ',' << format_g17(objectives[i]) << ','
        << format_g17(stderrs[i]) << '\n';
}

void write_quantiles_csv(const std::vector<double>& levels,
                         const std::vector<std::vector<double>>& quantiles,
                         const std::vector<double>& mean_z, double ts, const std::string& path) {
  if (levels.size() != quantiles.size())
    throw std::invalid_argument("csv: quantile levels and columns differ");
  const std::size_t n = !quantiles.empty() ? quantiles[0].size() : mean_z.size();
  if (!mean_z.empty() && mean_z.size() != n)
    throw std::invalid_argument("csv: mean column length differs from quantiles");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  out << "t,mean";
  for (double lv : levels) out << ",q" << format_g17(lv);
  out << "\n";
  for (std::size_t k = 0; k < n; ++k) {
    out << format_g17(k * ts) << ',' << format_g17(mean_z.empty() ? 0.0 : mean_z[k]);
    for (const auto& col : quantiles) out << ',' << format_g17(col[k]);
    out << "\n";
  }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  out << "flow_ml,c_t,stable\n";
  for (const SweepRow& r : rows)
    out << format_g17(r.flow_ml) << ',' << format_g17(r.c_t) << ',' << (r.stable ? 1 : 0) << '\n';
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_manifest(const std::string& out_dir, const ExperimentConfig& cfg,
                    const std::vector<std::string>& files) {
  Json j;
  char hash[20];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a64(dump_config(cfg))));
  j["config_hash"] = hash;
  std::vector<std::string> sorted = files;
  std::sort(sorted.begin(), sorted.end());
  j["files"] = sorted;
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw std::runtime_error("manifest: cannot write in " + out_dir);
  out << j.dump(2) << "\n";
}

}  // namespace cmpc
