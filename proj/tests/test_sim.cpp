#include <doctest.h>

#include <array>
#include <cmath>
#include <set>
#include <utility>

#include "cmpc/sim.hpp"
#include "support.hpp"

using namespace cmpc;
using testsupport::ConstController;
using testsupport::LinearSde;

namespace {

struct SlackReportingController {
  double step(double, int k) { return 0.1 * k; }
  void reset() {}
  std::pair<double, double> last_slacks() const { return {1.5, 2.5}; }
};

struct NanController {
  int at = 3;
  double step(double, int k) { return k >= at ? std::numeric_limits<double>::quiet_NaN() : 0.0; }
  void reset() {}
};

}  // namespace

TEST_CASE("counter rng is a pure function of seed and address") {
  const CounterRng a(99), b(99), c(100);
  CHECK(a.normal(3, 1, 0, 0) == b.normal(3, 1, 0, 0));
  CHECK(a.normal(3, 1, 0, 0) != c.normal(3, 1, 0, 0));
  CHECK(a.normal(3, 1, kProcessStream, 0) != a.normal(3, 1, kMeasurementStream, 0));
  CHECK(a.normal(3, 1, 0, 0) != a.normal(3, 2, 0, 0));
  CHECK(a.normal(3, 1, 0, 0) != a.normal(4, 1, 0, 0));
}

TEST_CASE("counter rng draws are standard normal in the aggregate") {
  const CounterRng rng(123456);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal(i, 0, 0, 0);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  // 3.5 standard errors: se(mean) = 1/sqrt(n), se(var) ~ sqrt(2/n).
  CHECK(std::abs(mean) < 3.5 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 3.5 * std::sqrt(2.0 / n));
}

TEST_CASE("derived path seeds do not collide over many paths") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t p = 0; p < 10000; ++p) seen.insert(derive_path_seed(2026, p));
  CHECK(seen.size() == 10000);
  CHECK(derive_path_seed(1, 0) != derive_path_seed(2, 0));
}

TEST_CASE("euler step applies drift and scaled noise exactly") {
  const LinearSde model{.a = -0.5, .b = 2.0, .sigma = 0.3};
  std::array<double, 1> x{1.0};
  const std::array<double, 1> dw{0.25};
  em_step(model, x, 1.5, 0.1, dw);
  // x + (a x + b u) dt + sigma dw
  CHECK(x[0] == doctest::Approx(1.0 + (-0.5 * 1.0 + 2.0 * 1.5) * 0.1 + 0.3 * 0.25).epsilon(1e-15));
}

TEST_CASE("sim config rejects a grid that does not divide the span") {
  SimConfig cfg;
  cfg.t_final = 10.0;
  cfg.ts = 3.0;
  CHECK_THROWS_AS(cfg.samples(), std::invalid_argument);
  cfg.ts = 2.0;
  CHECK(cfg.samples() == 5);
  cfg.substeps = 0;
  CHECK_THROWS_AS(cfg.samples(), std::invalid_argument);
}

TEST_CASE("closed-loop record has consistent shape and grid") {
  const LinearSde model;
  ConstController ctrl{0.7};
  SimConfig cfg;
  cfg.t_final = 12.0;
  cfg.ts = 2.0;
  cfg.substeps = 4;
  cfg.seed = 5;
  const std::array<double, 1> x0{0.3};
  const SimRecord rec = simulate_closed_loop(model, ctrl, x0, cfg);
  const int big_k = 6;
  CHECK(rec.samples() == big_k);
  CHECK(rec.state_dim == 1);
  CHECK(rec.t.size() == big_k + 1);
  CHECK(rec.x.size() == (big_k + 1) * 1);
  CHECK(rec.z.size() == big_k + 1);
  CHECK(rec.y.size() == big_k + 1);
  CHECK(rec.u.size() == big_k + 1);
  CHECK(rec.slack_lo.size() == big_k + 1);
  CHECK(rec.t[0] == 0.0);
  CHECK(rec.t[3] == doctest::Approx(6.0));
  CHECK(rec.u.back() == rec.u[big_k - 1]);  // duplicated final hold
  CHECK(rec.x[0] == 0.3);
  CHECK(rec.z[0] == 0.3);
}

TEST_CASE("record scale converts inputs to record units") {
  struct ScaledSde : LinearSde {
    double input_record_scale() const { return 60000.0; }
  };
  const ScaledSde model;
  ConstController ctrl{0.01};
  SimConfig cfg;
  cfg.t_final = 3.0;
  const std::array<double, 1> x0{0.0};
  const SimRecord rec = simulate_closed_loop(model, ctrl, x0, cfg);
  CHECK(rec.record_scale == 60000.0);
  CHECK(rec.u[0] == doctest::Approx(600.0));
}

TEST_CASE("noise flags isolate the deterministic chain") {
  const LinearSde model{.a = -0.4, .b = 1.0, .sigma = 0.5, .rv = 0.2};
  ConstController ctrl{0.25};
  SimConfig cfg;
  cfg.t_final = 5.0;
  cfg.substeps = 3;
  cfg.seed = 17;
  cfg.process_noise = false;
  cfg.measurement_noise = false;
  const std::array<double, 1> x0{2.0};
  const SimRecord rec = simulate_closed_loop(model, ctrl, x0, cfg);
  // Manual Euler recursion, no noise anywhere.
  double x = 2.0;
  const double dt = cfg.ts / cfg.substeps;
  for (int k = 0; k < 5; ++k) {
    CHECK(rec.z[k] == doctest::Approx(x).epsilon(1e-14));
    CHECK(rec.y[k] == rec.z[k]);
    for (int s = 0; s < cfg.substeps; ++s) x += (-0.4 * x + 0.25) * dt;
  }
  CHECK(rec.z[5] == doctest::Approx(x).epsilon(1e-14));
}

TEST_CASE("measurement noise leaves the true output clean") {
  const LinearSde model{.a = -0.4, .b = 1.0, .sigma = 0.0, .rv = 0.5};
  ConstController ctrl{0.0};
  SimConfig cfg;
  cfg.t_final = 20.0;
  cfg.seed = 9;
  const std::array<double, 1> x0{1.0};
  const SimRecord rec = simulate_closed_loop(model, ctrl, x0, cfg);
  double dev = 0.0;
  for (int k = 0; k <= rec.samples(); ++k) dev = std::max(dev, std::abs(rec.y[k] - rec.z[k]));
  CHECK(dev > 0.1);  // noise actually present
  for (int k = 1; k <= rec.samples(); ++k) CHECK(rec.z[k] == doctest::Approx(rec.z[k - 1] * std::pow(1.0 - 0.4 / 10.0, 10)).epsilon(1e-12));
}

TEST_CASE("same seed reproduces the trajectory bit for bit") {
  const LinearSde model;
  SimConfig cfg;
  cfg.t_final = 30.0;
  cfg.seed = 77;
  const std::array<double, 1> x0{0.0};
  ConstController c1{0.2}, c2{0.2}, c3{0.2};
  const SimRecord r1 = simulate_closed_loop(model, c1, x0, cfg);
  const SimRecord r2 = simulate_closed_loop(model, c2, x0, cfg);
  cfg.seed = 78;
  const SimRecord r3 = simulate_closed_loop(model, c3, x0, cfg);
  CHECK(r1.z == r2.z);
  CHECK(r1.y == r2.y);
  CHECK(r1.z != r3.z);
}

TEST_CASE("controllers reporting slacks land in the record") {
  const LinearSde model;
  SlackReportingController ctrl;
  SimConfig cfg;
  cfg.t_final = 4.0;
  const std::array<double, 1> x0{0.0};
  const SimRecord rec = simulate_closed_loop(model, ctrl, x0, cfg);
  CHECK(rec.slack_lo[0] == 1.5);
  CHECK(rec.slack_hi[0] == 2.5);
  ConstController plain{0.0};
  const SimRecord rec2 = simulate_closed_loop(model, plain, x0, cfg);
  CHECK(rec2.slack_lo[0] == 0.0);
  CHECK(rec2.slack_hi[0] == 0.0);
}

TEST_CASE("non-finite input raises SimDiverged with the sample index") {
  const LinearSde model;
  NanController ctrl;
  SimConfig cfg;
  cfg.t_final = 10.0;
  const std::array<double, 1> x0{0.0};
  CHECK_THROWS_AS(simulate_closed_loop(model, ctrl, x0, cfg), SimDiverged);
  try {
    NanController again;
    simulate_closed_loop(model, again, x0, cfg);
  } catch (const SimDiverged& e) {
    CHECK(e.sample == 3);
  }
}

TEST_CASE("ensemble moments match the exact chain distribution") {
  const LinearSde model{.a = -0.8, .b = 1.0, .sigma = 0.4};
  EnsembleOptions opt;
  opt.paths = 4000;
  opt.base_seed = 31;
  opt.sim.t_final = 2.0;
  opt.sim.ts = 0.5;
  opt.sim.substeps = 5;
  opt.objective = [](const SimRecord& r) { return r.z.back(); };
  opt.objective2 = [](const SimRecord& r) { return r.z.back() * r.z.back(); };
  const std::array<double, 1> x0{1.5};
  const double u = 0.6;
  const EnsembleResult res =
      run_ensemble(model, [&](int) { return ConstController{u}; }, x0, opt);
  CHECK(res.failed_paths == 0);
  const testsupport::ChainMoments mo =
      testsupport::linear_chain_moments(1.5, -0.8, 1.0 * u, 0.4, 0.1, 20);
  CHECK(std::abs(res.mean_objective - mo.mean) < 4.0 * res.objective_stderr);
  const double var = res.mean_objective2 - res.mean_objective * res.mean_objective;
  CHECK(std::abs(var - mo.var) < 4.0 * mo.var * std::sqrt(2.0 / opt.paths));
}

TEST_CASE("ensemble reduction is independent of thread count") {
  const LinearSde model{.sigma = 0.2};
  EnsembleOptions opt;
  opt.paths = 64;
  opt.base_seed = 12;
  opt.sim.t_final = 10.0;
  opt.objective = [](const SimRecord& r) { return r.z.back(); };
  opt.z_min = -0.05;
  opt.quantile_levels = {0.1, 0.5, 0.9};
  const std::array<double, 1> x0{0.0};
  opt.max_threads = 1;
  const EnsembleResult serial =
      run_ensemble(model, [&](int) { return ConstController{0.0}; }, x0, opt);
  opt.max_threads = 4;
  const EnsembleResult pooled =
      run_ensemble(model, [&](int) { return ConstController{0.0}; }, x0, opt);
  CHECK(serial.mean_objective == pooled.mean_objective);
  CHECK(serial.violation_fraction == pooled.violation_fraction);
  CHECK(serial.quantiles == pooled.quantiles);
  CHECK(serial.mean_z == pooled.mean_z);
}

TEST_CASE("quantile columns bracket the per-sample mean") {
  const LinearSde model{.sigma = 0.3};
  EnsembleOptions opt;
  opt.paths = 200;
  opt.base_seed = 40;
  opt.sim.t_final = 8.0;
  opt.quantile_levels = {0.1, 0.9};
  const std::array<double, 1> x0{0.0};
  const EnsembleResult res =
      run_ensemble(model, [&](int) { return ConstController{0.0}; }, x0, opt);
  REQUIRE(res.quantiles.size() == 2);
  REQUIRE(res.mean_z.size() == res.quantiles[0].size());
  for (std::size_t k = 1; k < res.mean_z.size(); ++k) {
    CHECK(res.quantiles[0][k] <= res.mean_z[k]);
    CHECK(res.mean_z[k] <= res.quantiles[1][k]);
  }
}

TEST_CASE("quantile_type7 interpolates linearly") {
  std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(quantile_type7(v, 0.0) == 1.0);
  CHECK(quantile_type7(v, 1.0) == 4.0);
  CHECK(quantile_type7(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile_type7(v, 1.0 / 3.0) == doctest::Approx(2.0));
}

TEST_CASE("failed paths enter at the penalty with full violation") {
  // Strongly unstable drift with no control: every path blows up to inf.
  const LinearSde model{.a = 40.0, .b = 0.0, .sigma = 0.0};
  EnsembleOptions opt;
  opt.paths = 4;
  opt.sim.t_final = 50.0;
  opt.objective = [](const SimRecord& r) { return r.z.back(); };
  opt.z_min = 0.0;
  opt.failure_penalty = 123.0;
  const std::array<double, 1> x0{1.0};
  const EnsembleResult res =
      run_ensemble(model, [&](int) { return ConstController{0.0}; }, x0, opt);
  CHECK(res.failed_paths == 4);
  CHECK(res.mean_objective == 123.0);
  CHECK(res.violation_fraction == 1.0);
}
