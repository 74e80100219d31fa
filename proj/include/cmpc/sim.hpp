#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmpc/rng.hpp"

namespace cmpc {

// Continuous-time model dx = f(x, u) dt + g(x, u) dW with a scalar measured
// output.  drift/diffusion write into caller-owned spans; diffusion is
// column-major state_dim x noise_dim.  Inputs are in native units (L/s for
// the reactor models); input_record_scale converts them to recorded units.
template <typename M>
concept SdeModel = requires(const M m, std::span<const double> x, double u, std::span<double> o) {
  { M::state_dim } -> std::convertible_to<int>;
  { M::noise_dim } -> std::convertible_to<int>;
  m.drift(x, u, o);
  m.diffusion(x, u, o);
  { m.output(x) } -> std::convertible_to<double>;
  { m.measurement_variance() } -> std::convertible_to<double>;
  { m.input_record_scale() } -> std::convertible_to<double>;
};

// Sampled feedback law: consumes the measurement at sample k, returns the
// input to hold over [k ts, (k+1) ts) in native units.
template <typename C>
concept Controller = requires(C c, double y, int k) {
  { c.step(y, k) } -> std::convertible_to<double>;
  c.reset();
};

struct SimConfig {
  double t_final = 300.0;  // s
  double ts = 1.0;         // s, sample period
  int substeps = 10;       // Euler-Maruyama substeps per sample
  std::uint64_t seed = 0;
  bool process_noise = true;
  bool measurement_noise = true;

  int samples() const {
    const double k = t_final / ts;
    const int ki = static_cast<int>(std::lround(k));
    if (!(ts > 0.0) || !(t_final > 0.0) || substeps < 1 || std::abs(k - ki) > 1e-9 || ki < 1)
      throw std::invalid_argument("SimConfig: t_final must be a positive multiple of ts");
    return ki;
  }
};

// One closed-loop trajectory at the sample grid k = 0..K.  t, z, y have K+1
// entries and x holds K+1 state rows; u and the slack columns store the K
// applied values with the last entry duplicated so all columns share a
// length.  Slacks stay zero for controllers that do not report any.
struct SimRecord {
  double ts = 1.0;
  double record_scale = 1.0;
  int state_dim = 0;
  std::vector<double> t;
  std::vector<double> x;  // row-major samples x state_dim
  std::vector<double> z;
  std::vector<double> y;
  std::vector<double> u;
  std::vector<double> slack_lo;
  std::vector<double> slack_hi;

  int samples() const { return static_cast<int>(t.size()) - 1; }
};

struct SimDiverged : std::runtime_error {
  int sample;
  explicit SimDiverged(int k)
      : std::runtime_error("simulation diverged at sample " + std::to_string(k)), sample(k) {}
};

// One Euler-Maruyama substep in place; dw holds the scaled increments
// (standard normals times sqrt(dt)).
template <SdeModel M>
void em_step(const M& model, std::span<double> x, double u, double dt, std::span<const double> dw) {
  constexpr int n = M::state_dim;
  constexpr int nw = M::noise_dim;
  std::array<double, n> f;
  std::array<double, static_cast<std::size_t>(n) * nw> g;
  model.drift(std::span<const double>(x.data(), n), u, f);
  model.diffusion(std::span<const double>(x.data(), n), u, g);
  for (int i = 0; i < n; ++i) {
    double acc = x[i] + f[i] * dt;
    for (int j = 0; j < nw; ++j) acc += g[j * n + i] * dw[j];
    x[i] = acc;
  }
}

// Simulates measurement -> control -> hold over one sample period, repeated
// for K samples, with a final measurement at k = K.  Throws SimDiverged when
// the state or input stops being finite (or the model rejects the state).
template <SdeModel M, Controller C>
SimRecord simulate_closed_loop(const M& model, C& controller, std::span<const double> x0,
                               const SimConfig& cfg) {
  constexpr int n = M::state_dim;
  constexpr int nw = M::noise_dim;
  const int big_k = cfg.samples();
  if (static_cast<int>(x0.size()) != n)
    throw std::invalid_argument("simulate_closed_loop: state size mismatch");
  const double dt = cfg.ts / cfg.substeps;
  const double sqrt_dt = std::sqrt(dt);
  const double noise_std = std::sqrt(model.measurement_variance());
  const CounterRng rng(cfg.seed);

  controller.reset();
  SimRecord rec;
  rec.ts = cfg.ts;
  rec.record_scale = model.input_record_scale();
  rec.state_dim = n;
  rec.t.reserve(big_k + 1);
  rec.x.reserve(static_cast<std::size_t>(big_k + 1) * n);
  rec.z.reserve(big_k + 1);
  rec.y.reserve(big_k + 1);
  rec.u.reserve(big_k + 1);
  rec.slack_lo.reserve(big_k + 1);
  rec.slack_hi.reserve(big_k + 1);

  std::array<double, n> x;
  for (int i = 0; i < n; ++i) x[i] = x0[i];
  std::array<double, nw> dw{};

  for (int k = 0; k <= big_k; ++k) {
    const double z = model.output(std::span<const double>(x.data(), n));
    if (!std::isfinite(z)) throw SimDiverged(k);
    const double y =
        cfg.measurement_noise ? z + noise_std * rng.normal(k, 0, kMeasurementStream, 0) : z;
    rec.t.push_back(k * cfg.ts);
    rec.x.insert(rec.x.end(), x.begin(), x.end());
    rec.z.push_back(z);
    rec.y.push_back(y);
    if (k == big_k) break;

    const double u = controller.step(y, k);
    if (!std::isfinite(u)) throw SimDiverged(k);
    rec.u.push_back(u * rec.record_scale);
    if constexpr (requires { controller.last_slacks(); }) {
      const auto [lo, hi] = controller.last_slacks();
      rec.slack_lo.push_back(lo);
      rec.slack_hi.push_back(hi);
    } else {
      rec.slack_lo.push_back(0.0);
      rec.slack_hi.push_back(0.0);
    }

    try {
      for (int s = 0; s < cfg.substeps; ++s) {
        if (cfg.process_noise)
          for (int j = 0; j < nw; ++j) dw[j] = sqrt_dt * rng.normal(k, s, kProcessStream, j);
        em_step(model, x, u, dt, dw);
        for (int i = 0; i < n; ++i)
          if (!std::isfinite(x[i])) throw SimDiverged(k);
      }
    } catch (const std::domain_error&) {
      throw SimDiverged(k);
    }
  }
  rec.u.push_back(rec.u.back());
  rec.slack_lo.push_back(rec.slack_lo.back());
  rec.slack_hi.push_back(rec.slack_hi.back());
  return rec;
}

}  // namespace cmpc
