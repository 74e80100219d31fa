#pragma once

namespace cmpc {

// Discrete PI gains in native units: kp in (L/s)/K, ki in (L/s)/(K s),
// kaw in 1/s.  Cooling this reactor means raising the flow when the
// temperature is high, so stabilizing gains are negative.
struct PiGains {
  double kp = 0.0;
  double ki = 0.0;
  double kaw = 0.0;
};

// Operating point and actuator range, native units (K, L/s).
struct PiSetpoint {
  double y_bar = 0.0;
  double u_bar = 0.0;
  double u_min = 0.0;
  double u_max = 0.0;
};

struct PiState {
  double integral = 0.0;  // L/s
};

// One update of the saturated PI law with back-calculation: the integrator
// advances on the tracking error first, the raw move u_bar + kp e + I is
// clipped to the actuator range, and the clip mismatch bleeds back into the
// integrator at rate kaw.
double pi_step(const PiGains& g, const PiSetpoint& sp, double ts, double y, PiState& st);

class PiController {
 public:
  PiController(const PiGains& g, const PiSetpoint& sp, double ts)
      : gains_(g), setpoint_(sp), ts_(ts) {}

  double step(double y, int k) {
    (void)k;
    return pi_step(gains_, setpoint_, ts_, y, state_);
  }
  void reset() { state_ = PiState{}; }

  const PiState& state() const { return state_; }
  const PiGains& gains() const { return gains_; }
  const PiSetpoint& setpoint() const { return setpoint_; }

 private:
  PiGains gains_;
  PiSetpoint setpoint_;
  double ts_;
  PiState state_;
};

}  // namespace cmpc
