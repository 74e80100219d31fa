#include "cmpc/pi.hpp"

#include <algorithm>

namespace cmpc {

double pi_step(const PiGains& g, const PiSetpoint& sp, double ts, double y, PiState& st) {
  const double e = sp.y_bar - y;
  st.integral += ts * g.ki * e;
  const double u_raw = sp.u_bar + g.kp * e + st.integral;
  const double u = std::clamp(u_raw, sp.u_min, sp.u_max);
  st.integral += ts * g.kaw * (u - u_raw);
  return u;
}

}  // namespace cmpc
