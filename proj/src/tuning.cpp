#include "cmpc/tuning.hpp"

#include <cmath>
#include <stdexcept>

namespace cmpc {

double evaluate_objective(const SimRecord& rec, const TuningObjective& obj) {
  const int big_k = rec.samples();
  double phi = 0.0;
  for (int k = 0; k <= big_k; ++k) {
    const double d = rec.z[k] - obj.z_bar;
    phi += obj.q_z * d * d;
  }
  if (obj.kind == ObjectiveKind::tracking_plus_move) {
    double prev = obj.u_bar_record;
    for (int k = 0; k < big_k; ++k) {
      const double du = obj.input_scale * (rec.u[k] - prev);
      phi += obj.q_du * du * du;
      prev = rec.u[k];
    }
  }
  return phi;
}

std::vector<double> GridSpec::values() const {
  if (points < 2) throw std::invalid_argument("GridSpec: need at least two points");
  std::vector<double> v;
  v.reserve(points);
  if (log_spaced) {
    if (lo * hi <= 0.0)
      throw std::invalid_argument("GridSpec: log spacing needs nonzero endpoints of equal sign");
    const double sign = lo > 0.0 ? 1.0 : -1.0;
    const double ratio = std::log(std::abs(hi) / std::abs(lo));
    for (int i = 0; i < points; ++i)
      v.push_back(sign * std::abs(lo) * std::exp(ratio * i / (points - 1)));
  } else {
    for (int i = 0; i < points; ++i) v.push_back(lo + (hi - lo) * i / (points - 1));
  }
  return v;
}

}  // namespace cmpc
