#pragma once

namespace cmpc {

// All internal computation uses seconds, kelvin, liters, and L/s for flows.
// Flows cross the API boundary in mL/min and temperatures cross the CLI
// boundary in Celsius; these helpers are the only conversion points.
inline constexpr double kMlMinPerLs = 60000.0;

inline constexpr double ml_min_to_ls(double f) { return f / kMlMinPerLs; }
inline constexpr double ls_to_ml_min(double f) { return f * kMlMinPerLs; }
inline constexpr double celsius_to_kelvin(double t) { return t + 273.15; }
inline constexpr double kelvin_to_celsius(double t) { return t - 273.15; }

}  // namespace cmpc
