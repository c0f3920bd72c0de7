#pragma once

#include <cmath>
#include <numbers>

namespace jcas {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double speed_of_light = 299792458.0;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }

/// Densities are configured per km^2; everything internal is per m^2.
inline constexpr double per_km2_to_per_m2(double d) { return d * 1e-6; }

} // namespace jcas
