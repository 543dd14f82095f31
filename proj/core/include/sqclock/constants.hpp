#pragma once

#include <cmath>
#include <numbers>

namespace sqclock {

/// 87Rb clock transition |F=1,mF=0> <-> |F=2,mF=0>, angular frequency in rad/s.
inline constexpr double kClockOmega0 = 2.0 * std::numbers::pi * 6.834e9;

inline constexpr double kPi = std::numbers::pi;

/// Variance ratio -> dB.
inline double variance_db(double ratio) { return 10.0 * std::log10(ratio); }
/// Amplitude (standard-deviation) ratio -> dB.
inline double amplitude_db(double ratio) { return 20.0 * std::log10(ratio); }
inline double db_to_variance(double db) { return std::pow(10.0, db / 10.0); }
inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

}  // namespace sqclock
