#pragma once

#include <numbers>

namespace epps {

// Reduced Planck constant, CODATA value 6.582119569e-16 eV*s expressed in
// the internal unit system (energies in ueV, times in ps).
inline constexpr double kHbarUevPs = 658.2119569;

// Gaussian FWHM = 2*sqrt(2*ln 2) * sigma.
inline constexpr double kFwhmPerSigma = 2.3548200450309493;

inline constexpr double kPi = std::numbers::pi;

inline constexpr double sigma_from_fwhm(double fwhm) { return fwhm / kFwhmPerSigma; }

inline constexpr double kPicosecondsPerSecond = 1e12;

}  // namespace epps
