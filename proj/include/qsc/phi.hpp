#pragma once

#include <cmath>

namespace qsc {

/// phi(t) = (e^t - t - 1) / t^2, the profile of the global second-order models.
/// Convex and increasing, phi(0) = 1/2. Near zero a Taylor expansion replaces the
/// cancellation-prone closed form.
inline double phi(double t) {
  if (std::abs(t) < 1e-4) {
    return 0.5 + t / 6.0 + t * t / 24.0 + t * t * t / 120.0;
  }
  return (std::expm1(t) - t) / (t * t);
}

/// rho = phi(1) = e - 2.
inline constexpr double kRho = 0.71828182845904523536;

}  // namespace qsc
