#pragma once

#include <cmath>
#include <limits>

#include "chsav/errors.hpp"

namespace chsav {

enum class PotentialKind { Logarithmic, Polynomial };

/// Double-well free-energy density: logarithmic Flory-Huggins
///   F(phi) = theta/2 [(1+phi)ln(1+phi) + (1-phi)ln(1-phi)] + theta_c/2 (1-phi^2)
/// or the polynomial version F(phi) = (1-phi^2)^2 / 4.
struct PotentialSpec {
  PotentialKind kind = PotentialKind::Polynomial;
  double theta = 0.0;
  double theta_c = 0.0;

  static PotentialSpec logarithmic(double theta, double theta_c) {
    if (!(theta > 0.0 && theta < theta_c))
      throw ParameterError("PotentialSpec: logarithmic requires 0 < theta < theta_c");
    return {PotentialKind::Logarithmic, theta, theta_c};
  }

  static PotentialSpec polynomial() { return {PotentialKind::Polynomial, 0.0, 0.0}; }

  // Log terms are evaluated only for |phi| < 1 - 1e-15; no clamping, bound
  // preservation is certified elsewhere and silent clamping would mask bugs.
  static constexpr double kLogGuard = 1.0 - 1e-15;

  double value(double phi) const {
    if (kind == PotentialKind::Polynomial) {
      const double w = 1.0 - phi * phi;
      return 0.25 * w * w;
    }
    check_domain(phi);
    const double l1 = std::log1p(phi);
    const double l2 = std::log1p(-phi);
    return 0.5 * theta * ((1.0 + phi) * l1 + (1.0 - phi) * l2) + 0.5 * theta_c * (1.0 - phi * phi);
  }

  double derivative(double phi) const {
    if (kind == PotentialKind::Polynomial) return phi * phi * phi - phi;
    check_domain(phi);
    return 0.5 * theta * (std::log1p(phi) - std::log1p(-phi)) - theta_c * phi;
  }

  double second_derivative(double phi) const {
    if (kind == PotentialKind::Polynomial) return 3.0 * phi * phi - 1.0;
    check_domain(phi);
    return theta / (1.0 - phi * phi) - theta_c;
  }

  /// Radius of the open interval on which F is defined.
  double domain_bound() const {
    return kind == PotentialKind::Logarithmic ? 1.0 : std::numeric_limits<double>::infinity();
  }

  /// Location beta in (0,1] of the positive well minimum: F'(beta) = 0, F''(beta) > 0.
  /// Polynomial: exactly 1. Logarithmic: bisection of F' on (0, 1), resolved to
  /// the last representable interval (well below the 1e-12 requirement).
  double minimum_location() const {
    if (kind == PotentialKind::Polynomial) return 1.0;
    double lo = 1e-12;        // F'(lo) < 0 since theta < theta_c
    double hi = kLogGuard;    // F'(hi) > 0 unless the minimum sits inside the guard band
    if (log_derivative_raw(hi) <= 0.0) return hi;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (log_derivative_raw(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  // F' without the evaluation guard; valid for any |phi| < 1.
  double log_derivative_raw(double phi) const {
    return 0.5 * theta * (std::log1p(phi) - std::log1p(-phi)) - theta_c * phi;
  }

  void check_domain(double phi) const {
    if (!(std::abs(phi) < kLogGuard))
      throw DomainError("logarithmic potential evaluated at |phi| >= 1 - 1e-15");
  }
};

}  // namespace chsav
