#pragma once

#include <cmath>

#include "chsav/errors.hpp"

namespace chsav {

/// x = plus + minus with plus = max(x,0) >= 0 and minus = min(x,0) <= 0.
struct SignSplit {
  double plus;
  double minus;
};

inline SignSplit split_sign(double x) { return {x > 0.0 ? x : 0.0, x < 0.0 ? x : 0.0}; }

/// Degenerate mobility M(phi) = (beta^2 - phi^2)^k; beta = 1 is the standard
/// (1 - phi^2)^k, beta < 1 degenerates at the well minima instead.
struct MobilitySpec {
  int k = 1;
  double beta = 1.0;

  static MobilitySpec make(int k, double beta = 1.0) {
    if (k < 1) throw ParameterError("MobilitySpec: k must be a positive integer");
    if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("MobilitySpec: beta must be in (0, 1]");
    return {k, beta};
  }
};

namespace detail {
inline double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}
}  // namespace detail

/// Donor-ordered two-point mobility [(beta+chi1)^+ (beta-chi2)^+]^k.
/// Zero whenever chi1 <= -beta or chi2 >= beta.
inline double mobility_pair(const MobilitySpec& m, double chi1, double chi2) {
  const double p = split_sign(m.beta + chi1).plus;
  const double q = split_sign(m.beta - chi2).plus;
  return detail::ipow(p * q, m.k);
}

/// d(mobility_pair)/d(chi1). Subgradient 0 is used at the clamp kink.
inline double mobility_pair_d1(const MobilitySpec& m, double chi1, double chi2) {
  const double p = m.beta + chi1;
  const double q = m.beta - chi2;
  if (!(p > 0.0) || !(q > 0.0)) return 0.0;
  return m.k * detail::ipow(p * q, m.k - 1) * q;
}

/// d(mobility_pair)/d(chi2). Subgradient 0 is used at the clamp kink.
inline double mobility_pair_d2(const MobilitySpec& m, double chi1, double chi2) {
  const double p = m.beta + chi1;
  const double q = m.beta - chi2;
  if (!(p > 0.0) || !(q > 0.0)) return 0.0;
  return -m.k * detail::ipow(p * q, m.k - 1) * p;
}

}  // namespace chsav
