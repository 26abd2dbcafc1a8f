#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace chsav {

/// Potential evaluated outside its domain (logarithmic F at |phi| >= 1 - 1e-15).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid construction argument (grid sizes, mobility exponent, noise amplitude, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownRecipe : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The linear solve inside a Newton iteration failed (degenerate configuration).
struct SingularJacobian : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolveStats {
  int iterations = 0;
  double final_residual = std::numeric_limits<double>::infinity();
  int halvings_total = 0;
  bool converged = false;
  // The multiplier constraint can be structurally infeasible (its scalar
  // reduction may have a strictly positive minimum). When that happens the
  // solver satisfies the cell updates to tol_residual, takes the multiplier
  // at the constraint's least-squares point, and records the remaining
  // constraint residual here; it is 0 whenever the full system was solved.
  // final_residual then reports the cell-update rows only.
  double constraint_gap = 0.0;
};

/// Newton ran out of iterations; carries the best bounded iterate seen.
struct NoConvergence : std::runtime_error {
  NoConvergence(const std::string& msg, std::vector<double> phi, double xi, SolveStats s)
      : std::runtime_error(msg), best_phi(std::move(phi)), best_xi(xi), stats(s) {}
  std::vector<double> best_phi;
  double best_xi = 1.0;
  SolveStats stats;
};

enum class Certificate { Bound, Mass, Energy };

inline const char* certificate_name(Certificate c) {
  switch (c) {
    case Certificate::Bound: return "bound";
    case Certificate::Mass: return "mass";
    case Certificate::Energy: return "energy";
  }
  return "?";
}

/// A converged step violated one of the scheme's certified invariants.
/// This signals a solver-tolerance or implementation fault, never a warning.
struct CertificateViolation : std::runtime_error {
  CertificateViolation(Certificate w, double mag, const std::string& detail)
      : std::runtime_error(std::string("certificate violation (") + certificate_name(w) +
                           "): " + detail),
        which(w),
        magnitude(mag) {}
  Certificate which;
  double magnitude;
};

}  // namespace chsav
