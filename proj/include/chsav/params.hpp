#pragma once

#include "chsav/errors.hpp"
#include "chsav/mobility.hpp"
#include "chsav/potential.hpp"

namespace chsav {

struct NewtonParams {
  double tol_residual = 1e-12;   // absolute, max-norm
  int max_iter = 50;             // per solver phase; stats count all phases
  int damping_max_halvings = 30;
  bool fd_jacobian = false;

  void validate() const {
    if (!(tol_residual > 0.0)) throw ParameterError("NewtonParams: tol_residual must be > 0");
    if (max_iter < 1) throw ParameterError("NewtonParams: max_iter must be >= 1");
  }
};

/// Physical and numerical parameters of one scheme instance.
struct SchemeParams {
  double epsilon = 0.02;  // interface thickness
  double dt = 1e-4;
  PotentialSpec potential = PotentialSpec::polynomial();
  MobilitySpec mobility = MobilitySpec::make(1);
  NewtonParams newton;
  bool per_sweep_energy_check = true;

  void validate() const {
    if (!(epsilon > 0.0)) throw ParameterError("SchemeParams: epsilon must be > 0");
    if (!(dt > 0.0)) throw ParameterError("SchemeParams: dt must be > 0");
    newton.validate();
  }

  // The theorems hold for the exact discrete solution; a finite Newton residual
  // leaks into the invariants proportionally to the number of cells.
  double cert_tol(int cells) const { return 10.0 * cells * newton.tol_residual; }
};

}  // namespace chsav
