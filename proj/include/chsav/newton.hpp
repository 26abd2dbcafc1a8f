#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "chsav/errors.hpp"
#include "chsav/linalg.hpp"
#include "chsav/params.hpp"

namespace chsav {

/// Jacobian of one implicit line solve: a banded phi-block (pentadiagonal for
/// the flux-of-Laplacian coupling) bordered by a dense multiplier column and a
/// dense constraint row.
struct BorderedBandJacobian {
  int n = 0;
  linalg::BandMat band;           // d r_i / d phi_m, |i-m| <= 2
  std::vector<double> xi_col;     // d r_i / d xi
  std::vector<double> con_row;    // d r_n / d phi_m
  double con_xi = 0.0;            // d r_n / d xi

  void resize(int n_, int kl, int ku) {
    n = n_;
    band.resize(n_, kl, ku);
    xi_col.assign(static_cast<size_t>(n_), 0.0);
    con_row.assign(static_cast<size_t>(n_), 0.0);
    con_xi = 0.0;
  }

  void zero() {
    band.zero();
    std::fill(xi_col.begin(), xi_col.end(), 0.0);
    std::fill(con_row.begin(), con_row.end(), 0.0);
    con_xi = 0.0;
  }

  void to_dense(linalg::Mat& m) const {
    m.resize(n + 1);
    for (int i = 0; i < n; ++i)
      for (int j = std::max(0, i - band.kl()); j <= std::min(n - 1, i + band.ku()); ++j)
        m(i, j) = band.at(i, j);
    for (int i = 0; i < n; ++i) {
      m(i, n) = xi_col[i];
      m(n, i) = con_row[i];
    }
    m(n, n) = con_xi;
  }
};

/// One implicit line update: n cell unknowns plus the scalar multiplier.
/// eval fills the n+1 residual and, when jac is non-null, the analytic Jacobian
/// at the same point. bound is the open interval |phi_i| < bound that iterates
/// must respect (the potential's domain).
struct RowSystem {
  int n = 0;
  double bound = std::numeric_limits<double>::infinity();
  int band_kl = 2;
  int band_ku = 2;
  std::function<void(std::span<const double> phi, double xi, std::span<double> r,
                     BorderedBandJacobian* jac)>
      eval;

  void residual(std::span<const double> phi, double xi, std::span<double> r) const {
    eval(phi, xi, r, nullptr);
  }
};

namespace detail {

inline double max_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool strictly_bounded(std::span<const double> v, double bound) {
  for (double x : v)
    if (!(std::abs(x) < bound)) return false;
  return true;
}

}  // namespace detail

/// Centered-difference Jacobian of a RowSystem residual; the perturbation turns
/// one-sided when it would leave the bound interval. Used as a validation
/// oracle for the analytic Jacobian and as a fallback (NewtonParams::fd_jacobian).
inline linalg::Mat jacobian_fd(const RowSystem& sys, std::span<const double> phi, double xi,
                               double h_base = 1e-7) {
  const int n = sys.n;
  linalg::Mat m(n + 1);
  std::vector<double> x(phi.begin(), phi.end());
  std::vector<double> rp(n + 1), rm(n + 1);
  for (int j = 0; j <= n; ++j) {
    const double xj = (j < n) ? x[j] : xi;
    const double h = h_base * (1.0 + std::abs(xj));
    double up = xj + h, dn = xj - h;
    if (j < n) {
      if (!(std::abs(up) < sys.bound)) up = xj;
      if (!(std::abs(dn) < sys.bound)) dn = xj;
      if (up == dn) throw DomainError("jacobian_fd: bound interval too tight for perturbation");
      x[j] = up;
      sys.residual(x, xi, rp);
      x[j] = dn;
      sys.residual(x, xi, rm);
      x[j] = xj;
    } else {
      sys.residual(x, up, rp);
      sys.residual(x, dn, rm);
    }
    const double inv = 1.0 / (up - dn);
    for (int i = 0; i <= n; ++i) m(i, j) = (rp[i] - rm[i]) * inv;
  }
  return m;
}

struct RowSolution {
  std::vector<double> phi;
  double xi = 1.0;
  SolveStats stats;
};

namespace detail {

// Newton direction via the bordered elimination: factor the banded phi block
// once, back-solve for the residual and the multiplier column, then close the
// constraint row by a scalar Schur complement.
inline void solve_direction_banded(BorderedBandJacobian& jac, std::span<const double> r,
                                   std::vector<double>& dphi, double& dxi) {
  const int n = jac.n;
  dphi.assign(static_cast<size_t>(n), 0.0);
  std::vector<double> x2(jac.xi_col.begin(), jac.xi_col.end());
  for (int i = 0; i < n; ++i) dphi[i] = -r[i];
  jac.band.factor();
  jac.band.solve(dphi);  // A x1 = -r_phi
  jac.band.solve(x2);    // A x2 = xi_col
  double rx1 = 0.0, rx2 = 0.0;
  for (int i = 0; i < n; ++i) {
    rx1 += jac.con_row[i] * dphi[i];
    rx2 += jac.con_row[i] * x2[i];
  }
  const double schur = jac.con_xi - rx2;
  const double rhs = -r[n] - rx1;
  if (schur == 0.0) {
    if (rhs == 0.0) {
      dxi = 0.0;  // constraint is 0 = xi * 0: any multiplier works, keep the current one
    } else {
      throw SingularJacobian("bordered solve: zero Schur complement with inconsistent constraint");
    }
  } else {
    dxi = rhs / schur;
  }
  for (int i = 0; i < n; ++i) dphi[i] -= dxi * x2[i];
}

// Same bordered elimination with a dense factorization of the phi block, so
// the stationary constraint degeneracy (all-zero last row and column with a
// zero constraint residual) resolves identically on both paths.
inline void solve_direction_dense(const linalg::Mat& m, std::span<const double> r,
                                  std::vector<double>& dphi, double& dxi) {
  const int n = m.n() - 1;
  linalg::Mat a(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = m(i, j);
  std::vector<int> piv;
  linalg::lu_factor(a, piv);
  dphi.assign(static_cast<size_t>(n), 0.0);
  std::vector<double> x2(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    dphi[i] = -r[i];
    x2[i] = m(i, n);
  }
  linalg::lu_solve(a, piv, dphi);
  linalg::lu_solve(a, piv, x2);
  double rx1 = 0.0, rx2 = 0.0;
  for (int i = 0; i < n; ++i) {
    rx1 += m(n, i) * dphi[i];
    rx2 += m(n, i) * x2[i];
  }
  const double schur = m(n, n) - rx2;
  const double rhs = -r[n] - rx1;
  if (schur == 0.0) {
    if (rhs == 0.0) {
      dxi = 0.0;
    } else {
      throw SingularJacobian("bordered solve: zero Schur complement with inconsistent constraint");
    }
  } else {
    dxi = rhs / schur;
  }
  for (int i = 0; i < n; ++i) dphi[i] -= dxi * x2[i];
}

}  // namespace detail

namespace detail {

// Shared state of one line solve.
struct RowSolver {
  const RowSystem& sys;
  const NewtonParams& params;
  int n;
  std::vector<double> x, r, trial, rt, dphi;
  double xi;
  double rnorm = std::numeric_limits<double>::infinity();
  BorderedBandJacobian jac;
  linalg::Mat dense;
  SolveStats stats;
  std::vector<double> best_x;
  double best_xi, best_norm;
  bool saw_singular = false;

  RowSolver(const RowSystem& s, std::span<const double> phi_init, double xi_init,
            const NewtonParams& p)
      : sys(s), params(p), n(s.n), x(phi_init.begin(), phi_init.end()),
        r(static_cast<size_t>(s.n) + 1), trial(s.n), rt(static_cast<size_t>(s.n) + 1),
        dphi(s.n), xi(xi_init), best_x(x), best_xi(xi_init),
        best_norm(std::numeric_limits<double>::infinity()) {
    sys.residual(x, xi, r);
    if (!all_finite(r)) throw ParameterError("solve_row: residual not finite at start");
    rnorm = max_norm(r);
    best_norm = rnorm;
  }

  void track_best() {
    if (rnorm < best_norm) {
      best_norm = rnorm;
      best_x = x;
      best_xi = xi;
    }
  }

  void restore_best() {
    x = best_x;
    xi = best_xi;
    sys.residual(x, xi, r);
    rnorm = max_norm(r);
  }

  [[noreturn]] void fail(const char* msg) {
    stats.final_residual = rnorm;
    throw NoConvergence(msg, best_x, best_xi, stats);
  }

  // Backtracking on the full residual max-norm; the step is halved until the
  // trial is strictly bounded and the norm decreases. When the halving cap is
  // hit the best bounded trial is accepted so the iteration can continue.
  // Returns false when no bounded finite trial exists at all.
  bool damp_and_accept(double dxi) {
    double alpha = 1.0;
    bool have_fallback = false;
    std::vector<double> fb_x(n), fb_r(n + 1);
    double fb_xi = xi, fb_norm = std::numeric_limits<double>::infinity();
    for (int h = 0; h <= params.damping_max_halvings; ++h) {
      for (int i = 0; i < n; ++i) trial[i] = x[i] + alpha * dphi[i];
      const double txi = xi + alpha * dxi;
      if (strictly_bounded(trial, sys.bound)) {
        sys.residual(trial, txi, rt);
        if (all_finite(rt)) {
          const double tnorm = max_norm(rt);
          if (tnorm < fb_norm) {
            fb_norm = tnorm;
            fb_x = trial;
            fb_xi = txi;
            fb_r = rt;
            have_fallback = true;
          }
          if (tnorm < rnorm) {
            x = trial;
            xi = txi;
            r = rt;
            rnorm = tnorm;
            return true;
          }
        }
      }
      if (h < params.damping_max_halvings) {
        alpha *= 0.5;
        ++stats.halvings_total;
      }
    }
    if (!have_fallback) return false;
    x = fb_x;
    xi = fb_xi;
    r = fb_r;
    rnorm = fb_norm;
    return true;
  }

  // Full bordered Newton iterations; returns true on convergence. A singular
  // direction ends the phase (the fallback strategy decides what to do next).
  bool newton_phase(int budget) {
    const bool use_band = !params.fd_jacobian && n >= 12;
    int it = 0;
    while (rnorm > params.tol_residual && it < budget) {
      double dxi = 0.0;
      try {
        if (params.fd_jacobian) {
          dense = jacobian_fd(sys, x, xi);
          solve_direction_dense(dense, r, dphi, dxi);
        } else {
          jac.resize(n, sys.band_kl, sys.band_ku);
          sys.eval(x, xi, r, &jac);
          if (use_band) {
            solve_direction_banded(jac, r, dphi, dxi);
          } else {
            jac.to_dense(dense);
            solve_direction_dense(dense, r, dphi, dxi);
          }
        }
      } catch (const SingularJacobian&) {
        saw_singular = true;
        return false;
      }
      if (!damp_and_accept(dxi)) fail("solve_row: no bounded finite trial along the Newton direction");
      ++it;
      ++stats.iterations;
      track_best();
    }
    return rnorm <= params.tol_residual;
  }

  // Mass rows only, multiplier frozen: banded (or dense) Newton on the phi
  // block, accepting on the mass-row norm alone.
  bool frozen_xi_phase(int budget) {
    auto mass_norm = [&](std::span<const double> v) {
      double m = 0.0;
      for (int i = 0; i < n; ++i) m = std::max(m, std::abs(v[i]));
      return m;
    };
    double mnorm = mass_norm(r);
    int it = 0;
    while (mnorm > params.tol_residual && it < budget) {
      jac.resize(n, sys.band_kl, sys.band_ku);
      sys.eval(x, xi, r, &jac);
      for (int i = 0; i < n; ++i) dphi[i] = -r[i];
      try {
        if (!params.fd_jacobian && n >= 12) {
          jac.band.factor();
          jac.band.solve(dphi);
        } else {
          linalg::Mat a(n);
          for (int i = 0; i < n; ++i)
            for (int j = std::max(0, i - sys.band_kl); j <= std::min(n - 1, i + sys.band_ku);
                 ++j)
              a(i, j) = jac.band.at(i, j);
          std::vector<int> piv;
          linalg::lu_factor(a, piv);
          linalg::lu_solve(a, piv, dphi);
        }
      } catch (const SingularJacobian&) {
        break;  // speculative probe hit a degenerate block; report failure upward
      }
      double alpha = 1.0;
      bool accepted = false;
      for (int h = 0; h <= params.damping_max_halvings && !accepted; ++h) {
        for (int i = 0; i < n; ++i) trial[i] = x[i] + alpha * dphi[i];
        if (strictly_bounded(trial, sys.bound)) {
          sys.residual(trial, xi, rt);
          if (all_finite(rt) && mass_norm(rt) < mnorm) {
            x = trial;
            r = rt;
            mnorm = mass_norm(rt);
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
        ++stats.halvings_total;
      }
      ++it;
      ++stats.iterations;
      if (!accepted) break;
    }
    rnorm = max_norm(r);
    track_best();
    return mnorm <= params.tol_residual;
  }

  // One point of the reduced scalar problem H(xi) = constraint residual at
  // the frozen-xi solution u(xi). Warm-starts from the current x.
  bool reduced_eval(double xi_probe, double& h_out) {
    xi = xi_probe;
    sys.residual(x, xi, r);
    rnorm = max_norm(r);
    if (!frozen_xi_phase(params.max_iter)) return false;
    h_out = r[n];
    track_best();
    return true;
  }

  enum class ReducedOutcome { Solved, GapAccepted, Failed };

  struct GapPoint {
    bool valid = false;
    double xi = 1.0;
    double h = std::numeric_limits<double>::infinity();
    std::vector<double> x, r;
  };

  void consider_gap_point(GapPoint& gp, double h_val) {
    double mnorm = 0.0;
    for (int i = 0; i < n; ++i) mnorm = std::max(mnorm, std::abs(r[i]));
    if (mnorm > params.tol_residual) return;
    if (std::abs(h_val) < std::abs(gp.h)) {
      gp.valid = true;
      gp.xi = xi;
      gp.h = h_val;
      gp.x = x;
      gp.r = r;
    }
  }

  ReducedOutcome accept_gap(const GapPoint& gp) {
    if (!gp.valid) return ReducedOutcome::Failed;
    x = gp.x;
    xi = gp.xi;
    r = gp.r;
    rnorm = max_norm(r);
    stats.constraint_gap = std::abs(gp.h);
    return ReducedOutcome::GapAccepted;
  }

  // The multiplier root of the reduced problem can sit anywhere on the real
  // line, so Newton from the seed routinely stagnates; worse, H can have a
  // sign-definite minimum, in which case the written system has no solution
  // at all. Hunt a sign bracket of H around the seed by geometric expansion
  // and close it with a bisection-safeguarded secant; without a root, settle
  // on the best feasible point seen (golden-section refined) and record the
  // remaining constraint gap.
  ReducedOutcome reduced_phase(double xi_center) {
    GapPoint gp;
    double hc;
    if (!reduced_eval(xi_center, hc)) return ReducedOutcome::Failed;
    if (rnorm <= params.tol_residual) return ReducedOutcome::Solved;
    if (hc == 0.0) return ReducedOutcome::Failed;  // exact constraint; polish must finish
    consider_gap_point(gp, hc);

    std::vector<double> x_at_center = x;
    double best_xi_probe = xi_center, best_h = std::abs(hc), best_spacing = 0.0;
    std::vector<double> best_probe_x = x;
    double a = xi_center, ha = hc;
    double b = 0.0, hb = 0.0;
    bool bracketed = false;
    double step = 0.25 * (1.0 + std::abs(xi_center));
    for (int e = 0; e < 60 && !bracketed; ++e) {
      const double spacing = step;
      const double cand = xi_center + ((e % 2 == 0) ? 1.0 : -1.0) * step;
      if (e % 2 == 1) step *= 2.0;
      if (!(std::abs(cand) < 1e10)) break;
      x = x_at_center;
      double hcand;
      if (!reduced_eval(cand, hcand)) continue;
      if (rnorm <= params.tol_residual) return ReducedOutcome::Solved;
      consider_gap_point(gp, hcand);
      if (std::abs(hcand) < best_h) {
        best_h = std::abs(hcand);
        best_xi_probe = cand;
        best_spacing = spacing;
        best_probe_x = x;
      }
      if (std::signbit(hcand) != std::signbit(hc)) {
        b = cand;
        hb = hcand;
        a = xi_center;
        ha = hc;
        bracketed = true;
      }
      // H grows on both flanks once the offset dominates: a definite minimum.
      if (e >= 7 && std::abs(hcand) > 8.0 * best_h && step > 4.0 * (1.0 + std::abs(best_xi_probe)))
        break;
    }

    if (bracketed) {
      int side = 0;
      for (int it = 0; it < 80; ++it) {
        double mid = (ha != hb) ? (a * hb - b * ha) / (hb - ha) : 0.5 * (a + b);
        const double lo = std::min(a, b), hi = std::max(a, b);
        if (!(mid > lo && mid < hi)) mid = 0.5 * (a + b);
        double hm;
        if (!reduced_eval(mid, hm)) break;
        if (rnorm <= params.tol_residual) return ReducedOutcome::Solved;
        consider_gap_point(gp, hm);
        if (std::signbit(hm) == std::signbit(ha)) {
          a = mid;
          ha = hm;
          if (side == -1) hb *= 0.5;
          side = -1;
        } else {
          b = mid;
          hb = hm;
          if (side == +1) ha *= 0.5;
          side = +1;
        }
        if (std::abs(b - a) < 1e-15 * (1.0 + std::min(std::abs(a), std::abs(b)))) break;
      }
      if (rnorm <= params.tol_residual) return ReducedOutcome::Solved;
      return accept_gap(gp);
    }

    // No bracket: golden-section on |H| around the best probe, skipping
    // probes whose block solve fails.
    double lo = best_xi_probe -
                (best_spacing > 0.0 ? best_spacing : 0.5 * (1.0 + std::abs(best_xi_probe)));
    double hi = best_xi_probe +
                (best_spacing > 0.0 ? best_spacing : 0.5 * (1.0 + std::abs(best_xi_probe)));
    x = best_probe_x;
    constexpr double kGolden = 0.6180339887498949;
    double u1 = hi - kGolden * (hi - lo), u2 = lo + kGolden * (hi - lo);
    double h1, h2;
    const bool ok1 = reduced_eval(u1, h1);
    if (ok1 && rnorm <= params.tol_residual) return ReducedOutcome::Solved;
    if (ok1) consider_gap_point(gp, h1);
    else x = best_probe_x;
    const bool ok2 = reduced_eval(u2, h2);
    if (ok2 && rnorm <= params.tol_residual) return ReducedOutcome::Solved;
    if (ok2) consider_gap_point(gp, h2);
    if (ok1 && ok2) {
      for (int it = 0; it < 40 && hi - lo > 1e-10 * (1.0 + std::abs(best_xi_probe)); ++it) {
        if (std::abs(h1) < std::abs(h2)) {
          hi = u2;
          u2 = u1;
          h2 = h1;
          u1 = hi - kGolden * (hi - lo);
          if (!reduced_eval(u1, h1)) break;
          if (rnorm <= params.tol_residual) return ReducedOutcome::Solved;
          consider_gap_point(gp, h1);
        } else {
          lo = u1;
          u1 = u2;
          h1 = h2;
          u2 = lo + kGolden * (hi - lo);
          if (!reduced_eval(u2, h2)) break;
          if (rnorm <= params.tol_residual) return ReducedOutcome::Solved;
          consider_gap_point(gp, h2);
        }
      }
    }
    return accept_gap(gp);
  }
};

}  // namespace detail

/// Damped semismooth Newton on one line system. Every accepted iterate stays
/// strictly inside the bound interval; a step is halved until the trial is
/// bounded and the residual max-norm decreases, with the best bounded trial
/// accepted when the halving cap is hit. Solves that stagnate fall back to
/// the reduced scalar problem in the multiplier (whose root can sit far from
/// the seed); a constraint with no real root is satisfied in the
/// least-squares sense with the gap recorded in SolveStats::constraint_gap —
/// the step-level certificates remain the enforcement of the scheme's laws.
inline RowSolution solve_row(const RowSystem& sys, std::span<const double> phi_init,
                             double xi_init, const NewtonParams& params) {
  params.validate();
  if (!detail::strictly_bounded(phi_init, sys.bound))
    throw ParameterError("solve_row: initial iterate violates the bound interval");

  detail::RowSolver solver(sys, phi_init, xi_init, params);
  bool ok = solver.rnorm <= params.tol_residual;
  if (!ok && !params.fd_jacobian) {
    // Solve the cell updates at the seeded multiplier first. Whenever the
    // constraint is already satisfied there (stationary and near-stationary
    // lines, where its root is pure noise amplification), the seed is kept —
    // the multiplier only gets chased when the constraint is genuinely active.
    solver.frozen_xi_phase(params.max_iter);
    ok = solver.rnorm <= params.tol_residual;
  }
  if (!ok) ok = solver.newton_phase(std::min(params.max_iter, 12));
  if (!ok && !params.fd_jacobian) {
    const auto outcome = solver.reduced_phase(xi_init);
    if (outcome == detail::RowSolver::ReducedOutcome::GapAccepted) {
      double mnorm = 0.0;
      for (int i = 0; i < sys.n; ++i) mnorm = std::max(mnorm, std::abs(solver.r[i]));
      solver.stats.final_residual = mnorm;
      solver.stats.converged = true;
      return {std::move(solver.x), solver.xi, solver.stats};
    }
    if (outcome == detail::RowSolver::ReducedOutcome::Failed) solver.restore_best();
    ok = solver.newton_phase(params.max_iter);  // joint polish (or the fast path retry)
  } else if (!ok) {
    ok = solver.newton_phase(params.max_iter);
  }
  solver.stats.final_residual = solver.rnorm;
  solver.stats.converged = ok;
  if (!ok && solver.saw_singular)
    throw SingularJacobian("solve_row: linear solve failed and no fallback recovered");
  if (!ok) solver.fail("solve_row: iteration cap reached before tolerance");
  return {std::move(solver.x), solver.xi, solver.stats};
}

}  // namespace chsav
