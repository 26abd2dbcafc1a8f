#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "chsav/diagnostics.hpp"
#include "chsav/grid.hpp"
#include "chsav/implicit_line.hpp"
#include "chsav/newton.hpp"
#include "chsav/params.hpp"

namespace chsav {

struct StepResult {
  Field phi;
  double xi = 1.0;
  SolveStats stats;
  // Energy after each inner solve of a split 2D step (empty in 1D or when the
  // per-sweep check is disabled).
  std::vector<double> sweep_energies;
};

/// Central second difference with the homogeneous-Neumann one-sided stencils
/// at both ends: (phi_2-phi_1)/dx^2 on the left, (phi_{N-1}-phi_N)/dx^2 on the right.
inline std::vector<double> laplacian_1d(const Field& f) {
  const Grid& g = f.grid();
  if (g.dim != 1 || g.nx < 2) throw ParameterError("laplacian_1d: need a 1D field with nx >= 2");
  std::vector<double> lap(static_cast<size_t>(g.nx));
  const double ih2 = 1.0 / (g.dx * g.dx);
  lap[0] = (f[1] - f[0]) * ih2;
  for (int i = 1; i < g.nx - 1; ++i) lap[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) * ih2;
  lap[g.nx - 1] = (-f[g.nx - 1] + f[g.nx - 2]) * ih2;
  return lap;
}

/// mu_i = -eps^2 (lap phi)_i + xi F'(phi_i)
inline std::vector<double> chemical_potential(const Field& f, double xi,
                                              const SchemeParams& p) {
  auto mu = laplacian_1d(f);
  const double e2 = p.epsilon * p.epsilon;
  for (int i = 0; i < f.grid().nx; ++i) mu[i] = -e2 * mu[i] + xi * p.potential.derivative(f[i]);
  return mu;
}

/// Face velocities V_{i+1/2} = -(mu_{i+1}-mu_i)/dx and upwind fluxes
/// J = V^+ M(donor, receiver) + V^- M(receiver, donor); both boundary faces
/// carry an explicit zero so the mass telescoping is literal.
inline std::pair<std::vector<double>, std::vector<double>> upwind_flux(
    std::span<const double> mu, const Field& f, const SchemeParams& p) {
  const Grid& g = f.grid();
  const int n = g.nx;
  std::vector<double> v(static_cast<size_t>(n - 1)), flux(static_cast<size_t>(n) + 1, 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    v[i] = -(mu[i + 1] - mu[i]) / g.dx;
    const auto [vp, vm] = split_sign(v[i]);
    flux[i + 1] = vp * mobility_pair(p.mobility, f[i], f[i + 1]) +
                  vm * mobility_pair(p.mobility, f[i + 1], f[i]);
  }
  return {std::move(v), std::move(flux)};
}

namespace detail {

inline LineContext line_context_1d(const Field& phi_old, const SchemeParams& p) {
  LineContext ctx;
  ctx.n = phi_old.grid().nx;
  ctx.h = phi_old.grid().dx;
  ctx.dt = p.dt;
  ctx.eps2 = p.epsilon * p.epsilon;
  ctx.potential = p.potential;
  ctx.mobility = p.mobility;
  ctx.u_old = phi_old.values();
  return ctx;
}

inline void check_admissible_start(const Field& f, const MobilitySpec& mob) {
  const bool ok = mob.beta == 1.0 ? f.admissible(1.0) : f.admissible(mob.beta + 1e-14);
  if (!ok) throw ParameterError("step: initial field is not admissible for the mobility bound");
}

// Theorem-backed post-step checks. The bound is strict for beta = 1 and closed
// (with solver-tolerance slack) for beta < 1; mass and energy leak at most
// cert_tol = 10 * cells * tol_residual.
inline void certify_step(const Field& phi_new, const Field& phi_old, double e_new, double e_old,
                         const SchemeParams& p) {
  const int cells = phi_new.grid().cells();
  const double tol = p.cert_tol(cells);
  const double beta = p.mobility.beta;
  for (int i = 0; i < cells; ++i) {
    const double v = std::abs(phi_new[i]);
    const bool ok = beta == 1.0 ? v < 1.0 : v <= beta + 10.0 * p.newton.tol_residual;
    if (!ok)
      throw CertificateViolation(Certificate::Bound, v - beta,
                                 "phase value reached the mobility bound");
  }
  const double drift = std::abs(phi_new.sum() - phi_old.sum());
  if (drift > tol)
    throw CertificateViolation(Certificate::Mass, drift, "total mass drifted past tolerance");
  if (e_new > e_old + tol)
    throw CertificateViolation(Certificate::Energy, e_new - e_old,
                               "discrete energy increased past tolerance");
}

// Dissipation bookkeeping of the converged state: sum J*V dominates
// sum min(M_lr, M_rl) V^2 face by face.
inline void certify_flux_dissipation(const Field& phi_new, double xi, const SchemeParams& p) {
  auto mu = chemical_potential(phi_new, xi, p);
  auto [v, flux] = upwind_flux(mu, phi_new, p);
  double lhs = 0.0, mid = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    lhs += flux[i + 1] * v[i];
    const double ml = mobility_pair(p.mobility, phi_new[int(i)], phi_new[int(i) + 1]);
    const double mr = mobility_pair(p.mobility, phi_new[int(i) + 1], phi_new[int(i)]);
    mid += std::min(ml, mr) * v[i] * v[i];
  }
  const double tol = p.cert_tol(phi_new.grid().cells());
  if (lhs < mid - tol)
    throw CertificateViolation(Certificate::Energy, mid - lhs,
                               "upwind dissipation inequality violated");
}

}  // namespace detail

/// Scheme residual at (phi_new, xi_new) given the previous field. Components
/// 0..N-1 are the cell updates, component N the multiplier constraint.
inline std::vector<double> residual_1d(std::span<const double> phi_new, double xi_new,
                                       const Field& phi_old, const SchemeParams& p) {
  LineContext ctx = detail::line_context_1d(phi_old, p);
  LineWorkspace ws;
  ws.cache_old(ctx);
  std::vector<double> r(static_cast<size_t>(ctx.n) + 1);
  line_eval(ctx, ws, phi_new, xi_new, r, nullptr);
  return r;
}

/// One implicit step of the 1D scheme, certified for boundedness, mass
/// conservation and energy dissipation. Certificate violations are errors.
inline StepResult step_1d(const Field& phi_old, double xi_old, const SchemeParams& p) {
  p.validate();
  detail::check_admissible_start(phi_old, p.mobility);
  LineContext ctx = detail::line_context_1d(phi_old, p);
  LineWorkspace ws;
  ws.cache_old(ctx);
  RowSystem sys = make_row_system(ctx, ws);
  RowSolution sol = solve_row(sys, phi_old.values(), xi_old, p.newton);

  Field phi_new(phi_old.grid());
  std::copy(sol.phi.begin(), sol.phi.end(), phi_new.data());
  const double e_old = discrete_energy(phi_old, p);
  const double e_new = discrete_energy(phi_new, p);
  detail::certify_step(phi_new, phi_old, e_new, e_old, p);
  detail::certify_flux_dissipation(phi_new, sol.xi, p);
  return {std::move(phi_new), sol.xi, sol.stats, {}};
}

}  // namespace chsav
