#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "chsav/scheme1d.hpp"

namespace chsav {

/// 5-point Laplacian with one-sided homogeneous-Neumann stencils on every wall
/// and corner (the missing neighbour and its -phi contribution are dropped).
inline std::vector<double> laplacian_2d(const Field& f) {
  const Grid& g = f.grid();
  if (g.dim != 2 || g.nx < 2 || g.ny < 2)
    throw ParameterError("laplacian_2d: need a 2D field with nx, ny >= 2");
  std::vector<double> lap(static_cast<size_t>(g.cells()));
  const double ix2 = 1.0 / (g.dx * g.dx), iy2 = 1.0 / (g.dy * g.dy);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      double dxx, dyy;
      if (i == 0) dxx = (f(1, j) - f(0, j)) * ix2;
      else if (i == g.nx - 1) dxx = (f(g.nx - 2, j) - f(g.nx - 1, j)) * ix2;
      else dxx = (f(i + 1, j) - 2.0 * f(i, j) + f(i - 1, j)) * ix2;
      if (j == 0) dyy = (f(i, 1) - f(i, 0)) * iy2;
      else if (j == g.ny - 1) dyy = (f(i, g.ny - 2) - f(i, g.ny - 1)) * iy2;
      else dyy = (f(i, j + 1) - 2.0 * f(i, j) + f(i, j - 1)) * iy2;
      lap[static_cast<size_t>(j) * g.nx + i] = dxx + dyy;
    }
  return lap;
}

/// Working state of one split step: the field is updated line by line in
/// place, and the intermediate multipliers of both inner loops are recorded.
struct SplitState {
  Field phi;
  std::vector<double> xi_tilde;  // one per x-direction row solve
  std::vector<double> xi_hat;    // one per y-direction column solve
  std::vector<double> sweep_energies;

  explicit SplitState(Field f)
      : phi(std::move(f)),
        xi_tilde(static_cast<size_t>(phi.grid().ny), 1.0),
        xi_hat(static_cast<size_t>(phi.grid().nx), 1.0) {}
};

struct SweepResult {
  double xi = 1.0;
  SolveStats stats;
  double denergy = 0.0;  // discrete energy change of this inner solve
};

struct SweepWorkspace {
  std::vector<double> u_old, trans_diag, trans_off;
  LineWorkspace lws;
};

namespace detail {

inline void certify_sweep_line(std::span<const double> u, const SchemeParams& p) {
  const double beta = p.mobility.beta;
  for (double v : u) {
    const bool ok = beta == 1.0 ? std::abs(v) < 1.0
                                : std::abs(v) <= beta + 10.0 * p.newton.tol_residual;
    if (!ok)
      throw CertificateViolation(Certificate::Bound, std::abs(v) - beta,
                                 "inner solve reached the mobility bound");
  }
}

// Energy change from replacing one line, using only terms that touch it:
// gradient differences along the line, gradient terms to the two frozen
// neighbour lines, and the potential on the line. All other terms cancel.
template <typename PrevAt, typename NextAt>
inline double line_energy_delta(std::span<const double> u_new, std::span<const double> u_old,
                                PrevAt frozen_prev, NextAt frozen_next, bool has_prev,
                                bool has_next, double h_line, double h_trans,
                                const SchemeParams& p) {
  const int n = static_cast<int>(u_new.size());
  const double e2h = 0.5 * p.epsilon * p.epsilon;
  double d = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    const double gn = (u_new[i + 1] - u_new[i]) / h_line;
    const double go = (u_old[i + 1] - u_old[i]) / h_line;
    d += e2h * (gn * gn - go * go);
  }
  for (int i = 0; i < n; ++i) {
    if (has_prev) {
      const double gn = (u_new[i] - frozen_prev(i)) / h_trans;
      const double go = (u_old[i] - frozen_prev(i)) / h_trans;
      d += e2h * (gn * gn - go * go);
    }
    if (has_next) {
      const double gn = (frozen_next(i) - u_new[i]) / h_trans;
      const double go = (frozen_next(i) - u_old[i]) / h_trans;
      d += e2h * (gn * gn - go * go);
    }
    d += p.potential.value(u_new[i]) - p.potential.value(u_old[i]);
  }
  return d;
}

}  // namespace detail

/// Step-1 inner solve: update row q (0-based) by x-direction upwind fluxes.
/// The chemical potential uses the full 2D Laplacian; rows q-1 (already
/// updated this step) and q+1 (still old) enter as frozen data.
inline SweepResult sweep_x(SplitState& state, int q, double xi_prev, const SchemeParams& p,
                           SweepWorkspace* ext = nullptr) {
  Field& f = state.phi;
  const Grid& g = f.grid();
  const int n = g.nx;
  SweepWorkspace local;
  SweepWorkspace& ws = ext ? *ext : local;
  ws.u_old.resize(n);
  ws.trans_diag.resize(n);
  ws.trans_off.resize(n);
  const double iy2 = 1.0 / (g.dy * g.dy);
  const bool has_prev = q > 0, has_next = q < g.ny - 1;
  const double diag = ((has_prev ? -1.0 : 0.0) + (has_next ? -1.0 : 0.0)) * iy2;
  for (int i = 0; i < n; ++i) {
    ws.u_old[i] = f(i, q);
    ws.trans_diag[i] = diag;
    ws.trans_off[i] =
        (has_prev ? f(i, q - 1) : 0.0) * iy2 + (has_next ? f(i, q + 1) : 0.0) * iy2;
  }

  LineContext ctx;
  ctx.n = n;
  ctx.h = g.dx;
  ctx.dt = p.dt;
  ctx.eps2 = p.epsilon * p.epsilon;
  ctx.potential = p.potential;
  ctx.mobility = p.mobility;
  ctx.u_old = ws.u_old;
  ctx.trans_diag = ws.trans_diag;
  ctx.trans_off = ws.trans_off;
  ws.lws.cache_old(ctx);

  RowSystem sys = make_row_system(ctx, ws.lws);
  RowSolution sol = solve_row(sys, ws.u_old, xi_prev, p.newton);
  detail::certify_sweep_line(sol.phi, p);

  SweepResult res;
  res.xi = sol.xi;
  res.stats = sol.stats;
  res.denergy = g.dx * g.dy *
                detail::line_energy_delta(
                    sol.phi, ws.u_old, [&](int i) { return f(i, q - 1); },
                    [&](int i) { return f(i, q + 1); }, has_prev, has_next, g.dx, g.dy, p);
  if (p.per_sweep_energy_check && res.denergy > p.cert_tol(g.cells()))
    throw CertificateViolation(Certificate::Energy, res.denergy,
                               "x-sweep energy increased past tolerance");
  for (int i = 0; i < n; ++i) f(i, q) = sol.phi[i];
  state.xi_tilde[static_cast<size_t>(q)] = res.xi;
  return res;
}

/// Step-2 inner solve: mirror of sweep_x along column p with dy spacing.
inline SweepResult sweep_y(SplitState& state, int pcol, double xi_prev, const SchemeParams& p,
                           SweepWorkspace* ext = nullptr) {
  Field& f = state.phi;
  const Grid& g = f.grid();
  const int n = g.ny;
  SweepWorkspace local;
  SweepWorkspace& ws = ext ? *ext : local;
  ws.u_old.resize(n);
  ws.trans_diag.resize(n);
  ws.trans_off.resize(n);
  const double ix2 = 1.0 / (g.dx * g.dx);
  const bool has_prev = pcol > 0, has_next = pcol < g.nx - 1;
  const double diag = ((has_prev ? -1.0 : 0.0) + (has_next ? -1.0 : 0.0)) * ix2;
  for (int j = 0; j < n; ++j) {
    ws.u_old[j] = f(pcol, j);
    ws.trans_diag[j] = diag;
    ws.trans_off[j] =
        (has_prev ? f(pcol - 1, j) : 0.0) * ix2 + (has_next ? f(pcol + 1, j) : 0.0) * ix2;
  }

  LineContext ctx;
  ctx.n = n;
  ctx.h = g.dy;
  ctx.dt = p.dt;
  ctx.eps2 = p.epsilon * p.epsilon;
  ctx.potential = p.potential;
  ctx.mobility = p.mobility;
  ctx.u_old = ws.u_old;
  ctx.trans_diag = ws.trans_diag;
  ctx.trans_off = ws.trans_off;
  ws.lws.cache_old(ctx);

  RowSystem sys = make_row_system(ctx, ws.lws);
  RowSolution sol = solve_row(sys, ws.u_old, xi_prev, p.newton);
  detail::certify_sweep_line(sol.phi, p);

  SweepResult res;
  res.xi = sol.xi;
  res.stats = sol.stats;
  res.denergy = g.dx * g.dy *
                detail::line_energy_delta(
                    sol.phi, ws.u_old, [&](int j) { return f(pcol - 1, j); },
                    [&](int j) { return f(pcol + 1, j); }, has_prev, has_next, g.dy, g.dx, p);
  if (p.per_sweep_energy_check && res.denergy > p.cert_tol(g.cells()))
    throw CertificateViolation(Certificate::Energy, res.denergy,
                               "y-sweep energy increased past tolerance");
  for (int j = 0; j < n; ++j) f(pcol, j) = sol.phi[j];
  state.xi_hat[static_cast<size_t>(pcol)] = res.xi;
  return res;
}

/// One split 2D step: all x-direction row solves in order, then all
/// y-direction column solves, multiplier averaged over every inner solve.
/// Certified per outer step for bound, mass and energy; per-sweep energy
/// checks are on by default (SchemeParams::per_sweep_energy_check).
inline StepResult step_2d(const Field& phi_old, double xi_old, const SchemeParams& p) {
  p.validate();
  detail::check_admissible_start(phi_old, p.mobility);
  const Grid& g = phi_old.grid();
  if (g.dim != 2) throw ParameterError("step_2d: requires a 2D field");

  SplitState state(phi_old);
  SweepWorkspace ws;
  const double e_old = discrete_energy(phi_old, p);
  double e_trace = e_old;
  StepResult out;
  out.sweep_energies.reserve(static_cast<size_t>(g.nx + g.ny));

  SolveStats agg;
  agg.converged = true;
  agg.final_residual = 0.0;
  double xi_chain = xi_old;
  auto run_sweep = [&](bool xdir, int idx) {
    SweepResult r;
    try {
      r = xdir ? sweep_x(state, idx, xi_chain, p, &ws) : sweep_y(state, idx, xi_chain, p, &ws);
    } catch (NoConvergence& e) {
      throw NoConvergence(std::string(xdir ? "x-sweep " : "y-sweep ") + std::to_string(idx) +
                              ": " + e.what(),
                          e.best_phi, e.best_xi, e.stats);
    }
    xi_chain = r.xi;
    agg.iterations += r.stats.iterations;
    agg.halvings_total += r.stats.halvings_total;
    agg.final_residual = std::max(agg.final_residual, r.stats.final_residual);
    agg.constraint_gap = std::max(agg.constraint_gap, r.stats.constraint_gap);
    agg.converged = agg.converged && r.stats.converged;
    e_trace += r.denergy;
    out.sweep_energies.push_back(e_trace);
  };
  for (int q = 0; q < g.ny; ++q) run_sweep(true, q);
  for (int pc = 0; pc < g.nx; ++pc) run_sweep(false, pc);

  const double xi_new =
      (std::accumulate(state.xi_tilde.begin(), state.xi_tilde.end(), 0.0) +
       std::accumulate(state.xi_hat.begin(), state.xi_hat.end(), 0.0)) /
      static_cast<double>(g.nx + g.ny);

  const double e_new = discrete_energy(state.phi, p);
  detail::certify_step(state.phi, phi_old, e_new, e_old, p);
  out.phi = std::move(state.phi);
  out.xi = xi_new;
  out.stats = agg;
  return out;
}

}  // namespace chsav
