#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "chsav/mobility.hpp"
#include "chsav/newton.hpp"
#include "chsav/params.hpp"
#include "chsav/potential.hpp"

namespace chsav {

/// One implicit backward-Euler update along a grid line (the whole field in 1D,
/// one row or column in 2D). Unknowns are the n line cells plus the multiplier.
///
/// The Laplacian seen by the chemical potential is the line stencil
///   interior (u[i-1] - 2 u[i] + u[i+1]) / h^2, one-sided at the line ends,
/// plus a frozen transverse part trans_diag[i]*u[i] + trans_off[i] coming from
/// the neighbouring lines (empty spans in 1D). Boundary faces carry zero flux.
struct LineContext {
  int n = 0;
  double h = 0.0;
  double dt = 0.0;
  double eps2 = 0.0;
  PotentialSpec potential;
  MobilitySpec mobility;
  std::span<const double> u_old;
  std::span<const double> trans_diag;
  std::span<const double> trans_off;
};

struct LineWorkspace {
  std::vector<double> lap, fval, fp, fpp, mu, vel, flux, fold;

  void resize(int n) {
    lap.resize(n);
    fval.resize(n);
    fp.resize(n);
    fpp.resize(n);
    mu.resize(n);
    vel.assign(std::max(0, n - 1), 0.0);
    flux.assign(n + 1, 0.0);
    fold.resize(n);
  }

  /// Cache F(u_old); the constraint row needs it at every residual evaluation.
  void cache_old(const LineContext& ctx) {
    resize(ctx.n);
    for (int i = 0; i < ctx.n; ++i) fold[i] = ctx.potential.value(ctx.u_old[i]);
  }
};

namespace detail {

inline void line_laplacian(const LineContext& ctx, std::span<const double> u,
                           std::span<double> lap) {
  const int n = ctx.n;
  const double ih2 = 1.0 / (ctx.h * ctx.h);
  lap[0] = (u[1] - u[0]) * ih2;
  for (int i = 1; i < n - 1; ++i) lap[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * ih2;
  lap[n - 1] = (-u[n - 1] + u[n - 2]) * ih2;
  if (!ctx.trans_diag.empty())
    for (int i = 0; i < n; ++i) lap[i] += ctx.trans_diag[i] * u[i] + ctx.trans_off[i];
}

}  // namespace detail

/// Residual (size n+1) and optional analytic Jacobian of the line system at
/// (u, xi). Rows 0..n-1 are the cell updates, row n the multiplier constraint.
inline void line_eval(const LineContext& ctx, LineWorkspace& ws, std::span<const double> u,
                      double xi, std::span<double> r, BorderedBandJacobian* jac) {
  const int n = ctx.n;
  const double h = ctx.h;
  const double c = ctx.dt / h;
  const auto& pot = ctx.potential;
  const auto& mob = ctx.mobility;

  detail::line_laplacian(ctx, u, ws.lap);
  for (int i = 0; i < n; ++i) {
    ws.fval[i] = pot.value(u[i]);
    ws.fp[i] = pot.derivative(u[i]);
    ws.fpp[i] = pot.second_derivative(u[i]);
    ws.mu[i] = -ctx.eps2 * ws.lap[i] + xi * ws.fp[i];
  }
  ws.flux[0] = 0.0;
  ws.flux[n] = 0.0;
  for (int g = 1; g < n; ++g) {
    const int a = g - 1, b = g;
    const double v = -(ws.mu[b] - ws.mu[a]) / h;
    ws.vel[a] = v;
    const auto [vp, vm] = split_sign(v);
    ws.flux[g] = vp * mobility_pair(mob, u[a], u[b]) + vm * mobility_pair(mob, u[b], u[a]);
  }
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    r[i] = u[i] - ctx.u_old[i] + c * (ws.flux[i + 1] - ws.flux[i]);
    s1 += ws.fval[i] - ws.fold[i];
    s2 += ws.fp[i] * (u[i] - ctx.u_old[i]);
  }
  r[n] = s1 - xi * s2;

  if (!jac) return;

  jac->resize(n, 2, 2);
  const double ih2 = 1.0 / (h * h);
  const double mu_off = -ctx.eps2 * ih2;  // d mu_i / d u_{i +- 1}
  auto mu_dc = [&](int i) {
    const double lap_diag = (i == 0 || i == n - 1) ? -ih2 : -2.0 * ih2;
    const double tr = ctx.trans_diag.empty() ? 0.0 : ctx.trans_diag[i];
    return -ctx.eps2 * (lap_diag + tr) + xi * ws.fpp[i];
  };

  auto& band = jac->band;
  for (int i = 0; i < n; ++i) band.at(i, i) = 1.0;

  for (int g = 1; g < n; ++g) {
    const int a = g - 1, b = g;
    const double v = ws.vel[a];
    const auto [vp, vm] = split_sign(v);
    const double ma = mobility_pair(mob, u[a], u[b]);
    const double mb = mobility_pair(mob, u[b], u[a]);
    // dJ/dV with the semismooth convention: indicator 0 exactly at the kink.
    const double dj_dv = (v > 0.0 ? ma : 0.0) + (v < 0.0 ? mb : 0.0);

    // dV/du_m across the four coupled cells.
    double dv[4] = {0.0, 0.0, 0.0, 0.0};  // m = a-1, a, b, b+1
    if (a > 0) dv[0] = mu_off / h;
    dv[1] = -(mu_off - mu_dc(a)) / h;
    dv[2] = -(mu_dc(b) - mu_off) / h;
    if (b < n - 1) dv[3] = -mu_off / h;
    const double dv_dxi = -(ws.fp[b] - ws.fp[a]) / h;

    double dj[4];
    for (int t = 0; t < 4; ++t) dj[t] = dj_dv * dv[t];
    dj[1] += vp * mobility_pair_d1(mob, u[a], u[b]) + vm * mobility_pair_d2(mob, u[b], u[a]);
    dj[2] += vp * mobility_pair_d2(mob, u[a], u[b]) + vm * mobility_pair_d1(mob, u[b], u[a]);
    const double dj_dxi = dj_dv * dv_dxi;

    const int cols[4] = {a - 1, a, b, b + 1};
    for (int t = 0; t < 4; ++t) {
      const int m = cols[t];
      if (m < 0 || m >= n) continue;
      band.at(a, m) += c * dj[t];
      band.at(b, m) -= c * dj[t];
    }
    jac->xi_col[a] += c * dj_dxi;
    jac->xi_col[b] -= c * dj_dxi;
  }

  double dcon_xi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double du = u[i] - ctx.u_old[i];
    jac->con_row[i] = ws.fp[i] - xi * (ws.fpp[i] * du + ws.fp[i]);
    dcon_xi -= ws.fp[i] * du;
  }
  jac->con_xi = dcon_xi;
}

/// RowSystem view over a LineContext; ctx and ws must outlive the system.
/// Iterates are confined to the open unit interval for every potential: the
/// scheme's solutions provably live there, and for the polynomial potential
/// letting Newton wander into the clamped-mobility flatlands beyond +-1 only
/// creates spurious stagnation points (and bound-certificate violations at
/// large time steps).
inline RowSystem make_row_system(const LineContext& ctx, LineWorkspace& ws) {
  RowSystem sys;
  sys.n = ctx.n;
  sys.bound =
      ctx.potential.kind == PotentialKind::Logarithmic ? PotentialSpec::kLogGuard : 1.0;
  sys.eval = [&ctx, &ws](std::span<const double> u, double xi, std::span<double> r,
                         BorderedBandJacobian* jac) { line_eval(ctx, ws, u, xi, r, jac); };
  return sys;
}

}  // namespace chsav
