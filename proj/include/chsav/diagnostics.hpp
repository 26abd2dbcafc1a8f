#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "chsav/grid.hpp"
#include "chsav/params.hpp"

namespace chsav {

/// Discrete free energy. 1D:
///   dx sum_{i<n-1} eps^2/2 ((phi_{i+1}-phi_i)/dx)^2 + dx sum_i F(phi_i)
/// 2D adds the y-difference sum and weights by dx*dy.
inline double discrete_energy(const Field& f, const SchemeParams& p) {
  const Grid& g = f.grid();
  const double e2 = p.epsilon * p.epsilon;
  double grad = 0.0, bulk = 0.0;
  if (g.dim == 1) {
    for (int i = 0; i + 1 < g.nx; ++i) {
      const double d = (f[i + 1] - f[i]) / g.dx;
      grad += 0.5 * e2 * d * d;
    }
    for (int i = 0; i < g.nx; ++i) bulk += p.potential.value(f[i]);
    return g.dx * grad + g.dx * bulk;
  }
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i) {
      const double d = (f(i + 1, j) - f(i, j)) / g.dx;
      grad += 0.5 * e2 * d * d;
    }
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double d = (f(i, j + 1) - f(i, j)) / g.dy;
      grad += 0.5 * e2 * d * d;
    }
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) bulk += p.potential.value(f(i, j));
  return g.dx * g.dy * (grad + bulk);
}

/// Cell-measure-weighted total: sum(phi) * dx (1D) or * dx*dy (2D).
/// Compensated summation keeps the value trustworthy on strongly cancelling
/// fields (the conservation certificates track this quantity across runs).
inline double total_mass(const Field& f) {
  double s = 0.0, c = 0.0;
  for (double x : f.values()) {
    const double y = x - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s * f.grid().cell_measure();
}

namespace detail {

// Area fraction of {affine >= 0} on a triangle with vertex values a, b, c.
// Vertices with value exactly 0 count as inside.
inline double triangle_inside_fraction(double a, double b, double c) {
  const bool pa = a >= 0.0, pb = b >= 0.0, pc = c >= 0.0;
  const int npos = int(pa) + int(pb) + int(pc);
  if (npos == 3) return 1.0;
  if (npos == 0) return 0.0;
  // Bring the minority vertex to v; f1, f2 are the two on the other side.
  double v, f1, f2;
  bool minority_inside;
  if (npos == 1) {
    minority_inside = true;
    if (pa) v = a, f1 = b, f2 = c;
    else if (pb) v = b, f1 = a, f2 = c;
    else v = c, f1 = a, f2 = b;
  } else {
    minority_inside = false;
    if (!pa) v = a, f1 = b, f2 = c;
    else if (!pb) v = b, f1 = a, f2 = c;
    else v = c, f1 = a, f2 = b;
  }
  const double t1 = v / (v - f1);
  const double t2 = v / (v - f2);
  const double corner = t1 * t2;
  return minority_inside ? corner : 1.0 - corner;
}

// Inside area of one dual rectangle, averaged over the two diagonal
// triangulations so the result is invariant under grid reflections.
inline double square_inside_area(double v00, double v10, double v01, double v11, double wx,
                                 double wy) {
  const double half = 0.5 * wx * wy;
  const double one = triangle_inside_fraction(v00, v10, v11) * half +
                     triangle_inside_fraction(v00, v11, v01) * half;
  const double two = triangle_inside_fraction(v10, v11, v01) * half +
                     triangle_inside_fraction(v10, v00, v01) * half;
  return 0.5 * (one + two);
}

// Dual-node positions along one axis: domain edges plus the cell centers.
// Boundary bands extend the nearest cell value (consistent with Neumann data).
inline std::vector<double> dual_positions(double origin, double spacing, int cells,
                                          double length) {
  std::vector<double> p(static_cast<size_t>(cells) + 2);
  p[0] = origin;
  for (int i = 0; i < cells; ++i) p[static_cast<size_t>(i) + 1] = origin + (i + 0.5) * spacing;
  p[static_cast<size_t>(cells) + 1] = origin + length;
  return p;
}

}  // namespace detail

struct AreaWindow {
  double x_lo, x_hi, y_lo, y_hi;
};

/// Area of the region {phi >= 0}: linear interpolation of the zero crossing on
/// the dual grid of cell centers, full contribution from squares entirely on
/// one side. Optional window restricts to dual squares fully inside the box.
inline double zero_contour_area(const Field& f, std::optional<AreaWindow> window = {}) {
  const Grid& g = f.grid();
  if (g.dim != 2) throw ParameterError("zero_contour_area: requires a 2D field");
  const auto px = detail::dual_positions(g.x0, g.dx, g.nx, g.nx * g.dx);
  const auto py = detail::dual_positions(g.y0, g.dy, g.ny, g.ny * g.dy);
  auto node = [&](int s, int t) {
    const int i = std::clamp(s - 1, 0, g.nx - 1);
    const int j = std::clamp(t - 1, 0, g.ny - 1);
    return f(i, j);
  };
  double area = 0.0;
  for (int t = 0; t <= g.ny; ++t) {
    const double wy = py[t + 1] - py[t];
    for (int s = 0; s <= g.nx; ++s) {
      const double wx = px[s + 1] - px[s];
      if (window) {
        if (px[s] < window->x_lo || px[s + 1] > window->x_hi || py[t] < window->y_lo ||
            py[t + 1] > window->y_hi)
          continue;
      }
      area += detail::square_inside_area(node(s, t), node(s + 1, t), node(s, t + 1),
                                         node(s + 1, t + 1), wx, wy);
    }
  }
  return area;
}

/// 1D counterpart: measure of {phi >= 0} with the same interpolation rule.
inline double zero_set_measure_1d(const Field& f) {
  const Grid& g = f.grid();
  if (g.dim != 1) throw ParameterError("zero_set_measure_1d: requires a 1D field");
  const auto px = detail::dual_positions(g.x0, g.dx, g.nx, g.nx * g.dx);
  auto node = [&](int s) { return f[std::clamp(s - 1, 0, g.nx - 1)]; };
  double len = 0.0;
  for (int s = 0; s <= g.nx; ++s) {
    const double w = px[s + 1] - px[s];
    const double a = node(s), b = node(s + 1);
    if (a >= 0.0 && b >= 0.0) {
      len += w;
    } else if (a >= 0.0 || b >= 0.0) {
      const double v = a >= 0.0 ? a : b;
      const double o = a >= 0.0 ? b : a;
      len += w * (v / (v - o));
    }
  }
  return len;
}

/// Connected components of {phi >= 0} under 4-connectivity.
inline int count_components(const Field& f) {
  const Grid& g = f.grid();
  const int nx = g.nx, ny = g.ny;
  std::vector<char> seen(static_cast<size_t>(nx) * ny, 0);
  std::vector<int> stack;
  int comps = 0;
  for (int start = 0; start < nx * ny; ++start) {
    if (seen[start] || f[start] < 0.0) continue;
    ++comps;
    stack.push_back(start);
    seen[start] = 1;
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      const int i = idx % nx, j = idx / nx;
      const int nbr[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
      for (auto& [ni, nj] : nbr) {
        if (ni < 0 || ni >= nx || nj < 0 || nj >= ny) continue;
        const int nidx = nj * nx + ni;
        if (!seen[nidx] && f[nidx] >= 0.0) {
          seen[nidx] = 1;
          stack.push_back(nidx);
        }
      }
    }
  }
  return comps;
}

struct DiagnosticsRecord {
  double t = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double phi_min = 0.0;
  double phi_max = 0.0;
  double xi = 1.0;
  double area = 0.0;
  double delta_s = 0.0;
};

inline DiagnosticsRecord record(double t, const Field& f, double xi, std::optional<double> s0,
                                const SchemeParams& p) {
  DiagnosticsRecord r;
  r.t = t;
  r.mass = total_mass(f);
  r.energy = discrete_energy(f, p);
  r.phi_min = f.min();
  r.phi_max = f.max();
  r.xi = xi;
  r.area = f.grid().dim == 2 ? zero_contour_area(f) : zero_set_measure_1d(f);
  r.delta_s = (s0 && *s0 != 0.0) ? (r.area - *s0) / *s0 : 0.0;
  return r;
}

}  // namespace chsav
