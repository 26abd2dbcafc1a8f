#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "chsav/errors.hpp"

namespace chsav {

/// Uniform cell-centered grid, 1D or 2D. Cell (i,j) (0-based) has center
/// (x0 + (i+1/2)*dx, y0 + (j+1/2)*dy).
struct Grid {
  int dim = 1;
  int nx = 0;
  int ny = 1;
  double dx = 0.0;
  double dy = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;

  static Grid line(int nx, double x0, double length) {
    if (nx < 2 || length <= 0.0) throw ParameterError("Grid::line: need nx >= 2 and length > 0");
    Grid g;
    g.dim = 1;
    g.nx = nx;
    g.ny = 1;
    g.dx = length / nx;
    g.dy = 1.0;
    g.x0 = x0;
    g.y0 = 0.0;
    return g;
  }

  static Grid box(int nx, int ny, double x0, double y0, double lx, double ly) {
    if (nx < 2 || ny < 2 || lx <= 0.0 || ly <= 0.0)
      throw ParameterError("Grid::box: need nx, ny >= 2 and positive extents");
    Grid g;
    g.dim = 2;
    g.nx = nx;
    g.ny = ny;
    g.dx = lx / nx;
    g.dy = ly / ny;
    g.x0 = x0;
    g.y0 = y0;
    return g;
  }

  int cells() const { return nx * ny; }
  double xc(int i) const { return x0 + (i + 0.5) * dx; }
  double yc(int j) const { return y0 + (j + 0.5) * dy; }
  double cell_measure() const { return dim == 1 ? dx : dx * dy; }

  bool operator==(const Grid&) const = default;
};

/// Cell averages of the phase variable on a Grid. Row-major: index (i,j) -> j*nx + i.
class Field {
 public:
  Field() = default;
  explicit Field(const Grid& g, double fill = 0.0) : grid_(g), v_(static_cast<size_t>(g.cells()), fill) {}

  const Grid& grid() const { return grid_; }
  int size() const { return static_cast<int>(v_.size()); }

  double& operator[](int idx) { return v_[static_cast<size_t>(idx)]; }
  double operator[](int idx) const { return v_[static_cast<size_t>(idx)]; }
  double& operator()(int i, int j = 0) { return v_[static_cast<size_t>(j) * grid_.nx + i]; }
  double operator()(int i, int j = 0) const { return v_[static_cast<size_t>(j) * grid_.nx + i]; }

  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }
  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  double min() const { return *std::min_element(v_.begin(), v_.end()); }
  double max() const { return *std::max_element(v_.begin(), v_.end()); }
  double sum() const {
    double s = 0.0;
    for (double x : v_) s += x;
    return s;
  }

  /// Strictly inside the mobility's degeneracy bound in every cell, all finite.
  bool admissible(double bound = 1.0) const {
    for (double x : v_) {
      if (!std::isfinite(x) || !(std::abs(x) < bound)) return false;
    }
    return true;
  }

 private:
  Grid grid_{};
  std::vector<double> v_;
};

}  // namespace chsav
