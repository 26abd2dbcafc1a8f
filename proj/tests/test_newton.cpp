#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "chsav/newton.hpp"

using namespace chsav;

namespace {

// Affine system r = (x - c, xi - 1). Newton is exact in one step from any start.
RowSystem affine_system(const std::vector<double>& c) {
  RowSystem sys;
  const int n = static_cast<int>(c.size());
  sys.n = n;
  sys.eval = [c, n](std::span<const double> x, double xi, std::span<double> r,
                    BorderedBandJacobian* jac) {
    for (int i = 0; i < n; ++i) r[i] = x[i] - c[i];
    r[n] = xi - 1.0;
    if (jac) {
      jac->resize(n, 2, 2);
      for (int i = 0; i < n; ++i) jac->band.at(i, i) = 1.0;
      jac->con_xi = 1.0;
    }
  };
  return sys;
}

}  // namespace

TEST_CASE("affine system solves exactly from any start") {
  const std::vector<double> c = {0.3, -1.7, 42.0};
  auto sys = affine_system(c);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> start = {dist(rng), dist(rng), dist(rng)};
    auto sol = solve_row(sys, start, dist(rng), NewtonParams{});
    // one frozen-multiplier block solve plus one full Newton step, both exact
    CHECK(sol.stats.iterations <= 2);
    CHECK(sol.stats.converged);
    for (int i = 0; i < 3; ++i) CHECK(sol.phi[i] == Catch::Approx(c[i]).margin(1e-12));
    CHECK(sol.xi == Catch::Approx(1.0).margin(1e-12));
    CHECK(sol.stats.final_residual <= 1e-12);
  }
}

TEST_CASE("residual already below tolerance returns the multiplier convention") {
  auto sys = affine_system({0.5, 0.5});
  std::vector<double> start = {0.5, 0.5};
  // r = (0, 0, xi-1): start at xi = 1 so the whole residual vanishes.
  auto sol = solve_row(sys, start, 1.0, NewtonParams{});
  CHECK(sol.stats.iterations == 0);
  CHECK(sol.xi == 1.0);
  CHECK(sol.phi[0] == 0.5);
}

TEST_CASE("jacobian_fd is exact on affine residuals") {
  auto sys = affine_system({1.0, 2.0, 3.0, 4.0});
  std::vector<double> x = {0.1, 0.2, 0.3, 0.4};
  auto m = jacobian_fd(sys, x, 2.0);
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; j <= 4; ++j)
      CHECK(m(i, j) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-9));
}

TEST_CASE("damping keeps every accepted iterate strictly inside the bound") {
  // Root of x + 4x^3 = 0.9 is ~0.55; a full Newton step from 0 jumps to 0.9
  // with slope 1, which is fine, but from a crafted start the cubic makes the
  // un-damped step overshoot past the bound.
  RowSystem sys;
  sys.n = 1;
  sys.bound = 1.0;
  double worst_seen = 0.0;
  sys.eval = [&worst_seen](std::span<const double> x, double xi, std::span<double> r,
                           BorderedBandJacobian* jac) {
    r[0] = std::tan(1.4 * x[0]) - 1.0;  // root ~ 0.5645, steep walls near +-1.12
    r[1] = xi - 1.0;
    if (jac) {
      const double c = std::cos(1.4 * x[0]);
      jac->resize(1, 2, 2);
      jac->band.at(0, 0) = 1.4 / (c * c);
      jac->con_xi = 1.0;
      worst_seen = std::max(worst_seen, std::abs(x[0]));  // jac is evaluated at accepted iterates
    }
  };
  std::vector<double> start = {0.0};
  auto sol = solve_row(sys, start, 1.0, NewtonParams{});
  CHECK(sol.stats.converged);
  CHECK(std::abs(sol.phi[0]) < 1.0);
  CHECK(worst_seen < 1.0);
  CHECK(sol.phi[0] == Catch::Approx(std::atan(1.0) / 1.4).margin(1e-10));
}

TEST_CASE("rootless residual raises NoConvergence with the best iterate attached") {
  RowSystem sys;
  sys.n = 1;
  sys.bound = 2.0;  // exp(x) + 1 has no root and a nonsingular Jacobian on (-2, 2)
  sys.eval = [](std::span<const double> x, double xi, std::span<double> r,
                BorderedBandJacobian* jac) {
    r[0] = std::exp(x[0]) + 1.0;
    r[1] = xi - 1.0;
    if (jac) {
      jac->resize(1, 2, 2);
      jac->band.at(0, 0) = std::exp(x[0]);
      jac->con_xi = 1.0;
    }
  };
  NewtonParams np;
  np.max_iter = 8;
  std::vector<double> start = {1.0};
  try {
    solve_row(sys, start, 1.0, np);
    FAIL("expected NoConvergence");
  } catch (const NoConvergence& e) {
    CHECK(e.stats.iterations >= 8);  // all phases of the fallback strategy count
    CHECK_FALSE(e.stats.converged);
    CHECK(e.best_phi.size() == 1);
    CHECK(std::abs(e.best_phi[0]) < 2.0);
    CHECK(e.stats.final_residual >= 1.0);
  }
}

TEST_CASE("monotone residual on the convergence path") {
  // The damping rule only accepts norm-decreasing trials, so the final
  // residual cannot exceed the initial one when converged.
  RowSystem sys;
  sys.n = 2;
  sys.eval = [](std::span<const double> x, double xi, std::span<double> r,
                BorderedBandJacobian* jac) {
    r[0] = x[0] * x[0] * x[0] - 0.2;
    r[1] = x[1] + 0.4 * x[0] - 1.0;
    r[2] = xi * (1.0 + x[0] * x[0]) - 1.0;
    if (jac) {
      jac->resize(2, 2, 2);
      jac->band.at(0, 0) = 3.0 * x[0] * x[0];
      jac->band.at(1, 0) = 0.4;
      jac->band.at(1, 1) = 1.0;
      jac->con_row[0] = 2.0 * xi * x[0];
      jac->con_xi = 1.0 + x[0] * x[0];
    }
  };
  std::vector<double> start = {1.0, 0.0};
  std::vector<double> r0(3);
  sys.residual(start, 1.0, r0);
  const double initial = std::max({std::abs(r0[0]), std::abs(r0[1]), std::abs(r0[2])});
  auto sol = solve_row(sys, start, 1.0, NewtonParams{});
  CHECK(sol.stats.converged);
  CHECK(sol.stats.final_residual <= initial);
  CHECK(sol.phi[0] == Catch::Approx(std::cbrt(0.2)).margin(1e-10));
}

TEST_CASE("singular Jacobian is reported") {
  RowSystem sys;
  sys.n = 2;
  sys.eval = [](std::span<const double> x, double xi, std::span<double> r,
                BorderedBandJacobian* jac) {
    r[0] = x[0] + x[1] - 1.0;
    r[1] = x[0] + x[1] - 2.0;  // inconsistent with r[0]
    r[2] = xi;
    if (jac) {
      jac->resize(2, 2, 2);
      jac->band.at(0, 0) = 1.0;
      jac->band.at(0, 1) = 1.0;
      jac->band.at(1, 0) = 1.0;
      jac->band.at(1, 1) = 1.0;
      jac->con_xi = 1.0;
    }
  };
  std::vector<double> start = {0.0, 0.0};
  CHECK_THROWS_AS(solve_row(sys, start, 1.0, NewtonParams{}), SingularJacobian);
}

TEST_CASE("banded and dense paths agree on a bordered affine system") {
  // n = 20 exercises the bordered band elimination; the same system squeezed
  // through the fd path uses the dense LU.
  const int n = 20;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  linalg::Mat a(n);
  std::vector<double> xi_col(n), con_row(n), b(n + 1);
  for (int i = 0; i < n; ++i) {
    for (int j = std::max(0, i - 2); j <= std::min(n - 1, i + 2); ++j)
      a(i, j) = dist(rng) + (i == j ? 6.0 : 0.0);
    xi_col[i] = dist(rng);
    con_row[i] = dist(rng);
    b[i] = dist(rng);
  }
  const double con_xi = 4.0 + dist(rng);
  b[n] = dist(rng);

  RowSystem sys;
  sys.n = n;
  sys.eval = [&](std::span<const double> x, double xi, std::span<double> r,
                 BorderedBandJacobian* jac) {
    for (int i = 0; i < n; ++i) {
      double s = xi_col[i] * xi - b[i];
      for (int j = std::max(0, i - 2); j <= std::min(n - 1, i + 2); ++j) s += a(i, j) * x[j];
      r[i] = s;
    }
    double s = con_xi * xi - b[n];
    for (int j = 0; j < n; ++j) s += con_row[j] * x[j];
    r[n] = s;
    if (jac) {
      jac->resize(n, 2, 2);
      for (int i = 0; i < n; ++i)
        for (int j = std::max(0, i - 2); j <= std::min(n - 1, i + 2); ++j)
          jac->band.at(i, j) = a(i, j);
      jac->xi_col = xi_col;
      jac->con_row = con_row;
      jac->con_xi = con_xi;
    }
  };

  std::vector<double> start(n, 0.0);
  auto banded = solve_row(sys, start, 0.0, NewtonParams{});
  CHECK(banded.stats.iterations <= 2);

  NewtonParams fd;
  fd.fd_jacobian = true;
  fd.tol_residual = 1e-9;  // fd Jacobian of an affine map is still exact-ish
  auto dense = solve_row(sys, start, 0.0, fd);
  for (int i = 0; i < n; ++i) CHECK(banded.phi[i] == Catch::Approx(dense.phi[i]).margin(1e-8));
  CHECK(banded.xi == Catch::Approx(dense.xi).margin(1e-8));

  std::vector<double> res(n + 1);
  sys.residual(banded.phi, banded.xi, res);
  for (double v : res) CHECK(std::abs(v) < 1e-11);
}

TEST_CASE("parameter validation") {
  auto sys = affine_system({0.0});
  std::vector<double> start = {0.0};
  NewtonParams bad;
  bad.tol_residual = 0.0;
  CHECK_THROWS_AS(solve_row(sys, start, 1.0, bad), ParameterError);
  bad = NewtonParams{};
  bad.max_iter = 0;
  CHECK_THROWS_AS(solve_row(sys, start, 1.0, bad), ParameterError);

  sys.bound = 0.5;
  std::vector<double> outside = {0.7};
  CHECK_THROWS_AS(solve_row(sys, outside, 1.0, NewtonParams{}), ParameterError);
}
