#pragma once

#include <cmath>
#include <random>
#include <variant>
#include <vector>

#include "chsav/grid.hpp"

namespace chsav {

struct Circle {
  double cx, cy, r;
};
struct Ellipse {
  double cx, cy, ra, rb;
};
/// Four-leaved curve rho(alpha) = (2 + cos 4alpha)/8 around (cx, cy).
struct Rose {
  double cx, cy;
};
struct Rectangle {
  double cx, cy, w, h;
};

using PrimitiveShape = std::variant<Circle, Ellipse, Rose, Rectangle>;

/// A shape or a union of shapes; the signed distance of a union is the max
/// over the members. Positive inside, negative outside.
struct ShapeSpec {
  std::vector<PrimitiveShape> parts;

  ShapeSpec() = default;
  ShapeSpec(Circle c) : parts{PrimitiveShape{c}} {}
  ShapeSpec(Ellipse e) : parts{PrimitiveShape{e}} {}
  ShapeSpec(Rose r) : parts{PrimitiveShape{r}} {}
  ShapeSpec(Rectangle r) : parts{PrimitiveShape{r}} {}
  explicit ShapeSpec(std::vector<PrimitiveShape> ps) : parts(std::move(ps)) {}

  void validate() const {
    if (parts.empty()) throw ParameterError("ShapeSpec: empty shape");
    for (const auto& pr : parts) {
      std::visit(
          [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Circle>) {
              if (!(s.r > 0.0)) throw ParameterError("Circle: radius must be > 0");
            } else if constexpr (std::is_same_v<T, Ellipse>) {
              if (!(s.ra > 0.0 && s.rb > 0.0))
                throw ParameterError("Ellipse: semi-axes must be > 0");
            } else if constexpr (std::is_same_v<T, Rectangle>) {
              if (!(s.w > 0.0 && s.h > 0.0)) throw ParameterError("Rectangle: extents must be > 0");
            }
          },
          pr);
    }
  }
};

namespace detail {

inline double rose_radius(double alpha) { return (2.0 + std::cos(4.0 * alpha)) / 8.0; }

constexpr int kBoundarySamples = 4096;

// Distance evaluator with boundary-sample tables for the curves that have no
// closed-form distance. Sampling error is far below the interface width the
// profiles resolve.
class SdfEvaluator {
 public:
  explicit SdfEvaluator(const ShapeSpec& spec) : spec_(spec) {
    spec_.validate();
    for (const auto& pr : spec_.parts) {
      std::vector<double> pts;
      if (const auto* e = std::get_if<Ellipse>(&pr)) {
        pts.reserve(2 * kBoundarySamples);
        for (int s = 0; s < kBoundarySamples; ++s) {
          const double t = 2.0 * M_PI * s / kBoundarySamples;
          pts.push_back(e->cx + e->ra * std::cos(t));
          pts.push_back(e->cy + e->rb * std::sin(t));
        }
      } else if (const auto* ro = std::get_if<Rose>(&pr)) {
        pts.reserve(2 * kBoundarySamples);
        for (int s = 0; s < kBoundarySamples; ++s) {
          const double t = 2.0 * M_PI * s / kBoundarySamples;
          const double rho = rose_radius(t);
          pts.push_back(ro->cx + rho * std::cos(t));
          pts.push_back(ro->cy + rho * std::sin(t));
        }
      }
      tables_.push_back(std::move(pts));
    }
  }

  double operator()(double x, double y) const {
    double best = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < spec_.parts.size(); ++k)
      best = std::max(best, part_distance(k, x, y));
    return best;
  }

 private:
  double part_distance(size_t k, double x, double y) const {
    const auto& pr = spec_.parts[k];
    if (const auto* c = std::get_if<Circle>(&pr))
      return c->r - std::hypot(x - c->cx, y - c->cy);
    if (const auto* rc = std::get_if<Rectangle>(&pr)) {
      const double qx = std::abs(x - rc->cx) - 0.5 * rc->w;
      const double qy = std::abs(y - rc->cy) - 0.5 * rc->h;
      const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
      const double inside = std::min(std::max(qx, qy), 0.0);
      return -(outside + inside);
    }
    // Sampled boundary: magnitude from the table, sign from the region test.
    const auto& pts = tables_[k];
    double d2 = std::numeric_limits<double>::infinity();
    for (size_t s = 0; s < pts.size(); s += 2) {
      const double dx = x - pts[s], dy = y - pts[s + 1];
      d2 = std::min(d2, dx * dx + dy * dy);
    }
    const double d = std::sqrt(d2);
    bool in = false;
    if (const auto* e = std::get_if<Ellipse>(&pr)) {
      const double u = (x - e->cx) / e->ra, v = (y - e->cy) / e->rb;
      in = u * u + v * v <= 1.0;
    } else if (const auto* ro = std::get_if<Rose>(&pr)) {
      const double dx = x - ro->cx, dy = y - ro->cy;
      in = std::hypot(dx, dy) <= rose_radius(std::atan2(dy, dx));
    }
    return in ? d : -d;
  }

  ShapeSpec spec_;
  std::vector<std::vector<double>> tables_;
};

inline void assert_admissible(const Field& f) {
  if (!f.admissible(1.0)) throw ParameterError("initializer produced an inadmissible field");
}

}  // namespace detail

/// Signed distance to the shape boundary, positive inside.
inline double signed_distance(const ShapeSpec& shape, double x, double y) {
  return detail::SdfEvaluator(shape)(x, y);
}

/// phi = lambda * tanh(dist(x, boundary) / (sqrt(2) eps)) at every cell center.
/// 1D grids evaluate the distance along the x-axis (at y = 0).
inline Field tanh_profile(const Grid& g, const ShapeSpec& shape, double epsilon, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ParameterError("tanh_profile: need 0 < lambda < 1");
  if (!(epsilon > 0.0)) throw ParameterError("tanh_profile: need epsilon > 0");
  detail::SdfEvaluator sdf(shape);
  const double scale = 1.0 / (std::sqrt(2.0) * epsilon);
  Field f(g);
  for (int j = 0; j < g.ny; ++j) {
    const double y = g.dim == 2 ? g.yc(j) : 0.0;
    for (int i = 0; i < g.nx; ++i) f(i, j) = lambda * std::tanh(sdf(g.xc(i), y) * scale);
  }
  detail::assert_admissible(f);
  return f;
}

/// phi = mean + amplitude * u with u i.i.d. uniform on [-1, 1] from a fixed
/// generator; the same seed reproduces the field bit for bit.
inline Field random_field(const Grid& g, double mean, double amplitude, uint64_t seed) {
  if (!(std::abs(mean) + amplitude < 1.0))
    throw ParameterError("random_field: need |mean| + amplitude < 1");
  if (amplitude < 0.0) throw ParameterError("random_field: amplitude must be >= 0");
  std::mt19937_64 rng(seed);
  Field f(g);
  for (auto& v : f.values()) {
    const double u01 = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
    v = mean + amplitude * (2.0 * u01 - 1.0);
  }
  detail::assert_admissible(f);
  return f;
}

}  // namespace chsav
