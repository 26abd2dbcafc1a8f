#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "chsav/grid.hpp"
#include "chsav/initializers.hpp"
#include "chsav/params.hpp"

namespace chsav {

struct InitialConfig {
  enum class Kind { Tanh, Random };
  Kind kind = Kind::Tanh;
  double lambda = 1.0 - 1e-4;
  ShapeSpec shape = Circle{0.5, 0.5, 0.25};
  double mean = 0.2;
  double amplitude = 0.05;
  uint64_t seed = 20240817;
};

struct OutputConfig {
  std::string csv_path = "run.csv";
  int snapshot_every = 2000;
  std::string snapshot_dir = "snapshots";
  bool snapshot_binary = false;
};

/// Complete description of one simulation run. The flat key = value config
/// grammar (INI-style [section] headers, '#' comments, repeated initial.shape
/// keys forming a union) maps one-to-one onto these fields.
struct RunConfig {
  Grid grid = Grid::box(64, 64, 0.0, 0.0, 1.0, 1.0);
  SchemeParams params;
  InitialConfig initial;
  double t_end = 1.0;
  OutputConfig output;

  void validate() const {
    params.validate();
    if (!(t_end > 0.0)) throw ConfigError("run.t_end must be > 0");
    if (output.snapshot_every < 1) throw ConfigError("output.snapshot_every must be >= 1");
    if (output.csv_path.empty()) throw ConfigError("output.csv must be set");
    if (initial.kind == InitialConfig::Kind::Tanh) initial.shape.validate();
  }

  Field build_initial() const {
    if (initial.kind == InitialConfig::Kind::Random)
      return random_field(grid, initial.mean, initial.amplitude, initial.seed);
    return tanh_profile(grid, initial.shape, params.epsilon, initial.lambda);
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') throw ConfigError("bad number for " + key + ": " + v);
  return x;
}

inline long parse_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') throw ConfigError("bad integer for " + key + ": " + v);
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": " + v);
}

inline PrimitiveShape parse_shape(const std::string& v) {
  std::istringstream in(v);
  std::string kind;
  in >> kind;
  auto need = [&](int count) {
    std::vector<double> xs(count);
    for (auto& x : xs)
      if (!(in >> x)) throw ConfigError("shape '" + v + "': expected numeric fields");
    std::string extra;
    if (in >> extra) throw ConfigError("shape '" + v + "': trailing fields");
    return xs;
  };
  if (kind == "circle") {
    auto a = need(3);
    return Circle{a[0], a[1], a[2]};
  }
  if (kind == "ellipse") {
    auto a = need(4);
    return Ellipse{a[0], a[1], a[2], a[3]};
  }
  if (kind == "rose") {
    auto a = need(2);
    return Rose{a[0], a[1]};
  }
  if (kind == "rectangle") {
    auto a = need(4);
    return Rectangle{a[0], a[1], a[2], a[3]};
  }
  throw ConfigError("unknown shape kind: " + kind);
}

// Raw grid fields arrive one key at a time; the Grid is rebuilt after each
// so later keys see a consistent object.
struct GridScratch {
  int dim = 2, nx = 64, ny = 64;
  double x0 = 0.0, y0 = 0.0, lx = 1.0, ly = 1.0;

  Grid build() const {
    if (dim == 1) return Grid::line(nx, x0, lx);
    if (dim == 2) return Grid::box(nx, ny, x0, y0, lx, ly);
    throw ConfigError("grid.dim must be 1 or 2");
  }
};

}  // namespace detail

/// Mutable parse state: RunConfig plus the raw grid fields.
class ConfigBuilder {
 public:
  ConfigBuilder() = default;
  explicit ConfigBuilder(const RunConfig& base) : cfg_(base) {
    grid_.dim = base.grid.dim;
    grid_.nx = base.grid.nx;
    grid_.ny = base.grid.ny;
    grid_.x0 = base.grid.x0;
    grid_.y0 = base.grid.y0;
    grid_.lx = base.grid.nx * base.grid.dx;
    grid_.ly = base.grid.ny * base.grid.dy;
    pot_kind_ = base.params.potential.kind;
    if (pot_kind_ == PotentialKind::Logarithmic) {
      theta_ = base.params.potential.theta;
      theta_c_ = base.params.potential.theta_c;
    }
  }

  /// Apply one dotted key. initial.shape appends to the union; assigning it
  /// after parsing started from a base config first clears the inherited list.
  void set(const std::string& key, const std::string& value) {
    using namespace detail;
    const std::string v = trim(value);
    if (key == "grid.dim") grid_.dim = static_cast<int>(parse_int(key, v));
    else if (key == "grid.nx") grid_.nx = static_cast<int>(parse_int(key, v));
    else if (key == "grid.ny") grid_.ny = static_cast<int>(parse_int(key, v));
    else if (key == "grid.x0") grid_.x0 = parse_double(key, v);
    else if (key == "grid.y0") grid_.y0 = parse_double(key, v);
    else if (key == "grid.lx") grid_.lx = parse_double(key, v);
    else if (key == "grid.ly") grid_.ly = parse_double(key, v);
    else if (key == "params.epsilon") cfg_.params.epsilon = parse_double(key, v);
    else if (key == "params.dt") cfg_.params.dt = parse_double(key, v);
    else if (key == "params.potential") {
      if (v == "logarithmic") pot_kind_ = PotentialKind::Logarithmic;
      else if (v == "polynomial") pot_kind_ = PotentialKind::Polynomial;
      else throw ConfigError("params.potential must be logarithmic or polynomial");
    } else if (key == "params.theta") theta_ = parse_double(key, v);
    else if (key == "params.theta_c") theta_c_ = parse_double(key, v);
    else if (key == "params.mobility_k")
      cfg_.params.mobility.k = static_cast<int>(parse_int(key, v));
    else if (key == "params.mobility_beta") cfg_.params.mobility.beta = parse_double(key, v);
    else if (key == "params.newton_tol") cfg_.params.newton.tol_residual = parse_double(key, v);
    else if (key == "params.newton_max_iter")
      cfg_.params.newton.max_iter = static_cast<int>(parse_int(key, v));
    else if (key == "params.newton_max_halvings")
      cfg_.params.newton.damping_max_halvings = static_cast<int>(parse_int(key, v));
    else if (key == "params.newton_fd_jacobian")
      cfg_.params.newton.fd_jacobian = parse_bool(key, v);
    else if (key == "initial.kind") {
      if (v == "tanh") cfg_.initial.kind = InitialConfig::Kind::Tanh;
      else if (v == "random") cfg_.initial.kind = InitialConfig::Kind::Random;
      else throw ConfigError("initial.kind must be tanh or random");
    } else if (key == "initial.lambda") cfg_.initial.lambda = parse_double(key, v);
    else if (key == "initial.shape") {
      if (!shapes_touched_) {
        cfg_.initial.shape.parts.clear();
        shapes_touched_ = true;
      }
      std::istringstream list(v);
      std::string one;
      while (std::getline(list, one, ';')) {
        one = trim(one);
        if (!one.empty()) cfg_.initial.shape.parts.push_back(parse_shape(one));
      }
    } else if (key == "initial.mean") cfg_.initial.mean = parse_double(key, v);
    else if (key == "initial.amplitude") cfg_.initial.amplitude = parse_double(key, v);
    else if (key == "initial.seed")
      cfg_.initial.seed = static_cast<uint64_t>(parse_int(key, v));
    else if (key == "run.t_end") cfg_.t_end = parse_double(key, v);
    else if (key == "output.csv") cfg_.output.csv_path = v;
    else if (key == "output.snapshot_every")
      cfg_.output.snapshot_every = static_cast<int>(parse_int(key, v));
    else if (key == "output.snapshot_dir") cfg_.output.snapshot_dir = v;
    else if (key == "output.snapshot_binary") cfg_.output.snapshot_binary = parse_bool(key, v);
    else if (key == "certify.per_sweep_energy")
      cfg_.params.per_sweep_energy_check = parse_bool(key, v);
    else throw ConfigError("unknown config key: " + key);
  }

  RunConfig finish() {
    cfg_.grid = grid_.build();
    if (pot_kind_ == PotentialKind::Logarithmic)
      cfg_.params.potential = PotentialSpec::logarithmic(theta_, theta_c_);
    else
      cfg_.params.potential = PotentialSpec::polynomial();
    cfg_.validate();
    return cfg_;
  }

 private:
  RunConfig cfg_;
  detail::GridScratch grid_;
  PotentialKind pot_kind_ = PotentialKind::Logarithmic;
  double theta_ = 0.3, theta_c_ = 1.0;
  bool shapes_touched_ = false;
};

/// Parse the INI-style text: [section] headers, key = value lines, '#' or ';'
/// comment lines, blank lines ignored.
inline RunConfig parse_config(std::istream& in) {
  ConfigBuilder b;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section");
      section = detail::trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any [section]");
    b.set(section + "." + key, value);
  }
  return b.finish();
}

inline RunConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

/// Apply `section.key=value` overrides (CLI --set) on top of a parsed config.
inline RunConfig apply_overrides(const RunConfig& base, const std::vector<std::string>& sets) {
  if (sets.empty()) return base;
  ConfigBuilder b(base);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
    b.set(detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  return b.finish();
}

namespace detail {

inline std::string shape_to_string(const PrimitiveShape& p) {
  char buf[160];
  if (const auto* c = std::get_if<Circle>(&p))
    std::snprintf(buf, sizeof buf, "circle %.17g %.17g %.17g", c->cx, c->cy, c->r);
  else if (const auto* e = std::get_if<Ellipse>(&p))
    std::snprintf(buf, sizeof buf, "ellipse %.17g %.17g %.17g %.17g", e->cx, e->cy, e->ra, e->rb);
  else if (const auto* r = std::get_if<Rose>(&p))
    std::snprintf(buf, sizeof buf, "rose %.17g %.17g", r->cx, r->cy);
  else if (const auto* rc = std::get_if<Rectangle>(&p))
    std::snprintf(buf, sizeof buf, "rectangle %.17g %.17g %.17g %.17g", rc->cx, rc->cy, rc->w,
                  rc->h);
  else
    buf[0] = '\0';
  return buf;
}

}  // namespace detail

/// Canonical config text; parse_config_string round-trips it.
inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  char buf[256];
  auto num = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
    out << buf;
  };
  out << "[grid]\n";
  out << "dim = " << c.grid.dim << "\n";
  out << "nx = " << c.grid.nx << "\n";
  if (c.grid.dim == 2) out << "ny = " << c.grid.ny << "\n";
  num("x0", c.grid.x0);
  if (c.grid.dim == 2) num("y0", c.grid.y0);
  num("lx", c.grid.nx * c.grid.dx);
  if (c.grid.dim == 2) num("ly", c.grid.ny * c.grid.dy);
  out << "\n[params]\n";
  num("epsilon", c.params.epsilon);
  num("dt", c.params.dt);
  const bool log = c.params.potential.kind == PotentialKind::Logarithmic;
  out << "potential = " << (log ? "logarithmic" : "polynomial") << "\n";
  if (log) {
    num("theta", c.params.potential.theta);
    num("theta_c", c.params.potential.theta_c);
  }
  out << "mobility_k = " << c.params.mobility.k << "\n";
  num("mobility_beta", c.params.mobility.beta);
  num("newton_tol", c.params.newton.tol_residual);
  out << "newton_max_iter = " << c.params.newton.max_iter << "\n";
  out << "\n[initial]\n";
  if (c.initial.kind == InitialConfig::Kind::Tanh) {
    out << "kind = tanh\n";
    num("lambda", c.initial.lambda);
    for (const auto& p : c.initial.shape.parts)
      out << "shape = " << detail::shape_to_string(p) << "\n";
  } else {
    out << "kind = random\n";
    num("mean", c.initial.mean);
    num("amplitude", c.initial.amplitude);
    out << "seed = " << c.initial.seed << "\n";
  }
  out << "\n[run]\n";
  num("t_end", c.t_end);
  out << "\n[output]\n";
  out << "csv = " << c.output.csv_path << "\n";
  out << "snapshot_every = " << c.output.snapshot_every << "\n";
  out << "snapshot_dir = " << c.output.snapshot_dir << "\n";
  out << "snapshot_binary = " << (c.output.snapshot_binary ? "true" : "false") << "\n";
  out << "\n[certify]\n";
  out << "per_sweep_energy = " << (c.params.per_sweep_energy_check ? "true" : "false") << "\n";
  return out.str();
}

/// Reconstructions of the reference experiments: 250x250 unit square,
/// dt = 1e-4, dx = dy = 0.004, eps = 0.02, theta_c = 1, M(phi) = 1 - phi^2.
/// Production solves run at newton_tol = 1e-9; tighten per run if wanted.
inline RunConfig recipe(const std::string& name) {
  RunConfig c;
  c.grid = Grid::box(250, 250, 0.0, 0.0, 1.0, 1.0);
  c.params.epsilon = 0.02;
  c.params.dt = 1e-4;
  c.params.potential = PotentialSpec::logarithmic(0.3, 1.0);
  c.params.mobility = MobilitySpec::make(1, 1.0);
  c.params.newton.tol_residual = 1e-9;
  c.initial.kind = InitialConfig::Kind::Tanh;
  c.initial.lambda = 1.0 - 1e-4;
  c.output.snapshot_every = 2000;

  if (name == "random") {
    c.initial.kind = InitialConfig::Kind::Random;
    c.initial.mean = 0.2;
    c.initial.amplitude = 0.05;
    c.initial.seed = 20240817;
    c.t_end = 1.0;
  } else if (name == "rose") {
    c.initial.shape = Rose{0.5, 0.5};
    c.t_end = 1.0;
  } else if (name == "two-circles") {
    c.initial.shape =
        ShapeSpec(std::vector<PrimitiveShape>{Circle{0.4, 0.4, 0.2}, Circle{0.75, 0.75, 0.1}});
    c.t_end = 2.0;
  } else if (name == "ellipse-circle") {
    c.initial.shape = ShapeSpec(std::vector<PrimitiveShape>{
        Ellipse{0.4, 0.4, std::sqrt(2.0) / 5.0, std::sqrt(2.0) / 10.0},
        Circle{0.75, 0.75, 0.1}});
    c.t_end = 3.0;
  } else if (name == "pinch-off") {
    // aspect ratio 20; absolute extents are a documented reconstruction
    c.initial.shape = Rectangle{0.5, 0.5, 0.8, 0.04};
    c.params.potential = PotentialSpec::logarithmic(0.2, 1.0);
    c.t_end = 6.0;
  } else {
    throw UnknownRecipe("unknown recipe: " + name + " (random, rose, two-circles, "
                        "ellipse-circle, pinch-off)");
  }
  c.output.csv_path = name + ".csv";
  c.output.snapshot_dir = name + "_snapshots";
  return c;
}

}  // namespace chsav
