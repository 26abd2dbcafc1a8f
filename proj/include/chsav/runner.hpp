#pragma once

#include <atomic>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "chsav/config.hpp"
#include "chsav/diagnostics.hpp"
#include "chsav/scheme2d.hpp"

namespace chsav {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitSolver = 3,
  kExitCertificate = 4,
};

namespace detail {

// CHSAV_OUT_DIR redirects every output path; relative paths land inside it.
inline std::string out_dir_prefixed(const std::string& path) {
  const char* dir = std::getenv("CHSAV_OUT_DIR");
  if (!dir || !*dir || path.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(dir) / p).string();
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_) throw IoError("cannot open CSV output: " + path);
    std::fputs("t,mass,energy,phi_min,phi_max,xi,area,delta_s\n", f_);
  }
  ~CsvWriter() {
    if (f_) std::fclose(f_);
  }
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const DiagnosticsRecord& r) {
    std::fprintf(f_, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.mass, r.energy,
                 r.phi_min, r.phi_max, r.xi, r.area, r.delta_s);
  }

 private:
  std::FILE* f_ = nullptr;
};

}  // namespace detail

/// Self-describing snapshot: one ASCII header line "nx ny dx dy t", then the
/// field values row-major, one grid row per line ("%.17g"). The binary
/// variant keeps the header line and stores the payload as little-endian
/// 64-bit floats.
inline void write_snapshot(const Field& f, double t, const std::string& path, bool binary) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::FILE* out = std::fopen(path.c_str(), "wb");
  if (!out) throw IoError("cannot open snapshot output: " + path);
  const Grid& g = f.grid();
  std::fprintf(out, "%d %d %.17g %.17g %.17g\n", g.nx, g.ny, g.dx, g.dy, t);
  if (binary) {
    std::fwrite(f.data(), sizeof(double), static_cast<size_t>(f.size()), out);
  } else {
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i)
        std::fprintf(out, "%.17g%c", f(i, j), i + 1 == g.nx ? '\n' : ' ');
    }
  }
  std::fclose(out);
}

struct Snapshot {
  Field field;
  double t = 0.0;
};

inline Snapshot read_snapshot(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open snapshot: " + path);
  int nx = 0, ny = 0;
  double dx = 0.0, dy = 0.0, t = 0.0;
  std::string header;
  std::getline(in, header);
  if (std::sscanf(header.c_str(), "%d %d %lf %lf %lf", &nx, &ny, &dx, &dy, &t) != 5)
    throw IoError("bad snapshot header in " + path);
  Grid g = ny > 1 ? Grid::box(nx, ny, 0.0, 0.0, nx * dx, ny * dy) : Grid::line(nx, 0.0, nx * dx);
  Snapshot s{Field(g), t};
  if (binary) {
    in.read(reinterpret_cast<char*>(s.field.data()),
            static_cast<std::streamsize>(sizeof(double) * s.field.size()));
    if (!in) throw IoError("truncated snapshot payload in " + path);
  } else {
    for (int idx = 0; idx < s.field.size(); ++idx)
      if (!(in >> s.field[idx])) throw IoError("truncated snapshot payload in " + path);
  }
  return s;
}

namespace detail {

inline void dump_failure(const RunConfig& cfg, const Field& f, double xi, double t, int step,
                         const std::string& what) {
  std::fprintf(stderr, "[chsav] run aborted at t=%.17g (step %d): %s\n", t, step, what.c_str());
  std::fprintf(stderr, "[chsav] xi=%.17g phi_min=%.17g phi_max=%.17g\n", xi, f.min(), f.max());
  const std::string dump =
      out_dir_prefixed(cfg.output.snapshot_dir.empty() ? "failure_dump.txt"
                                                       : cfg.output.snapshot_dir + "/failure_dump.txt");
  try {
    write_snapshot(f, t, dump, false);
    std::fprintf(stderr, "[chsav] state written to %s\n", dump.c_str());
  } catch (const IoError&) {
    std::fprintf(stderr, "[chsav] could not write the failure dump\n");
  }
}

}  // namespace detail

/// Advance the configured run from t = 0 to t_end, one DiagnosticsRecord row
/// per step (plus the initial row), snapshots on cadence. Returns a process
/// exit code; solver failures and certificate violations abort with a
/// diagnostic dump, they are never silently skipped.
inline int run(const RunConfig& cfg) {
  cfg.validate();
  const std::string csv_path = detail::out_dir_prefixed(cfg.output.csv_path);
  const std::string snap_dir = detail::out_dir_prefixed(cfg.output.snapshot_dir);

  Field phi = cfg.build_initial();
  double xi = 1.0;
  const long nsteps = std::lround(cfg.t_end / cfg.params.dt);
  if (nsteps < 1) throw ConfigError("t_end shorter than one time step");

  detail::CsvWriter csv(csv_path);
  auto snap_path = [&](long step) {
    char name[64];
    std::snprintf(name, sizeof name, "snap_%06ld.%s", step,
                  cfg.output.snapshot_binary ? "bin" : "txt");
    return snap_dir + "/" + name;
  };

  auto first = record(0.0, phi, xi, std::nullopt, cfg.params);
  const double s0 = first.area;
  csv.row(first);
  write_snapshot(phi, 0.0, snap_path(0), cfg.output.snapshot_binary);

  for (long step = 1; step <= nsteps; ++step) {
    const double t = static_cast<double>(step) * cfg.params.dt;
    try {
      StepResult res = cfg.grid.dim == 1 ? step_1d(phi, xi, cfg.params)
                                         : step_2d(phi, xi, cfg.params);
      phi = std::move(res.phi);
      xi = res.xi;
    } catch (const NoConvergence& e) {
      detail::dump_failure(cfg, phi, xi, t, static_cast<int>(step), e.what());
      std::fprintf(stderr, "[chsav] best residual %.3e after %d iterations\n",
                   e.stats.final_residual, e.stats.iterations);
      return kExitSolver;
    } catch (const SingularJacobian& e) {
      detail::dump_failure(cfg, phi, xi, t, static_cast<int>(step), e.what());
      return kExitSolver;
    } catch (const CertificateViolation& e) {
      detail::dump_failure(cfg, phi, xi, t, static_cast<int>(step), e.what());
      return kExitCertificate;
    }
    csv.row(record(t, phi, xi, s0, cfg.params));
    if (step % cfg.output.snapshot_every == 0 || step == nsteps)
      write_snapshot(phi, t, snap_path(step), cfg.output.snapshot_binary);
  }
  return kExitOk;
}

namespace detail {

inline std::string suffixed_path(const std::string& path, const std::string& suffix) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || path.find('/', dot) != std::string::npos)
    return path + suffix;
  return path.substr(0, dot) + suffix + path.substr(dot);
}

inline std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  return s;
}

}  // namespace detail

/// Independent runs over the listed values of one config key; each variant
/// gets suffixed output paths. jobs > 1 runs variants concurrently (the runs
/// share nothing). Returns the worst exit code.
inline int run_sweep(const RunConfig& base, const std::string& key,
                     const std::vector<std::string>& values, int jobs = 1) {
  if (values.empty()) throw ConfigError("sweep: no values given for " + key);
  std::vector<RunConfig> variants;
  for (const auto& v : values) {
    RunConfig c = apply_overrides(base, {key + "=" + v});
    const std::string tag = "_" + detail::sanitize(key) + "=" + detail::sanitize(v);
    c.output.csv_path = detail::suffixed_path(base.output.csv_path, tag);
    c.output.snapshot_dir = base.output.snapshot_dir + tag;
    variants.push_back(std::move(c));
  }
  std::vector<int> codes(variants.size(), 0);
  if (jobs <= 1) {
    for (size_t i = 0; i < variants.size(); ++i) codes[i] = run(variants[i]);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < variants.size(); i = next.fetch_add(1))
          codes[i] = run(variants[i]);
      });
    for (auto& th : pool) th.join();
  }
  int worst = kExitOk;
  for (int c : codes) worst = std::max(worst, c);
  return worst;
}

}  // namespace chsav
