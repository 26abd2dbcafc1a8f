#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "chsav/config.hpp"
#include "chsav/runner.hpp"
#include "chsav/scheme1d.hpp"

using namespace chsav;
namespace fs = std::filesystem;

namespace {

const char* kSample = R"(# sample configuration
[grid]
dim = 2
nx = 12
ny = 10
x0 = 0.0
y0 = 0.0
lx = 1.0
ly = 1.0

[params]
epsilon = 0.05
dt = 1e-4
potential = logarithmic
theta = 0.45
theta_c = 1.0
mobility_k = 2
newton_tol = 1e-11

[initial]
kind = tanh
lambda = 0.9
shape = circle 0.4 0.4 0.2
shape = circle 0.75 0.75 0.1

[run]
t_end = 0.001

[output]
csv = out/sample.csv
snapshot_every = 5
snapshot_dir = out/snaps

[certify]
per_sweep_energy = false
)";

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("chsav_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny_uniform_run(const fs::path& dir) {
  RunConfig c;
  c.grid = Grid::line(16, 0.0, 1.0);
  c.params.epsilon = 0.05;
  c.params.dt = 1e-4;
  c.params.potential = PotentialSpec::polynomial();
  c.initial.kind = InitialConfig::Kind::Random;
  c.initial.mean = 0.3;
  c.initial.amplitude = 0.0;
  c.t_end = 1e-3;
  c.output.csv_path = (dir / "uniform.csv").string();
  c.output.snapshot_dir = (dir / "snaps").string();
  c.output.snapshot_every = 5;
  return c;
}

}  // namespace

TEST_CASE("config text parses into the expected fields") {
  RunConfig c = parse_config_string(kSample);
  CHECK(c.grid.dim == 2);
  CHECK(c.grid.nx == 12);
  CHECK(c.grid.ny == 10);
  CHECK(c.params.epsilon == 0.05);
  CHECK(c.params.potential.kind == PotentialKind::Logarithmic);
  CHECK(c.params.potential.theta == 0.45);
  CHECK(c.params.mobility.k == 2);
  CHECK(c.params.newton.tol_residual == 1e-11);
  CHECK(c.initial.kind == InitialConfig::Kind::Tanh);
  CHECK(c.initial.lambda == 0.9);
  REQUIRE(c.initial.shape.parts.size() == 2);
  CHECK(std::get<Circle>(c.initial.shape.parts[1]).r == 0.1);
  CHECK(c.t_end == 0.001);
  CHECK(c.output.snapshot_every == 5);
  CHECK_FALSE(c.params.per_sweep_energy_check);
}

TEST_CASE("config errors are reported") {
  CHECK_THROWS_AS(parse_config_string("[grid]\nnx 12\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_string("nx = 12\n"), ConfigError);          // outside a section
  CHECK_THROWS_AS(parse_config_string("[grid\nnx = 12\n"), ConfigError);   // bad header
  CHECK_THROWS_AS(parse_config_string("[grid]\nnx = twelve\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_string("[grid]\nunknown = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_string("[initial]\nshape = blob 1 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_string("[initial]\nshape = circle 1 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_string("[run]\nt_end = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_string("[params]\npotential = cubic\n"), ConfigError);
}

TEST_CASE("overrides replace values and reset inherited shapes") {
  RunConfig base = parse_config_string(kSample);
  RunConfig c = apply_overrides(base, {"params.dt=5e-5", "params.potential=polynomial",
                                       "initial.shape=rose 0.5 0.5"});
  CHECK(c.params.dt == 5e-5);
  CHECK(c.params.potential.kind == PotentialKind::Polynomial);
  REQUIRE(c.initial.shape.parts.size() == 1);
  CHECK(std::holds_alternative<Rose>(c.initial.shape.parts[0]));

  RunConfig untouched = apply_overrides(base, {"params.dt=2e-4"});
  CHECK(untouched.initial.shape.parts.size() == 2);

  RunConfig unioned = apply_overrides(
      base, {"initial.shape=circle 0.2 0.2 0.1; rectangle 0.7 0.7 0.2 0.1"});
  CHECK(unioned.initial.shape.parts.size() == 2);
  CHECK(std::holds_alternative<Rectangle>(unioned.initial.shape.parts[1]));

  CHECK_THROWS_AS(apply_overrides(base, {"params.dt"}), ConfigError);
}

TEST_CASE("serialized configs round-trip") {
  for (const char* name : {"random", "rose", "two-circles", "ellipse-circle", "pinch-off"}) {
    RunConfig a = recipe(name);
    RunConfig b = parse_config_string(serialize_config(a));
    CHECK(b.grid.nx == a.grid.nx);
    CHECK(b.params.dt == a.params.dt);
    CHECK(b.params.epsilon == a.params.epsilon);
    CHECK(b.params.potential.kind == a.params.potential.kind);
    CHECK(b.params.potential.theta == a.params.potential.theta);
    CHECK(b.t_end == a.t_end);
    CHECK(b.initial.kind == a.initial.kind);
    CHECK(b.initial.shape.parts.size() == a.initial.shape.parts.size());
    CHECK(b.output.csv_path == a.output.csv_path);
  }
}

TEST_CASE("recipes reconstruct the reference experiments") {
  RunConfig two = recipe("two-circles");
  REQUIRE(two.initial.shape.parts.size() == 2);
  const auto& big = std::get<Circle>(two.initial.shape.parts[0]);
  const auto& small = std::get<Circle>(two.initial.shape.parts[1]);
  CHECK(big.cx == 0.4);
  CHECK(big.cy == 0.4);
  CHECK(big.r == 0.2);
  CHECK(small.cx == 0.75);
  CHECK(small.cy == 0.75);
  CHECK(small.r == 0.1);
  CHECK(two.t_end == 2.0);
  CHECK(two.params.dt == 1e-4);
  CHECK(two.params.epsilon == 0.02);
  CHECK(two.grid.dx == Catch::Approx(0.004));
  CHECK(two.params.mobility.k == 1);
  CHECK(two.params.mobility.beta == 1.0);
  CHECK(two.params.potential.theta_c == 1.0);

  RunConfig ell = recipe("ellipse-circle");
  const auto& e = std::get<Ellipse>(ell.initial.shape.parts[0]);
  CHECK(e.ra == Catch::Approx(std::sqrt(2.0) / 5.0));
  CHECK(e.rb == Catch::Approx(std::sqrt(2.0) / 10.0));
  // equal initial areas: pi ra rb = pi r^2 with r = 0.2
  CHECK(e.ra * e.rb == Catch::Approx(0.04));

  RunConfig rnd = recipe("random");
  CHECK(rnd.initial.kind == InitialConfig::Kind::Random);
  CHECK(rnd.initial.mean == 0.2);
  CHECK(rnd.initial.amplitude == 0.05);

  RunConfig pin = recipe("pinch-off");
  const auto& rect = std::get<Rectangle>(pin.initial.shape.parts[0]);
  CHECK(rect.w / rect.h == Catch::Approx(20.0));
  CHECK(pin.params.potential.theta == 0.2);

  RunConfig tuned = apply_overrides(recipe("random"), {"params.theta=0.5"});
  CHECK(tuned.params.potential.theta == 0.5);

  CHECK_THROWS_AS(recipe("banana"), UnknownRecipe);
}

TEST_CASE("uniform run writes constant diagnostics rows") {
  unsetenv("CHSAV_OUT_DIR");
  const fs::path dir = fresh_dir("uniform");
  RunConfig c = tiny_uniform_run(dir);
  REQUIRE(run(c) == kExitOk);

  std::ifstream csv(dir / "uniform.csv");
  REQUIRE(csv);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "t,mass,energy,phi_min,phi_max,xi,area,delta_s");
  std::vector<std::string> rows;
  for (std::string line; std::getline(csv, line);) rows.push_back(line);
  REQUIRE(rows.size() == 11);  // t=0 plus 10 steps
  // mass and energy fields stay bit-identical on a uniform field
  auto field = [](const std::string& row, int idx) {
    std::stringstream ss(row);
    std::string item;
    for (int k = 0; k <= idx; ++k) std::getline(ss, item, ',');
    return item;
  };
  for (const auto& row : rows) {
    CHECK(field(row, 1) == field(rows[0], 1));
    CHECK(field(row, 2) == field(rows[0], 2));
    CHECK(field(row, 7) == "0");
  }
  CHECK(fs::exists(dir / "snaps" / "snap_000000.txt"));
  CHECK(fs::exists(dir / "snaps" / "snap_000005.txt"));
  CHECK(fs::exists(dir / "snaps" / "snap_000010.txt"));
}

TEST_CASE("reruns are byte-identical") {
  unsetenv("CHSAV_OUT_DIR");
  const fs::path dir = fresh_dir("determinism");
  RunConfig c;
  c.grid = Grid::box(16, 16, 0.0, 0.0, 1.0, 1.0);
  c.params.epsilon = 0.1;
  c.params.dt = 1e-4;
  c.params.potential = PotentialSpec::logarithmic(0.45, 1.0);
  c.initial.kind = InitialConfig::Kind::Random;
  c.initial.seed = 99;
  c.t_end = 1e-3;
  c.output.snapshot_every = 10;

  c.output.csv_path = (dir / "a.csv").string();
  c.output.snapshot_dir = (dir / "a_snaps").string();
  REQUIRE(run(c) == kExitOk);
  c.output.csv_path = (dir / "b.csv").string();
  c.output.snapshot_dir = (dir / "b_snaps").string();
  REQUIRE(run(c) == kExitOk);

  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a_snaps/snap_000010.txt") == slurp(dir / "b_snaps/snap_000010.txt"));
}

TEST_CASE("snapshots round-trip in both formats") {
  unsetenv("CHSAV_OUT_DIR");
  const fs::path dir = fresh_dir("snapshots");
  Field f(Grid::box(5, 4, 0.0, 0.0, 1.0, 0.8));
  std::mt19937_64 rng(3);
  for (auto& v : f.values()) v = 2.0 * (double(rng() >> 11) * 0x1.0p-53) - 1.0;

  for (bool binary : {false, true}) {
    const std::string path = (dir / (binary ? "s.bin" : "s.txt")).string();
    write_snapshot(f, 0.125, path, binary);
    auto s = read_snapshot(path, binary);
    CHECK(s.t == 0.125);
    CHECK(s.field.grid().nx == 5);
    CHECK(s.field.grid().ny == 4);
    CHECK(s.field.grid().dy == Catch::Approx(0.2));
    for (int idx = 0; idx < f.size(); ++idx) CHECK(s.field[idx] == f[idx]);
  }
}

TEST_CASE("solver failure aborts the run with exit code 3") {
  unsetenv("CHSAV_OUT_DIR");
  const fs::path dir = fresh_dir("abort");
  RunConfig c;
  // rough random data with a wildly oversized step: the cell-update rows
  // themselves become unsolvable, so the run must abort, not continue
  c.grid = Grid::line(24, 0.0, 1.0);
  c.params.epsilon = 0.05;
  c.params.dt = 0.1;
  c.params.potential = PotentialSpec::logarithmic(0.3, 1.0);
  c.initial.kind = InitialConfig::Kind::Random;
  c.initial.mean = 0.0;
  c.initial.amplitude = 0.85;
  c.initial.seed = 7;
  c.t_end = 0.5;
  c.output.csv_path = (dir / "abort.csv").string();
  c.output.snapshot_dir = (dir / "snaps").string();
  CHECK(run(c) == kExitSolver);
  CHECK(fs::exists(dir / "snaps" / "failure_dump.txt"));
}

TEST_CASE("certificate violations are typed errors") {
  SchemeParams p;
  Field good(Grid::line(8, 0.0, 1.0), 0.2);
  Field bad(Grid::line(8, 0.0, 1.0), 0.2);
  bad[3] = 1.0;  // at the bound
  CHECK_THROWS_AS(
      chsav::detail::certify_step(bad, good, 0.0, 0.0, p), CertificateViolation);
  // mass drift beyond tolerance
  Field drifted(Grid::line(8, 0.0, 1.0), 0.2);
  drifted[0] = 0.3;
  try {
    chsav::detail::certify_step(drifted, good, 0.0, 0.0, p);
    FAIL("expected a mass violation");
  } catch (const CertificateViolation& e) {
    CHECK(e.which == Certificate::Mass);
    CHECK(e.magnitude == Catch::Approx(0.1));
  }
  // energy increase beyond tolerance
  CHECK_THROWS_AS(chsav::detail::certify_step(good, good, 1.0, 0.0, p), CertificateViolation);
}

TEST_CASE("sweep launches isolated variants") {
  unsetenv("CHSAV_OUT_DIR");
  const fs::path dir = fresh_dir("sweep");
  RunConfig c = tiny_uniform_run(dir);
  c.output.csv_path = (dir / "s.csv").string();
  REQUIRE(run_sweep(c, "params.dt", {"1e-4", "2e-4"}, 2) == kExitOk);
  CHECK(fs::exists(dir / "s_params.dt=1e-4.csv"));
  CHECK(fs::exists(dir / "s_params.dt=2e-4.csv"));
}

TEST_CASE("output directory override via environment") {
  const fs::path dir = fresh_dir("envdir");
  RunConfig c = tiny_uniform_run(dir);
  c.output.csv_path = "env.csv";
  c.output.snapshot_dir = "env_snaps";
  setenv("CHSAV_OUT_DIR", dir.c_str(), 1);
  REQUIRE(run(c) == kExitOk);
  unsetenv("CHSAV_OUT_DIR");
  CHECK(fs::exists(dir / "env.csv"));
  CHECK(fs::exists(dir / "env_snaps" / "snap_000000.txt"));
}

TEST_CASE("command line interface") {
  unsetenv("CHSAV_OUT_DIR");
  const fs::path dir = fresh_dir("cli");
  const std::string cli = CHSAV_CLI_PATH;

  auto shell = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " >" + (dir / "stdout.txt").string() + " 2>" +
                            (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };

  CHECK(shell("recipe two-circles --print") == 0);
  CHECK(slurp(dir / "stdout.txt").find("shape = circle") != std::string::npos);

  CHECK(shell("recipe banana") == 2);
  CHECK(shell("run /nonexistent.cfg") == 2);
  CHECK(shell("bogus-subcommand") == 2);

  RunConfig c = tiny_uniform_run(dir);
  c.output.csv_path = (dir / "cli.csv").string();
  {
    std::ofstream out(dir / "run.cfg");
    out << serialize_config(c);
  }
  CHECK(shell("run " + (dir / "run.cfg").string()) == 0);
  CHECK(fs::exists(dir / "cli.csv"));

  CHECK(shell("inspect " + (dir / "snaps" / "snap_000010.txt").string()) == 0);
  CHECK(slurp(dir / "stdout.txt").find("mass=") != std::string::npos);
}
