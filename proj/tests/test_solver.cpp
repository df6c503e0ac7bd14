#include "doctest.h"

#include "kfp/diagnostics.hpp"
#include "kfp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

using namespace kfp;

namespace {

const ModelParams kParams = ModelParams::exponential(1.5, 0.5);

double total(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

double max_abs(std::span<const double> values) {
  double m = 0.0;
  for (double x : values) m = std::max(m, std::abs(x));
  return m;
}

Field point_reflect(const Field& f) {
  const PhaseGrid& g = f.grid();
  Field r(g, f.time());
  for (int n = 0; n < g.nx(); ++n)
    for (int m = 0; m < g.nv(); ++m) r(n, m) = f(g.nx() - 1 - n, g.mirror_v(m));
  return r;
}

// Cell average of exp(-(x - c)^2 / (2 s^2)).
double gaussian_average(double a, double b, double c, double s) {
  const double k = s * std::sqrt(2.0);
  return s * std::sqrt(std::numbers::pi / 2.0) *
         (std::erf((b - c) / k) - std::erf((a - c) / k)) / (b - a);
}

// L1 error of transport alone on a Gaussian bump, against the exact shift.
double transport_error(int nx) {
  const PhaseGrid g(20.0, 2.0, nx, 2);  // v = -1, +1
  KineticSolver solver(g, kParams);
  Field f(g);
  const double s = 2.0;
  for (int n = 0; n < nx; ++n) {
    const double a = g.x(n) - 0.5 * g.dx();
    for (int m = 0; m < 2; ++m) f(n, m) = gaussian_average(a, a + g.dx(), 0.0, s);
  }
  const double t_end = 2.0;
  const double dt = 0.25 * g.dx();
  const int steps = static_cast<int>(std::lround(t_end / dt));
  std::vector<double> k1, k2;
  for (int k = 0; k < steps; ++k) {
    k1 = solver.transport_rhs(f);
    Field stage = f;
    for (std::size_t i = 0; i < g.size(); ++i) stage.values()[i] += dt * k1[i];
    k2 = solver.transport_rhs(stage);
    for (std::size_t i = 0; i < g.size(); ++i)
      f.values()[i] += 0.5 * dt * (k1[i] + k2[i]);
  }
  double err = 0.0;
  for (int n = 0; n < nx; ++n) {
    const double a = g.x(n) - 0.5 * g.dx();
    for (int m = 0; m < 2; ++m) {
      const double exact = gaussian_average(a, a + g.dx(), g.v(m) * t_end, s);
      err += std::abs(f(n, m) - exact) * g.cell_volume();
    }
  }
  return err;
}

}  // namespace

TEST_CASE("build_grid") {
  const auto g = build_grid(400.0, 400.0, 400, 400);
  CHECK(g.dx() == 2.0);
  CHECK(g.x(0) == -399.0);
  const auto two = build_grid(1.0, 1.0, 2, 2);
  CHECK(two.x(0) == -0.5);
  CHECK(two.x(1) == 0.5);
  const auto h = build_grid(50.0, 30.0, 128, 64);
  for (int n = 0; n < h.nx(); ++n) CHECK(h.x(n) == -h.x(h.nx() - 1 - n));
  for (int m = 0; m < h.nv(); ++m) CHECK(h.v(m) == -h.v(h.mirror_v(m)));
  CHECK_THROWS_AS(build_grid(1.0, 1.0, 3, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(1.0, 1.0, 2, 5), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(0.0, 1.0, 2, 2), std::invalid_argument);
}

TEST_CASE("default initial condition") {
  CHECK(initial_datum(0.0, 0.0) == 0.0625);
  CHECK(initial_datum(1.0, -2.0) == initial_datum(-1.0, 2.0));

  const auto g = build_grid(400.0, 400.0, 400, 400);
  const Field f0 = default_initial_condition(g);
  CHECK(std::abs(mass(f0) - 1.0) < 1e-3);
  CHECK(*std::min_element(f0.values().begin(), f0.values().end()) >= 0.0);
  for (int n = 0; n < g.nx(); n += 37)
    for (int m = 0; m < g.nv(); m += 41) CHECK(f0(n, m) == f0(g.nx() - 1 - n, g.mirror_v(m)));

  // Density of f0 is (1/4) e^{-|x|/2} up to cell averaging.
  const auto fine = build_grid(20.0, 60.0, 200, 600);
  const auto rho = density(default_initial_condition(fine));
  for (int n = 0; n < fine.nx(); n += 13) {
    const double x = fine.x(n);
    CHECK(rho[n] == doctest::Approx(0.25 * std::exp(-std::abs(x) / 2.0)).epsilon(2e-3));
  }
}

TEST_CASE("CFL bound") {
  const auto g = build_grid(400.0, 400.0, 400, 400);
  KineticSolver solver(g, kParams);
  const double bound = solver.cfl_timestep(1.0);
  CHECK(bound == doctest::Approx(0.005).epsilon(1e-14));
  CHECK(6.25e-4 <= bound);
  CHECK(solver.cfl_timestep(0.5) == doctest::Approx(0.5 * bound).epsilon(1e-15));

  SolverConfig config{kParams, g, 300.0, 6.25e-4, 1.0, 1000, 100, {}};
  const TimePlan plan = plan_time(config, solver);
  CHECK(plan.dt == doctest::Approx(6.25e-4).epsilon(1e-14));
  CHECK(plan.steps == 480000);

  KineticSolver wide(build_grid(400.0, 800.0, 400, 800), kParams);
  CHECK(wide.cfl_timestep(1.0) == doctest::Approx(0.5 * bound).epsilon(1e-14));

  config.dt = 0.01;
  CHECK_THROWS_AS(plan_time(config, solver), CflViolation);
}

TEST_CASE("transport operator") {
  const auto g = build_grid(10.0, 5.0, 32, 16);
  KineticSolver solver(g, kParams);

  SUBCASE("constant field has zero increment") {
    Field c(g);
    std::fill(c.values().begin(), c.values().end(), 0.7);
    CHECK(max_abs(solver.transport_rhs(c)) == 0.0);
  }

  SUBCASE("increments telescope to zero with specular walls") {
    const Field f0 = default_initial_condition(g);
    Field skew = f0;
    for (int n = 0; n < g.nx(); ++n)
      for (int m = 0; m < g.nv(); ++m) skew(n, m) *= 1.0 + 0.3 * std::sin(0.7 * n + 1.3 * m);
    for (const Field* f : std::initializer_list<const Field*>{&f0, &skew}) {
      const auto inc = solver.transport_rhs(*f);
      CHECK(std::abs(total(inc)) < 1e-15 * max_abs(inc) * g.size());
    }
  }

  SUBCASE("second order on a smooth bump") {
    const double e1 = transport_error(400);
    const double e2 = transport_error(800);
    const double e3 = transport_error(1600);
    MESSAGE("transport errors " << e1 << " " << e2 << " " << e3);
    CHECK(e1 / e2 >= 3.6);
    CHECK(e2 / e3 >= 3.6);
  }
}

TEST_CASE("Chang-Cooper weight") {
  CHECK(chang_cooper_weight(0.0) == 0.5);
  CHECK(chang_cooper_weight(1.0) == doctest::Approx(0.418023).epsilon(1e-6));
  CHECK(chang_cooper_weight(-1.0) == doctest::Approx(1.0 - chang_cooper_weight(1.0)).epsilon(1e-15));
  for (double w : {1e-6, -3e-5, 9e-5}) {
    CHECK(chang_cooper_weight(w) == doctest::Approx(0.5 - w / 12.0).epsilon(1e-14));
  }
  // Continuity across the series switch.
  CHECK(chang_cooper_weight(1e-4 * (1 - 1e-12)) ==
        doctest::Approx(chang_cooper_weight(1e-4 * (1 + 1e-12))).epsilon(1e-11));
  // 1 - w delta(w) = w / (e^w - 1), the form the stepper uses.
  for (double w : {-20.0, -2.0, -0.3, 0.5, 3.0, 15.0}) {
    CHECK(1.0 - w * chang_cooper_weight(w) == doctest::Approx(w / std::expm1(w)).epsilon(1e-12));
    CHECK(1.0 + w * (1.0 - chang_cooper_weight(w)) ==
          doctest::Approx(-w / std::expm1(-w)).epsilon(1e-12));
  }
}

TEST_CASE("velocity operator") {
  const auto g = build_grid(30.0, 20.0, 24, 40);
  KineticSolver solver(g, kParams);
  const Field f0 = default_initial_condition(g);

  SUBCASE("column sums vanish") {
    const auto inc = solver.velocity_rhs(f0);
    for (int n = 0; n < g.nx(); ++n) {
      double col = 0.0, scale = 0.0;
      for (int m = 0; m < g.nv(); ++m) {
        col += inc[g.index(n, m)];
        scale = std::max(scale, std::abs(inc[g.index(n, m)]));
      }
      CHECK(std::abs(col) <= 1e-15 * g.nv() * scale);
    }
  }

  SUBCASE("discrete equilibrium is a fixed point") {
    const Field eq = solver.discrete_equilibrium(&f0);
    const auto inc = solver.velocity_rhs(eq);
    double scale = 0.0;
    for (double x : eq.values()) scale = std::max(scale, x);
    CHECK(max_abs(inc) <= 1e-13 * scale / (g.dv() * g.dv()));
    for (int n = 0; n < g.nx(); ++n) {
      double a = 0.0, b = 0.0;
      for (int m = 0; m < g.nv(); ++m) {
        a += eq(n, m);
        b += f0(n, m);
      }
      CHECK(a == doctest::Approx(b).epsilon(1e-14));
    }
  }

  SUBCASE("face drift matches V' - (log M)'") {
    for (int n : {0, 5, 17}) {
      for (int m : {0, 11, 38}) {
        CHECK(solver.face_drift(n, m) ==
              doctest::Approx(grad_potential(g.x(n), kParams) -
                              equilibrium_drift(g.v_face(m), kParams))
                  .epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("strang step") {
  const auto g = build_grid(20.0, 20.0, 32, 32);
  KineticSolver solver(g, kParams);
  const Field f0 = default_initial_condition(g);
  const double dt = solver.cfl_timestep(0.5);

  CHECK(solver.strang_step(f0, 0.0) == f0);
  CHECK_THROWS_AS(solver.strang_step(f0, 1.01 * solver.cfl_timestep(1.0)), CflViolation);

  Field f = f0;
  const double m0 = mass(f);
  const double max0 = *std::max_element(f0.values().begin(), f0.values().end());
  for (int k = 0; k < 50; ++k) {
    const double before = mass(f);
    solver.strang_step(f, dt);
    CHECK(std::abs(mass(f) - before) <= 1e-13 * before);
  }
  CHECK(std::abs(mass(f) - m0) <= 1e-12 * m0);
  CHECK(*std::min_element(f.values().begin(), f.values().end()) >= 0.0);
  CHECK(*std::max_element(f.values().begin(), f.values().end()) <= max0 * (1.0 + 50 * dt));

  SUBCASE("point reflection commutes with a step") {
    Field a = f0;
    for (int n = 0; n < g.nx(); ++n)
      for (int m = 0; m < g.nv(); ++m) a(n, m) *= 1.0 + 0.5 * std::sin(0.3 * n) * std::cos(0.2 * m);
    Field b = point_reflect(a);
    solver.strang_step(a, dt);
    solver.strang_step(b, dt);
    const Field rb = point_reflect(b);
    for (std::size_t i = 0; i < g.size(); ++i)
      CHECK(a.values()[i] == doctest::Approx(rb.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("one step at the reference resolution") {
  const auto g = build_grid(400.0, 400.0, 400, 400);
  KineticSolver solver(g, kParams);
  Field f = default_initial_condition(g);
  const double m0 = mass(f);
  const double max0 = *std::max_element(f.values().begin(), f.values().end());
  solver.strang_step(f, 6.25e-4);
  CHECK(std::abs(mass(f) - m0) <= 1e-12);
  CHECK(std::abs(mass(f) - 1.0) < 1e-3);
  CHECK(*std::max_element(f.values().begin(), f.values().end()) <= max0 * (1.0 + 10 * 6.25e-4));
}

TEST_CASE("run orchestration") {
  const auto g = build_grid(16.0, 16.0, 24, 24);
  SolverConfig config{kParams, g, 0.0, std::nullopt, 0.5, 7, 3, {}};
  const Field f0 = default_initial_condition(g);

  SUBCASE("t_final = 0 returns the initial field") {
    int snapshots = 0;
    RunSinks sinks;
    sinks.on_snapshot = [&](const Field&, std::uint64_t step) {
      CHECK(step == 0);
      ++snapshots;
    };
    CHECK(run(config, f0, sinks) == f0);
    CHECK(snapshots == 1);
  }

  SUBCASE("sinks fire at cadence and at the last step") {
    config.t_final = 1.0;
    KineticSolver solver(g, kParams);
    const TimePlan plan = plan_time(config, solver);
    std::vector<std::uint64_t> diag;
    RunSinks sinks;
    sinks.on_diagnostics = [&](const Field& f, std::uint64_t step) {
      diag.push_back(step);
      CHECK(f.time() == doctest::Approx(static_cast<double>(step) * plan.dt).epsilon(1e-14));
    };
    const Field end = run(config, f0, sinks);
    CHECK(end.time() == doctest::Approx(1.0).epsilon(1e-15));
    REQUIRE(!diag.empty());
    CHECK(diag.front() == 0);
    CHECK(diag.back() == plan.steps);
    for (std::size_t i = 1; i + 1 < diag.size(); ++i) CHECK(diag[i] % 3 == 0);
  }

  SUBCASE("resume is bit-identical") {
    config.t_final = 2.0;
    const Field straight = run(config, f0);
    std::optional<Checkpoint> mid;
    RunSinks sinks;
    sinks.on_snapshot = [&](const Field& f, std::uint64_t step) {
      if (step == 21) mid = Checkpoint{f, step};
    };
    run(config, f0, sinks);
    REQUIRE(mid.has_value());
    const auto path = std::filesystem::temp_directory_path() / "kfp_test_resume.bin";
    write_checkpoint(path.string(), mid->field, mid->step);
    const Checkpoint back = read_checkpoint(path.string());
    std::filesystem::remove(path);
    CHECK(back.step == 21);
    CHECK(back.field == mid->field);
    const Field resumed = run(config, back.field, {}, back.step);
    CHECK(resumed == straight);
  }

  SUBCASE("non-finite values abort with the step index") {
    config.t_final = 1.0;
    // A NaN already present is caught before the first step.
    Field bad = f0;
    bad(3, 4) = std::numeric_limits<double>::quiet_NaN();
    try {
      run(config, bad);
      FAIL("expected NumericalAbort");
    } catch (const NumericalAbort& e) {
      CHECK(e.step() == 0);
    }
  }
}

TEST_CASE("checkpoint format") {
  const auto g = build_grid(3.0, 2.0, 4, 6);
  Field f(g, 1.25);
  for (std::size_t i = 0; i < g.size(); ++i) f.values()[i] = std::ldexp(1.0 + i / 7.0, -static_cast<int>(i));
  const auto path = std::filesystem::temp_directory_path() / "kfp_test_ckpt.bin";
  write_checkpoint(path.string(), f, 99);
  CHECK(std::filesystem::file_size(path) == 64 + 8 * g.size());
  const Checkpoint c = read_checkpoint(path.string());
  CHECK(c.step == 99);
  CHECK(c.field == f);
  {
    std::FILE* fp = std::fopen(path.string().c_str(), "r+b");
    std::fputc('X', fp);
    std::fclose(fp);
  }
  CHECK_THROWS_AS(read_checkpoint(path.string()), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("properties over many steps") {
  const auto g = build_grid(16.0, 16.0, 32, 32);
  KineticSolver solver(g, kParams);
  const double dt = solver.cfl_timestep(0.5);
  Field a = default_initial_condition(g);
  // Same mass, different shape.
  Field b(g);
  {
    double sum = 0.0;
    for (int n = 0; n < g.nx(); ++n)
      for (int m = 0; m < g.nv(); ++m) {
        b(n, m) = std::exp(-0.5 * std::pow(g.x(n) - 4.0, 2) - 0.5 * std::pow(g.v(m) + 1.0, 2));
        sum += b(n, m);
      }
    const double scale = mass(a) / (sum * g.cell_volume());
    for (double& x : b.values()) x *= scale;
  }
  const double m0 = mass(a);
  double dist = l1_distance(a, b);
  for (int k = 0; k < 2000; ++k) {
    solver.strang_step(a, dt);
    solver.strang_step(b, dt);
    const double next = l1_distance(a, b);
    CHECK(next <= dist + 1e-8);
    dist = next;
  }
  CHECK(std::abs(mass(a) - m0) < 1e-10 * m0);
  CHECK(*std::min_element(a.values().begin(), a.values().end()) >= 0.0);
  CHECK(*std::min_element(b.values().begin(), b.values().end()) >= 0.0);
  const Field ra = point_reflect(a);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - ra.values()[i]));
  CHECK(worst < 1e-8);
}

TEST_CASE("steady state reference") {
  SUBCASE("velocity-only problem relaxes to the discrete equilibrium") {
    const auto g = build_grid(10.0, 12.0, 8, 48);
    SolverOptions opts;
    opts.transport = false;
    opts.frozen_drift_x = 0.0;
    SolverConfig config{kParams, g, 1.0, std::nullopt, 0.5, 1000, 100, opts};
    const Field f0 = default_initial_condition(g);
    const auto result = steady_state_reference(config, f0, {1e-12, 100, 2'000'000});
    KineticSolver solver(g, kParams, opts);
    const Field eq = solver.discrete_equilibrium(&f0);
    CHECK(l1_distance(result.field, eq) < 1e-8);

    const auto again = steady_state_reference(config, eq, {1e-12, 100, 2'000'000});
    CHECK(again.steps == 100);
  }

  SUBCASE("full problem: fixed point, symmetry, failure") {
    const auto g = build_grid(8.0, 8.0, 16, 16);
    SolverConfig config{kParams, g, 1.0, std::nullopt, 0.5, 1000, 100, {}};
    const Field f0 = default_initial_condition(g);
    const auto gh = steady_state_reference(config, f0, {1e-9, 100, 5'000'000});
    CHECK(gh.rate < 1e-9);
    CHECK(std::abs(mass(gh.field) - mass(f0)) < 1e-10 * mass(f0));
    const Field r = point_reflect(gh.field);
    for (std::size_t i = 0; i < g.size(); ++i)
      CHECK(std::abs(gh.field.values()[i] - r.values()[i]) < 1e-6);

    const auto again = steady_state_reference(config, gh.field, {1e-9, 100, 5'000'000});
    CHECK(again.steps == 100);

    CHECK_THROWS_AS(steady_state_reference(config, f0, {1e-14, 10, 50}), SteadyStateNotReached);
  }
}
