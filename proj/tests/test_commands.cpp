#include "doctest.h"

#include "kfp/commands.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <sys/wait.h>

using namespace kfp;
namespace fs = std::filesystem;

namespace {

const std::string kSmall =
    "model.alpha = 1.5\nmodel.kind = exp\nmodel.beta = 0.5\n"
    "grid.L = 10\ngrid.v_max = 10\ngrid.Nx = 16\ngrid.Nv = 16\n"
    "diagnostics.snapshot_cadence = 4\ndiagnostics.cadence = 2\n";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("kfp_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

nlohmann::json manifest(const fs::path& dir) {
  return nlohmann::json::parse(slurp(dir / "manifest.json"));
}

CommandOptions to(const fs::path& dir) {
  CommandOptions o;
  o.output_dir = dir.string();
  return o;
}

// Every file in the directory except the manifest is listed in it, and
// nothing else is.
void check_manifest_complete(const fs::path& dir) {
  const auto m = manifest(dir);
  std::vector<std::string> listed = m["files"].get<std::vector<std::string>>();
  std::sort(listed.begin(), listed.end());
  std::vector<std::string> present;
  for (const auto& [rel, _] : tree(dir))
    if (rel != "manifest.json") present.push_back(rel);
  CHECK(listed == present);
}

}  // namespace

TEST_CASE("simulate writes outputs and a manifest") {
  TempDir dir("simulate");
  std::ostringstream out, err;
  const RunConfig config = parse_config(kSmall + "diagnostics.reference = profile\n");
  REQUIRE(cmd_simulate(config, to(dir.path / "a"), out, err) == kExitOk);
  const fs::path a = dir.path / "a";
  CHECK(fs::exists(a / "diagnostics.csv"));
  CHECK(fs::exists(a / "l1_series.csv"));
  CHECK(fs::exists(a / "checkpoint.bin"));
  CHECK(fs::exists(a / "snapshots" / "snapshot_00000000.csv"));
  CHECK(fs::exists(a / "density" / "density_00000000.csv"));
  check_manifest_complete(a);
  const auto m = manifest(a);
  CHECK(m["command"] == "simulate");
  CHECK(m["status"] == "ok");
  CHECK(m["version"] == version_string());
  CHECK(parse_config(m["config"].get<std::string>()) == config);
  CHECK(m.contains("wall_time_seconds"));

  SUBCASE("reruns are byte-identical apart from wall time") {
    std::ostringstream o2, e2;
    REQUIRE(cmd_simulate(config, to(dir.path / "b"), o2, e2) == kExitOk);
    auto ta = tree(a);
    auto tb = tree(dir.path / "b");
    auto ma = nlohmann::json::parse(ta["manifest.json"]);
    auto mb = nlohmann::json::parse(tb["manifest.json"]);
    ta.erase("manifest.json");
    tb.erase("manifest.json");
    CHECK(ta == tb);
    ma.erase("wall_time_seconds");
    mb.erase("wall_time_seconds");
    CHECK(ma == mb);
  }

  SUBCASE("resume from a raw snapshot reproduces the final state") {
    const RunConfig raw = parse_config(kSmall + "output.snapshot_format = raw\n");
    std::ostringstream o2, e2;
    REQUIRE(cmd_simulate(raw, to(dir.path / "full"), o2, e2) == kExitOk);
    CommandOptions resume = to(dir.path / "resumed");
    resume.resume = (dir.path / "full" / "snapshots" / "snapshot_00000008.bin").string();
    REQUIRE(cmd_simulate(raw, resume, o2, e2) == kExitOk);
    CHECK(slurp(dir.path / "resumed" / "checkpoint.bin") == slurp(dir.path / "full" / "checkpoint.bin"));
    CHECK(manifest(dir.path / "resumed")["details"]["start_step"] == 8);

    CommandOptions wrong = to(dir.path / "wrong");
    wrong.resume = (a / "snapshots" / "snapshot_00000000.csv").string();
    CHECK_THROWS(cmd_simulate(raw, wrong, o2, e2));
  }
}

TEST_CASE("simulate with t_final = 0 writes the initial snapshot only") {
  TempDir dir("t0");
  std::ostringstream out, err;
  const RunConfig config = parse_config(kSmall + "time.t_final = 0\n");
  REQUIRE(cmd_simulate(config, to(dir.path), out, err) == kExitOk);
  int snapshots = 0;
  for (const auto& e : fs::directory_iterator(dir.path / "snapshots")) {
    CHECK(e.path().filename() == "snapshot_00000000.csv");
    ++snapshots;
  }
  CHECK(snapshots == 1);
  check_manifest_complete(dir.path);
}

TEST_CASE("simulate aborts on non-finite values with exit 3") {
  TempDir dir("abort");
  const RunConfig base = parse_config(kSmall);
  Field bad = default_initial_condition(base.grid());
  bad(4, 4) = std::numeric_limits<double>::infinity();
  write_checkpoint((dir.path / "bad.bin").string(), bad, 0);
  const RunConfig config =
      parse_config(kSmall + "initial.preset = file\ninitial.file = " + (dir.path / "bad.bin").string() + "\n");
  std::ostringstream out, err;
  CHECK(cmd_simulate(config, to(dir.path / "out"), out, err) == kExitNumerical);
  CHECK(manifest(dir.path / "out")["status"] == "numerical-abort");
}

TEST_CASE("verify-lyapunov exit codes") {
  TempDir dir("verify");
  const std::string base = kSmall + "lyapunov.scan.samples = 64\n";
  std::ostringstream out, err;

  SUBCASE("admissible spec passes") {
    const RunConfig c = parse_config(base +
                                     "lyapunov.eps = 0.05\nlyapunov.A = 1\nlyapunov.B = 0.95\n"
                                     "lyapunov.theta = 0.25\nlyapunov.delta = 0.01\n");
    CHECK(cmd_verify_lyapunov(c, to(dir.path), out, err) == kExitOk);
    CHECK(out.str().rfind("PASS", 0) == 0);
    const std::string cert = slurp(dir.path / "certificate.txt");
    CHECK(cert.find("passed = true") != std::string::npos);
    check_manifest_complete(dir.path);
  }

  SUBCASE("eps = 0 fails on the x-axis") {
    const RunConfig c = parse_config(base + "lyapunov.eps = 0\n");
    CHECK(cmd_verify_lyapunov(c, to(dir.path), out, err) == kExitVerifyFail);
    CHECK(out.str().rfind("FAIL", 0) == 0);
    const std::string cert = slurp(dir.path / "certificate.txt");
    CHECK(cert.find("worst_point.v = 0.0000000000000000e+00") != std::string::npos);
  }

  SUBCASE("invalid spec is a usage error") {
    try {
      parse_config(base + "lyapunov.ell = 0.5\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.violations().front() == "lyapunov.ell: ell must exceed 1");
    }
    RunConfig c = parse_config(base);
    c.ell = 0.5;
    CHECK(cmd_verify_lyapunov(c, to(dir.path), out, err) == kExitUsage);
  }
}

TEST_CASE("fit-rate") {
  TempDir dir("fit");
  const RunConfig config = parse_config(kSmall + "diagnostics.rate_theta = 0.5\n");
  std::ostringstream out, err;
  CommandOptions o = to(dir.path / "out");

  CHECK(cmd_fit_rate(config, o, out, err) == kExitUsage);

  {
    std::ofstream s(dir.path / "exact.csv");
    s << "t,distance\n";
    for (int i = 0; i < 100; ++i) {
      const double t = 0.5 * i;
      s << format_real(t) << ',' << format_real(std::exp(1.0 - 0.3 * std::sqrt(t))) << '\n';
    }
  }
  o.series = (dir.path / "exact.csv").string();
  REQUIRE(cmd_fit_rate(config, o, out, err) == kExitOk);
  const std::string summary = slurp(dir.path / "out" / "rate_fit.txt");
  const auto pos = summary.find("lambda = ");
  REQUIRE(pos != std::string::npos);
  CHECK(std::abs(std::stod(summary.substr(pos + 9)) - 0.3) < 1e-6);

  std::ofstream(dir.path / "empty.csv") << "t,distance\n";
  o.series = (dir.path / "empty.csv").string();
  CHECK(cmd_fit_rate(config, o, out, err) == kExitUsage);

  std::ofstream(dir.path / "bad.csv") << "t,distance\n0,1\n1,oops\n2,0.5\n";
  o.series = (dir.path / "bad.csv").string();
  std::ostringstream bad_err;
  CHECK(cmd_fit_rate(config, o, out, bad_err) == kExitUsage);
  CHECK(bad_err.str().find("line 3") != std::string::npos);

  o.series = (dir.path / "missing.csv").string();
  CHECK(cmd_fit_rate(config, o, out, err) == kExitUsage);
}

TEST_CASE("steady-state and export-reference") {
  TempDir dir("steady");
  std::ostringstream out, err;
  const RunConfig config = parse_config(
      "model.alpha = 1.5\nmodel.kind = exp\nmodel.beta = 0.5\n"
      "grid.L = 8\ngrid.v_max = 8\ngrid.Nx = 16\ngrid.Nv = 16\n"
      "diagnostics.steady_tol = 1e-6\ndiagnostics.tail_x_lo = 3\ndiagnostics.tail_x_hi = 7\n");
  REQUIRE(cmd_steady_state(config, to(dir.path / "ss"), out, err) == kExitOk);
  for (const char* f : {"steady_state.bin", "density.csv", "energy_scatter.csv", "steady_state.txt"})
    CHECK(fs::exists(dir.path / "ss" / f));
  check_manifest_complete(dir.path / "ss");
  const Checkpoint c = read_checkpoint((dir.path / "ss" / "steady_state.bin").string());
  CHECK(c.field.grid() == config.grid());

  const RunConfig tight = parse_config(serialize_config(config) + "\n");
  RunConfig hopeless = tight;
  hopeless.steady_tol = 1e-15;
  hopeless.steady_max_steps = 100;
  CHECK(cmd_steady_state(hopeless, to(dir.path / "ss2"), out, err) == kExitNumerical);

  REQUIRE(cmd_export_reference(config, to(dir.path / "ref"), out, err) == kExitOk);
  const Checkpoint r = read_checkpoint((dir.path / "ref" / "reference.bin").string());
  CHECK(mass(r.field) == doctest::Approx(1.0).epsilon(1e-13));
  check_manifest_complete(dir.path / "ref");

  const RunConfig poly = parse_config("model.alpha = 2\nmodel.kind = poly\nmodel.gamma = 2\n");
  CHECK(cmd_export_reference(poly, to(dir.path / "ref2"), out, err) == kExitUsage);
}

#ifdef KFP_CLI_PATH
TEST_CASE("command line exit codes") {
  TempDir dir("cli");
  const fs::path cfg = dir.path / "run.cfg";
  std::ofstream(cfg) << kSmall << "time.t_final = 0\n";
  const fs::path bad = dir.path / "bad.cfg";
  std::ofstream(bad) << "model.alpha = 0.9\nmodel.kind = exp\nmodel.beta = 0.5\n";
  auto status = [&](const std::string& args) {
    const std::string cmd = std::string(KFP_CLI_PATH) + " " + args + " > " +
                            (dir.path / "log.txt").string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
  };
  const std::string out = " --output " + (dir.path / "o").string();
  CHECK(status("simulate --config " + cfg.string() + out) == 0);
  CHECK(status("simulate --config " + bad.string() + out) == 1);
  CHECK(slurp(dir.path / "log.txt").find("alpha must exceed 1") != std::string::npos);
  CHECK(status("simulate" + out) == 1);
  CHECK(status("frobnicate --config " + cfg.string()) == 1);
  CHECK(status("fit-rate --config " + cfg.string() + out) == 1);
  CHECK(status("--version") == 0);
  const fs::path bad_spec = dir.path / "spec.cfg";
  std::ofstream(bad_spec) << kSmall << "lyapunov.ell = 0.5\n";
  CHECK(status("verify-lyapunov --config " + bad_spec.string() + out) == 1);
}
#endif
