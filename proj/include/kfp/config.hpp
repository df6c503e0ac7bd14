#pragma once

/// @file config.hpp
/// @brief Run configuration: flat `section.key = value` text.
///
/// Lines are `key = value`; `#` starts a comment, blank lines are ignored.
/// Every key except model.alpha and model.kind (plus model.beta or
/// model.gamma) has a default. Unknown and repeated keys are errors. The
/// full key list lives in README.md.

#include "kfp/diagnostics.hpp"
#include "kfp/grid.hpp"
#include "kfp/lyapunov_verify.hpp"
#include "kfp/model.hpp"
#include "kfp/solver.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kfp {

/// Carries every violation found, each prefixed with its key path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

enum class InitialSource { paper_default, file };
enum class ReferenceSource { none, profile, file };
enum class SnapshotFormat { csv, raw };

struct RunConfig {
  // model
  double alpha = 0.0;
  EquilibriumKind kind = EquilibriumKind::exponential;
  double shape = 0.0;  ///< beta or gamma
  int dim = 1;
  Regime regime = Regime::theorem;

  // grid
  double L = 50.0;
  double v_max = 50.0;
  int nx = 128;
  int nv = 128;

  // time
  double t_final = 1.0;
  std::optional<double> dt;  ///< empty = auto
  double cfl_safety = 0.5;

  // initial
  InitialSource initial = InitialSource::paper_default;
  std::string initial_file;

  // diagnostics
  std::uint64_t snapshot_cadence = 1000;
  std::uint64_t diagnostics_cadence = 100;
  ReferenceSource reference = ReferenceSource::none;
  std::string reference_file;
  double reference_delta = 1.15;
  bool weighted_l1 = false;
  RateMode rate_mode = RateMode::exp_theta;
  double rate_theta = 0.25;
  double rate_burn = 0.1;
  double tail_x_lo = 20.0;
  double tail_x_hi = 40.0;
  double steady_tol = 1e-8;
  std::uint64_t steady_window = 200;
  std::uint64_t steady_max_steps = 5'000'000;

  // lyapunov
  double ell = 2.0;
  double eps = 1e-3;
  double a_exp = 0.05;
  double b_exp = 0.95;
  bool exp_weight = true;
  double theta = 0.25;
  double delta = 1e-2;
  double k = 1.5;
  bool search = false;
  double scan_x = 50.0;
  double scan_v = 50.0;
  int scan_samples = 256;
  std::vector<double> scan_radii = ScanConfig{}.radii;
  double fd_step = 1e-4;
  double phi_scale = 0.0;

  // output
  std::string output_dir = "kfp-out";
  SnapshotFormat snapshot_format = SnapshotFormat::csv;

  bool operator==(const RunConfig&) const = default;

  ModelParams model_params() const;
  PhaseGrid grid() const;
  SolverConfig solver_config() const;
  LyapunovSpec lyapunov_spec() const;
  ScanConfig scan_config() const;
  SteadyStateOptions steady_state_options() const;
};

/// Parses and validates; throws ConfigError listing all violations.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Every key in a fixed order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

}  // namespace kfp
