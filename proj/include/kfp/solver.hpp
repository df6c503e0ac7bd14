#pragma once

/// @file solver.hpp
/// @brief Finite-volume scheme for the d = 1 kinetic Fokker-Planck equation.
///
/// The generator is split into
///
///   transport:  d_t f = -v d_x f                      (Kurganov-Tadmor flux)
///   velocity:   d_t f = d_v (d_v f + D f),
///               D(x, v) = V'(x) - (d_v M / M)(v)      (Chang-Cooper flux)
///
/// and advanced by Strang splitting T(dt/2) V(dt) T(dt/2), each substep with
/// Heun's method. Walls are specular in x and zero-flux in v.

#include "kfp/grid.hpp"
#include "kfp/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kfp {

class CflViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared; `step` is the index of the offending step.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(std::uint64_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

class SteadyStateNotReached : public std::runtime_error {
 public:
  SteadyStateNotReached(double last_rate, const std::string& what)
      : std::runtime_error(what), last_rate_(last_rate) {}
  double last_rate() const { return last_rate_; }

 private:
  double last_rate_;
};

/// The reference datum (1/16) exp(-|x|/2 - |v|/2), pointwise.
double initial_datum(double x, double v);

/// Exact cell averages of initial_datum.
Field default_initial_condition(const PhaseGrid& grid);

/// Chang-Cooper weight 1/w - 1/(e^w - 1), with its series near w = 0.
double chang_cooper_weight(double w);

/// minmod(a, b): the smaller-magnitude argument when signs agree, else 0.
inline double minmod(double a, double b) {
  if (a > 0.0 && b > 0.0) return a < b ? a : b;
  if (a < 0.0 && b < 0.0) return a > b ? a : b;
  return 0.0;
}

struct SolverOptions {
  bool transport = true;
  /// Evaluate D at this x in every column instead of at the column centre.
  std::optional<double> frozen_drift_x;
};

/// Spatial operators and the split time step on one grid. The face
/// coefficients of the velocity operator are precomputed; the stepper keeps
/// scratch buffers, so one instance must not step two fields concurrently.
class KineticSolver {
 public:
  KineticSolver(PhaseGrid grid, ModelParams model, SolverOptions options = {});

  const PhaseGrid& grid() const { return grid_; }
  const ModelParams& model() const { return model_; }
  const SolverOptions& options() const { return options_; }

  /// D(x_n, v_{m+1/2}) at the interior v-faces of column n.
  double face_drift(int n, int m) const;
  double max_abs_drift() const { return max_abs_drift_; }

  /// safety * min(dx / v_max, dv^2 / 2, dv / max|D|).
  double cfl_timestep(double safety) const;

  std::vector<double> transport_rhs(const Field& f) const;
  std::vector<double> velocity_rhs(const Field& f) const;

  /// Per column, g_{m+1} / g_m = exp(-dv D_{m+1/2}), scaled so each column
  /// keeps the mass of `like` (or unit column sums when `like` is absent).
  Field discrete_equilibrium(const Field* like = nullptr) const;

  /// One Strang step. Throws CflViolation when dt exceeds the unit-safety
  /// bound.
  void strang_step(Field& f, double dt);
  Field strang_step(const Field& f, double dt);

 private:
  void transport_rhs_into(std::span<const double> f, std::span<double> out) const;
  void velocity_rhs_into(std::span<const double> f, std::span<double> out) const;
  template <typename Rhs>
  void heun(std::span<double> f, double h, Rhs&& rhs);

  PhaseGrid grid_;
  ModelParams model_;
  SolverOptions options_;
  // Flux through face m+1/2 of column n is up[i] f_{m+1} - down[i] f_m with
  // i = n * (nv - 1) + m; both already divided by dv^2.
  std::vector<double> up_;
  std::vector<double> down_;
  std::vector<double> face_drift_;
  double max_abs_drift_ = 0.0;

  mutable std::vector<double> ext_;
  mutable std::vector<double> slope_;
  std::vector<double> k1_;
  std::vector<double> stage_;
  std::vector<double> k2_;
};

// ---------------------------------------------------------------------------
// Orchestration

struct SolverConfig {
  ModelParams model;
  PhaseGrid grid;
  double t_final = 1.0;
  /// Explicit step; empty means derived from the CFL bound.
  std::optional<double> dt;
  double cfl_safety = 0.5;
  std::uint64_t snapshot_cadence = 1000;
  std::uint64_t diagnostics_cadence = 100;
  SolverOptions options;

  void validate() const;
};

struct TimePlan {
  double dt;
  std::uint64_t steps;
};

/// dt = t_final / N_t with N_t the smallest count keeping dt within the
/// requested (or CFL) step. Rejects an explicit dt above the CFL bound.
TimePlan plan_time(const SolverConfig& config, const KineticSolver& solver);

using FieldSink = std::function<void(const Field&, std::uint64_t step)>;

struct RunSinks {
  FieldSink on_snapshot;
  FieldSink on_diagnostics;
  /// Called after every step that completed with finite values.
  FieldSink on_step;
};

/// Advances `initial` (taken to be at step `start_step` of the plan) to
/// t_final. Sinks fire at step 0, at their cadence and at the last step.
/// Field time is step * dt, so resumed runs are bit-identical.
Field run(const SolverConfig& config, Field initial, const RunSinks& sinks = {},
          std::uint64_t start_step = 0);

struct SteadyStateOptions {
  double tol_rate = 1e-8;
  std::uint64_t window_steps = 200;
  std::uint64_t max_steps = 5'000'000;
};

struct SteadyStateResult {
  Field field;
  double rate;
  std::uint64_t steps;
};

/// Integrates until ||f(t + W) - f(t)||_1 / W < tol_rate for a window W.
SteadyStateResult steady_state_reference(const SolverConfig& config,
                                         Field initial,
                                         const SteadyStateOptions& options = {});

// ---------------------------------------------------------------------------
// Checkpoints: 64-byte little-endian header, then nx * nv doubles (x outer).

struct Checkpoint {
  Field field;
  std::uint64_t step;
};

void write_checkpoint(const std::string& path, const Field& field,
                      std::uint64_t step);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace kfp
