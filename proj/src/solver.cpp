#include "kfp/solver.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kfp {

namespace {

// int_a^b exp(-|s|/2) ds, accurate in the tails.
double abs_exp_segment(double a, double b) {
  if (a >= 0.0) return -2.0 * std::exp(-0.5 * a) * std::expm1(-0.5 * (b - a));
  if (b <= 0.0) return abs_exp_segment(-b, -a);
  return abs_exp_segment(0.0, -a) + abs_exp_segment(0.0, b);
}

// Bernoulli function w / (e^w - 1); equals 1 - w delta(w).
double bernoulli(double w) {
  if (w == 0.0) return 1.0;
  return w / std::expm1(w);
}

}  // namespace

double initial_datum(double x, double v) {
  return std::exp(-0.5 * std::abs(x) - 0.5 * std::abs(v)) / 16.0;
}

Field default_initial_condition(const PhaseGrid& grid) {
  std::vector<double> ax(grid.nx());
  std::vector<double> av(grid.nv());
  for (int n = 0; n < grid.nx(); ++n) {
    const double x = grid.x(n);
    ax[n] = abs_exp_segment(x - 0.5 * grid.dx(), x + 0.5 * grid.dx()) / grid.dx();
  }
  for (int m = 0; m < grid.nv(); ++m) {
    const double v = grid.v(m);
    av[m] = abs_exp_segment(v - 0.5 * grid.dv(), v + 0.5 * grid.dv()) / grid.dv();
  }
  Field f(grid);
  for (int n = 0; n < grid.nx(); ++n) {
    for (int m = 0; m < grid.nv(); ++m) f(n, m) = ax[n] * av[m] / 16.0;
  }
  return f;
}

double chang_cooper_weight(double w) {
  if (std::abs(w) < 1e-4) {
    const double w2 = w * w;
    return 0.5 - w / 12.0 + w * w2 / 720.0;
  }
  return 1.0 / w - 1.0 / std::expm1(w);
}

// ---------------------------------------------------------------------------

KineticSolver::KineticSolver(PhaseGrid grid, ModelParams model,
                             SolverOptions options)
    : grid_(grid), model_(model), options_(options) {
  if (model_.dim() != 1) {
    throw InvalidParameters("the finite-volume solver is one-dimensional");
  }
  const int nx = grid_.nx();
  const int nv = grid_.nv();
  const double dv = grid_.dv();
  const std::size_t faces = static_cast<std::size_t>(nx) * (nv - 1);
  up_.resize(faces);
  down_.resize(faces);
  face_drift_.resize(faces);

  std::vector<double> drift_m(nv - 1);
  for (int m = 0; m + 1 < nv; ++m) {
    drift_m[m] = equilibrium_drift(grid_.v_face(m), model_);
  }
  for (int n = 0; n < nx; ++n) {
    const double x = options_.frozen_drift_x.value_or(grid_.x(n));
    const double force = grad_potential(x, model_);
    for (int m = 0; m + 1 < nv; ++m) {
      const std::size_t i = static_cast<std::size_t>(n) * (nv - 1) + m;
      const double d = force - drift_m[m];
      const double w = dv * d;
      face_drift_[i] = d;
      up_[i] = bernoulli(-w) / (dv * dv);
      down_[i] = bernoulli(w) / (dv * dv);
      max_abs_drift_ = std::max(max_abs_drift_, std::abs(d));
    }
  }

  ext_.resize(static_cast<std::size_t>(nx + 4) * nv);
  slope_.resize(static_cast<std::size_t>(nx + 4) * nv);
  k1_.resize(grid_.size());
  stage_.resize(grid_.size());
  k2_.resize(grid_.size());
}

double KineticSolver::face_drift(int n, int m) const {
  return face_drift_[static_cast<std::size_t>(n) * (grid_.nv() - 1) + m];
}

double KineticSolver::cfl_timestep(double safety) const {
  if (!(safety > 0.0 && safety <= 1.0)) {
    throw std::invalid_argument("cfl_safety must lie in (0, 1]");
  }
  const double dx = grid_.dx();
  const double dv = grid_.dv();
  double bound = std::min(dx / grid_.v_max(), 0.5 * dv * dv);
  if (max_abs_drift_ > 0.0) bound = std::min(bound, dv / max_abs_drift_);
  return safety * bound;
}

void KineticSolver::transport_rhs_into(std::span<const double> f,
                                       std::span<double> out) const {
  const int nx = grid_.nx();
  const int nv = grid_.nv();
  const double inv_dx = 1.0 / grid_.dx();
  auto ext = [&](int j) { return ext_.data() + static_cast<std::size_t>(j) * nv; };
  auto slope = [&](int j) { return slope_.data() + static_cast<std::size_t>(j) * nv; };

  // Interior rows j = 2 .. nx+1, then two mirrored ghost rows per wall: the
  // ghost at velocity v_m is the interior cell at -v_m.
  std::copy(f.begin(), f.end(), ext(2));
  for (int m = 0; m < nv; ++m) {
    const int mm = grid_.mirror_v(m);
    ext(1)[m] = f[grid_.index(0, mm)];
    ext(0)[m] = f[grid_.index(1, mm)];
    ext(nx + 2)[m] = f[grid_.index(nx - 1, mm)];
    ext(nx + 3)[m] = f[grid_.index(nx - 2, mm)];
  }
  for (int j = 1; j <= nx + 2; ++j) {
    const double* lo = ext(j - 1);
    const double* c = ext(j);
    const double* hi = ext(j + 1);
    double* s = slope(j);
    for (int m = 0; m < nv; ++m) s[m] = minmod(c[m] - lo[m], hi[m] - c[m]);
  }

  // Kurganov-Tadmor flux with local speed |v| through the face between
  // extended rows j and j+1; cell n = j - 2 receives -(F_right - F_left)/dx.
  std::fill(out.begin(), out.end(), 0.0);
  for (int j = 1; j <= nx + 1; ++j) {
    const double* left = ext(j);
    const double* right = ext(j + 1);
    const double* sl = slope(j);
    const double* sr = slope(j + 1);
    const int n_left = j - 2;
    const int n_right = j - 1;
    for (int m = 0; m < nv; ++m) {
      const double v = grid_.v(m);
      const double fm = left[m] + 0.5 * sl[m];
      const double fp = right[m] - 0.5 * sr[m];
      const double flux = 0.5 * v * (fp + fm) - 0.5 * std::abs(v) * (fp - fm);
      if (n_left >= 0) out[grid_.index(n_left, m)] -= flux * inv_dx;
      if (n_right < nx) out[grid_.index(n_right, m)] += flux * inv_dx;
    }
  }
}

void KineticSolver::velocity_rhs_into(std::span<const double> f,
                                      std::span<double> out) const {
  const int nx = grid_.nx();
  const int nv = grid_.nv();
  std::fill(out.begin(), out.end(), 0.0);
  for (int n = 0; n < nx; ++n) {
    const double* col = f.data() + grid_.index(n, 0);
    double* dst = out.data() + grid_.index(n, 0);
    const double* up = up_.data() + static_cast<std::size_t>(n) * (nv - 1);
    const double* down = down_.data() + static_cast<std::size_t>(n) * (nv - 1);
    for (int m = 0; m + 1 < nv; ++m) {
      const double flux = up[m] * col[m + 1] - down[m] * col[m];
      dst[m] += flux;
      dst[m + 1] -= flux;
    }
  }
}

std::vector<double> KineticSolver::transport_rhs(const Field& f) const {
  if (!(f.grid() == grid_)) throw std::invalid_argument("grid mismatch");
  std::vector<double> out(grid_.size());
  transport_rhs_into(f.values(), out);
  return out;
}

std::vector<double> KineticSolver::velocity_rhs(const Field& f) const {
  if (!(f.grid() == grid_)) throw std::invalid_argument("grid mismatch");
  std::vector<double> out(grid_.size());
  velocity_rhs_into(f.values(), out);
  return out;
}

Field KineticSolver::discrete_equilibrium(const Field* like) const {
  const int nx = grid_.nx();
  const int nv = grid_.nv();
  const double dv = grid_.dv();
  Field g(grid_, like ? like->time() : 0.0);
  std::vector<double> log_g(nv);
  for (int n = 0; n < nx; ++n) {
    log_g[0] = 0.0;
    for (int m = 0; m + 1 < nv; ++m) {
      log_g[m + 1] = log_g[m] - dv * face_drift(n, m);
    }
    const double top = *std::max_element(log_g.begin(), log_g.end());
    double sum = 0.0;
    for (int m = 0; m < nv; ++m) {
      g(n, m) = std::exp(log_g[m] - top);
      sum += g(n, m);
    }
    double target = 1.0;
    if (like) {
      target = 0.0;
      for (int m = 0; m < nv; ++m) target += (*like)(n, m);
    }
    for (int m = 0; m < nv; ++m) g(n, m) *= target / sum;
  }
  return g;
}

template <typename Rhs>
void KineticSolver::heun(std::span<double> f, double h, Rhs&& rhs) {
  const std::size_t size = f.size();
  rhs(std::span<const double>(f), std::span<double>(k1_));
  for (std::size_t i = 0; i < size; ++i) stage_[i] = f[i] + h * k1_[i];
  rhs(std::span<const double>(stage_), std::span<double>(k2_));
  for (std::size_t i = 0; i < size; ++i) {
    f[i] = 0.5 * (f[i] + stage_[i] + h * k2_[i]);
  }
}

void KineticSolver::strang_step(Field& f, double dt) {
  if (!(f.grid() == grid_)) throw std::invalid_argument("grid mismatch");
  if (!(dt >= 0.0)) throw std::invalid_argument("time step must be >= 0");
  const double bound = cfl_timestep(1.0);
  if (dt > bound * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "time step " << dt << " exceeds the CFL bound " << bound;
    throw CflViolation(msg.str());
  }
  if (dt == 0.0) return;
  auto transport = [this](std::span<const double> in, std::span<double> out) {
    transport_rhs_into(in, out);
  };
  auto velocity = [this](std::span<const double> in, std::span<double> out) {
    velocity_rhs_into(in, out);
  };
  if (options_.transport) heun(f.values(), 0.5 * dt, transport);
  heun(f.values(), dt, velocity);
  if (options_.transport) heun(f.values(), 0.5 * dt, transport);
}

Field KineticSolver::strang_step(const Field& f, double dt) {
  Field out = f;
  strang_step(out, dt);
  return out;
}

// ---------------------------------------------------------------------------

void SolverConfig::validate() const {
  if (model.dim() != 1) throw InvalidParameters("solver requires dim = 1");
  if (!(t_final >= 0.0 && std::isfinite(t_final))) {
    throw InvalidParameters("t_final must be a finite nonnegative time");
  }
  if (dt && !(*dt > 0.0 && std::isfinite(*dt))) {
    throw InvalidParameters("dt must be positive");
  }
  if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) {
    throw InvalidParameters("cfl_safety must lie in (0, 1]");
  }
  if (snapshot_cadence == 0 || diagnostics_cadence == 0) {
    throw InvalidParameters("cadences must be positive step counts");
  }
}

TimePlan plan_time(const SolverConfig& config, const KineticSolver& solver) {
  config.validate();
  double target = solver.cfl_timestep(config.cfl_safety);
  if (config.dt) {
    const double bound = solver.cfl_timestep(1.0);
    if (*config.dt > bound * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "dt = " << *config.dt << " exceeds the CFL bound " << bound;
      throw CflViolation(msg.str());
    }
    target = *config.dt;
  }
  if (config.t_final == 0.0) return {target, 0};
  const auto steps =
      static_cast<std::uint64_t>(std::ceil(config.t_final / target - 1e-9));
  const std::uint64_t n = std::max<std::uint64_t>(steps, 1);
  return {config.t_final / static_cast<double>(n), n};
}

namespace {

void require_finite_field(const Field& f, std::uint64_t step) {
  for (double value : f.values()) {
    if (!std::isfinite(value)) {
      throw NumericalAbort(step, "non-finite value at step " + std::to_string(step));
    }
  }
}

}  // namespace

Field run(const SolverConfig& config, Field initial, const RunSinks& sinks,
          std::uint64_t start_step) {
  KineticSolver solver(config.grid, config.model, config.options);
  const TimePlan plan = plan_time(config, solver);
  if (!(initial.grid() == config.grid)) {
    throw std::invalid_argument("initial field does not live on the configured grid");
  }
  if (start_step > plan.steps) {
    throw std::invalid_argument("start step lies beyond the final step");
  }
  auto emit = [&](const Field& f, std::uint64_t step) {
    const bool last = step == plan.steps;
    if (sinks.on_snapshot && (last || step % config.snapshot_cadence == 0)) {
      sinks.on_snapshot(f, step);
    }
    if (sinks.on_diagnostics && (last || step % config.diagnostics_cadence == 0)) {
      sinks.on_diagnostics(f, step);
    }
  };

  Field f = std::move(initial);
  if (start_step == 0) {
    require_finite_field(f, 0);
    emit(f, 0);
  }
  for (std::uint64_t k = start_step + 1; k <= plan.steps; ++k) {
    solver.strang_step(f, plan.dt);
    f.set_time(k == plan.steps ? config.t_final : static_cast<double>(k) * plan.dt);
    require_finite_field(f, k);
    if (sinks.on_step) sinks.on_step(f, k);
    emit(f, k);
  }
  return f;
}

SteadyStateResult steady_state_reference(const SolverConfig& config,
                                         Field initial,
                                         const SteadyStateOptions& options) {
  config.validate();
  if (options.window_steps == 0) {
    throw std::invalid_argument("steady state window must hold at least one step");
  }
  KineticSolver solver(config.grid, config.model, config.options);
  double dt = solver.cfl_timestep(config.cfl_safety);
  if (config.dt) dt = *config.dt;
  const double window = dt * static_cast<double>(options.window_steps);
  const double cell = config.grid.cell_volume();

  Field f = std::move(initial);
  std::vector<double> previous(f.values().begin(), f.values().end());
  std::uint64_t steps = 0;
  double rate = std::numeric_limits<double>::infinity();
  while (steps < options.max_steps) {
    for (std::uint64_t k = 0; k < options.window_steps; ++k) {
      solver.strang_step(f, dt);
    }
    steps += options.window_steps;
    require_finite_field(f, steps);
    double change = 0.0;
    auto values = f.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      change += std::abs(values[i] - previous[i]);
      previous[i] = values[i];
    }
    rate = change * cell / window;
    if (rate < options.tol_rate) {
      f.set_time(f.time() + static_cast<double>(steps) * dt);
      return {std::move(f), rate, steps};
    }
  }
  std::ostringstream msg;
  msg << "steady state not reached after " << steps
      << " steps; last L1 rate " << rate;
  throw SteadyStateNotReached(rate, msg.str());
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<char, 8> kMagic = {'K', 'F', 'P', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = std::bit_cast<U>(value);
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw std::runtime_error("checkpoint truncated");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(bytes[i]) << (8 * i);
  }
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_checkpoint(const std::string& path, const Field& field,
                      std::uint64_t step) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  const PhaseGrid& g = field.grid();
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(g.nx()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(g.nv()));
  put_le<double>(out, g.L());
  put_le<double>(out, g.v_max());
  put_le<double>(out, field.time());
  put_le<std::uint64_t>(out, step);
  for (double value : field.values()) put_le<double>(out, value);
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not a kfp checkpoint: " + path);
  if (get_le<std::uint32_t>(in) != kVersion) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  get_le<std::uint32_t>(in);
  const auto nx = get_le<std::uint64_t>(in);
  const auto nv = get_le<std::uint64_t>(in);
  const double L = get_le<double>(in);
  const double v_max = get_le<double>(in);
  const double time = get_le<double>(in);
  const auto step = get_le<std::uint64_t>(in);
  PhaseGrid grid(L, v_max, static_cast<int>(nx), static_cast<int>(nv));
  std::vector<double> values(grid.size());
  for (double& value : values) value = get_le<double>(in);
  return {Field(grid, std::move(values), time), step};
}

}  // namespace kfp
