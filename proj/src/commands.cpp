#include "kfp/commands.hpp"

#include "kfp/diagnostics.hpp"
#include "kfp/solver.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef KFP_VERSION
#define KFP_VERSION "0.0.0"
#endif

namespace kfp {

namespace fs = std::filesystem;

namespace {

std::string step_stem(const char* prefix, std::uint64_t step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%08llu", prefix, static_cast<unsigned long long>(step));
  return buf;
}

/// Output directory that remembers every file written through it.
class RunOutput {
 public:
  RunOutput(const RunConfig& config, const CommandOptions& options, std::string command)
      : root_(options.output_dir.value_or(config.output_dir)),
        command_(std::move(command)),
        config_text_(serialize_config(config)),
        seed_(options.seed),
        start_(std::chrono::steady_clock::now()) {
    fs::create_directories(root_);
  }

  const fs::path& root() const { return root_; }

  std::ofstream open(const std::string& rel, bool binary = false) {
    const fs::path path = root_ / rel;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    record(rel);
    return out;
  }

  std::string path_of(const std::string& rel) {
    const fs::path path = root_ / rel;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    record(rel);
    return path.string();
  }

  void write_field(const std::string& stem, const Field& f, std::uint64_t step,
                   SnapshotFormat format) {
    if (format == SnapshotFormat::raw) {
      write_checkpoint(path_of(stem + ".bin"), f, step);
    } else {
      auto out = open(stem + ".csv");
      write_snapshot_csv(out, f);
    }
  }

  void finish(const std::string& status, nlohmann::json extra = nlohmann::json::object()) {
    nlohmann::json manifest;
    manifest["tool"] = "kfp";
    manifest["version"] = version_string();
    manifest["command"] = command_;
    manifest["status"] = status;
    manifest["config"] = config_text_;
    manifest["seed"] = seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr);
    manifest["files"] = files_;
    manifest["details"] = std::move(extra);
    manifest["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream out(root_ / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << '\n';
  }

 private:
  void record(const std::string& rel) {
    if (std::find(files_.begin(), files_.end(), rel) == files_.end()) files_.push_back(rel);
  }

  fs::path root_;
  std::string command_;
  std::string config_text_;
  std::optional<std::uint64_t> seed_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> files_;
};

Field initial_field(const RunConfig& config) {
  const PhaseGrid grid = config.grid();
  if (config.initial == InitialSource::paper_default) return default_initial_condition(grid);
  Checkpoint c = read_checkpoint(config.initial_file);
  if (!(c.field.grid() == grid)) {
    throw std::invalid_argument("initial.file: grid differs from the configured grid");
  }
  c.field.set_time(0.0);
  return std::move(c.field);
}

std::optional<Field> reference_field(const RunConfig& config, double target_mass) {
  const PhaseGrid grid = config.grid();
  switch (config.reference) {
    case ReferenceSource::none:
      return std::nullopt;
    case ReferenceSource::profile: {
      Field g = reference_profile(grid, config.model_params(), config.reference_delta, true);
      for (double& value : g.values()) value *= target_mass;
      return g;
    }
    case ReferenceSource::file: {
      Checkpoint c = read_checkpoint(config.reference_file);
      if (!(c.field.grid() == grid)) {
        throw std::invalid_argument("diagnostics.reference_file: grid differs from the configured grid");
      }
      return std::move(c.field);
    }
  }
  return std::nullopt;
}

std::string real(double value) { return format_real(value); }

}  // namespace

std::string version_string() { return KFP_VERSION; }

void write_certificate(std::ostream& out, const CertificateReport& r,
                       const ModelParams& params) {
  const LyapunovSpec& s = r.spec_echo;
  out << "passed = " << (r.passed ? "true" : "false") << '\n'
      << "chosen_R = " << real(r.chosen_R) << '\n'
      << "chosen_C = " << real(r.chosen_C) << '\n'
      << "min_margin_outside = " << real(r.min_margin_outside) << '\n'
      << "worst_point.x = " << real(r.worst_point.x.empty() ? 0.0 : r.worst_point.x[0]) << '\n'
      << "worst_point.v = " << real(r.worst_point.v.empty() ? 0.0 : r.worst_point.v[0]) << '\n'
      << "phi_scale = " << real(r.phi_scale) << '\n'
      << "phi_scale_measured = " << (r.phi_scale_measured ? "true" : "false") << '\n'
      << "in_theorem_range = " << (r.in_theorem_range ? "true" : "false") << '\n'
      << "samples = " << r.samples << '\n'
      << "model.alpha = " << real(params.alpha()) << '\n'
      << "model.kind = " << (params.kind() == EquilibriumKind::exponential ? "exp" : "poly")
      << '\n'
      << "model.shape = " << real(params.shape()) << '\n'
      << "spec.ell = " << real(s.ell) << '\n'
      << "spec.eps = " << real(s.eps) << '\n'
      << "spec.A = " << real(s.a_exp) << '\n'
      << "spec.B = " << real(s.b_exp) << '\n';
  if (const auto* w = std::get_if<ExpWeight>(&s.mode)) {
    out << "spec.weight = exp\n"
        << "spec.theta = " << real(w->theta) << '\n'
        << "spec.delta = " << real(w->delta) << '\n';
  } else {
    out << "spec.weight = poly\n"
        << "spec.k = " << real(std::get<PolyWeight>(s.mode).k) << '\n';
  }
}

int cmd_simulate(const RunConfig& config, const CommandOptions& options,
                 std::ostream& out, std::ostream& err) {
  const SolverConfig solver_config = config.solver_config();
  const PhaseGrid grid = config.grid();

  Field field = initial_field(config);
  std::uint64_t start_step = 0;
  if (options.resume) {
    Checkpoint c = read_checkpoint(*options.resume);
    if (!(c.field.grid() == grid)) {
      err << "error: checkpoint grid differs from the configured grid\n";
      return kExitUsage;
    }
    field = std::move(c.field);
    start_step = c.step;
  }
  const double initial_mass = mass(field);
  const std::optional<Field> reference = reference_field(config, initial_mass);
  std::optional<Field> weight;
  if (reference && config.weighted_l1) {
    weight = weight_field(grid, config.model_params(), config.lyapunov_spec());
  }

  RunOutput output(config, options, "simulate");
  std::vector<DiagnosticsRecord> records;
  RunSinks sinks;
  sinks.on_snapshot = [&](const Field& f, std::uint64_t step) {
    output.write_field("snapshots/" + step_stem("snapshot", step), f, step,
                       config.snapshot_format);
    auto rho_out = output.open("density/" + step_stem("density", step) + ".csv");
    write_density_csv(rho_out, grid, density(f));
    write_checkpoint(output.path_of("checkpoint.bin"), f, step);
  };
  sinks.on_diagnostics = [&](const Field& f, std::uint64_t step) {
    records.push_back(make_record(f, step, reference ? &*reference : nullptr,
                                  weight ? &*weight : nullptr));
  };

  auto flush_records = [&] {
    auto csv = output.open("diagnostics.csv");
    write_records_csv(csv, records);
    if (reference) {
      auto series = output.open("l1_series.csv");
      series << "t,distance\n";
      for (const auto& r : records) {
        series << real(r.time) << ',' << real(*r.l1_distance_to_reference) << '\n';
      }
    }
  };

  KineticSolver probe(grid, config.model_params());
  const TimePlan plan = plan_time(solver_config, probe);
  nlohmann::json details;
  details["dt"] = plan.dt;
  details["steps"] = plan.steps;
  details["start_step"] = start_step;

  try {
    Field final_field = run(solver_config, std::move(field), sinks, start_step);
    flush_records();
    const double final_mass = mass(final_field);
    details["initial_mass"] = initial_mass;
    details["final_mass"] = final_mass;
    output.finish("ok", details);
    out << "simulate: " << plan.steps << " steps of dt = " << real(plan.dt)
        << ", t_final = " << real(final_field.time())
        << ", relative mass drift = " << real((final_mass - initial_mass) / initial_mass)
        << '\n';
    return kExitOk;
  } catch (const NumericalAbort& e) {
    flush_records();
    details["abort_step"] = e.step();
    output.finish("numerical-abort", details);
    err << "error: " << e.what() << " (last good checkpoint kept)\n";
    return kExitNumerical;
  }
}

int cmd_verify_lyapunov(const RunConfig& config, const CommandOptions& options,
                        std::ostream& out, std::ostream& err) {
  const ModelParams params = config.model_params();
  const ScanConfig scan = config.scan_config();
  LyapunovSpec spec = config.lyapunov_spec();
  try {
    spec.validate(params);
  } catch (const InvalidParameters& e) {
    err << "error: lyapunov: " << e.what() << '\n';
    return kExitUsage;
  }

  nlohmann::json details;
  CertificateReport report;
  if (config.search) {
    const auto found = search_lyapunov_candidates(params, spec, CandidateGrid{}, scan);
    details["search"] = true;
    if (found) {
      report = found->report;
      details["candidates_tried"] = found->tried;
    } else {
      report = scan_drift_inequality(params, spec, scan);
      details["candidates_tried"] = "exhausted";
    }
  } else {
    report = scan_drift_inequality(params, spec, scan);
  }

  RunOutput output(config, options, "verify-lyapunov");
  {
    auto cert = output.open("certificate.txt");
    write_certificate(cert, report, params);
    try {
      const auto [c1, c2] = equivalence_constants(params, report.spec_echo, scan);
      cert << "equivalence.c1 = " << real(c1) << '\n' << "equivalence.c2 = " << real(c2) << '\n';
    } catch (const InvalidParameters& e) {
      cert << "equivalence.error = " << e.what() << '\n';
    }
  }
  details["passed"] = report.passed;
  output.finish(report.passed ? "pass" : "fail", details);

  const double wx = report.worst_point.x.empty() ? 0.0 : report.worst_point.x[0];
  const double wv = report.worst_point.v.empty() ? 0.0 : report.worst_point.v[0];
  out << (report.passed ? "PASS" : "FAIL") << " verify-lyapunov R = " << report.chosen_R
      << " C = " << real(report.chosen_C) << " margin = " << real(report.min_margin_outside)
      << " phi_scale = " << real(report.phi_scale) << " worst = (" << wx << ", " << wv
      << ")\n";
  return report.passed ? kExitOk : kExitVerifyFail;
}

int cmd_fit_rate(const RunConfig& config, const CommandOptions& options,
                 std::ostream& out, std::ostream& err) {
  if (!options.series) {
    err << "error: fit-rate needs --series PATH\n";
    return kExitUsage;
  }
  std::ifstream in(*options.series);
  if (!in) {
    err << "error: cannot open series file " << *options.series << '\n';
    return kExitUsage;
  }
  std::ostringstream text;
  text << in.rdbuf();
  RateFit fit;
  try {
    const auto series = parse_series_csv(text.str());
    if (series.empty()) {
      err << "error: series file holds no rows\n";
      return kExitUsage;
    }
    fit = rate_fit(series, config.rate_mode, config.rate_theta, config.rate_burn);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  RunOutput output(config, options, "fit-rate");
  {
    auto summary = output.open("rate_fit.txt");
    write_rate_fit(summary, fit);
  }
  output.finish("ok");
  write_rate_fit(out, fit);
  return kExitOk;
}

int cmd_steady_state(const RunConfig& config, const CommandOptions& options,
                     std::ostream& out, std::ostream& err) {
  const SolverConfig solver_config = config.solver_config();
  const ModelParams params = config.model_params();
  const PhaseGrid grid = config.grid();
  SteadyStateResult result{Field(grid), 0.0, 0};
  try {
    result = steady_state_reference(solver_config, initial_field(config),
                                    config.steady_state_options());
  } catch (const SteadyStateNotReached& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NumericalAbort& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }

  RunOutput output(config, options, "steady-state");
  write_checkpoint(output.path_of("steady_state.bin"), result.field, result.steps);
  if (config.snapshot_format == SnapshotFormat::csv) {
    output.write_field("steady_state", result.field, result.steps, SnapshotFormat::csv);
  }
  const auto rho = density(result.field);
  {
    auto rho_out = output.open("density.csv");
    write_density_csv(rho_out, grid, rho);
  }
  const EnergyScatter scatter = energy_scatter(result.field, params);
  {
    auto scatter_out = output.open("energy_scatter.csv");
    write_scatter_csv(scatter_out, scatter);
  }
  auto summary = output.open("steady_state.txt");
  summary << "steps = " << result.steps << '\n'
          << "time = " << real(result.field.time()) << '\n'
          << "rate = " << real(result.rate) << '\n'
          << "mass = " << real(mass(result.field)) << '\n'
          << "dispersion = " << real(scatter.dispersion) << '\n'
          << "relative_dispersion = " << real(scatter.relative_dispersion) << '\n';
  if (params.kind() == EquilibriumKind::exponential) {
    std::vector<double> xs(grid.nx());
    for (int n = 0; n < grid.nx(); ++n) xs[n] = grid.x(n);
    try {
      const TailFit tail = log_tail_regression(xs, rho, params, config.tail_x_lo,
                                               config.tail_x_hi);
      summary << "tail.delta_hat = " << real(-tail.slope) << '\n'
              << "tail.residual_rms = " << real(tail.residual_rms) << '\n';
    } catch (const std::exception& e) {
      summary << "tail.error = " << e.what() << '\n';
    }
  }
  summary.close();
  nlohmann::json details;
  details["steps"] = result.steps;
  details["rate"] = result.rate;
  output.finish("ok", details);
  out << "steady-state: " << result.steps << " steps, L1 rate " << real(result.rate)
      << ", dispersion " << real(scatter.dispersion) << '\n';
  return kExitOk;
}

int cmd_export_reference(const RunConfig& config, const CommandOptions& options,
                         std::ostream& out, std::ostream& err) {
  const ModelParams params = config.model_params();
  if (params.kind() != EquilibriumKind::exponential) {
    err << "error: export-reference needs model.kind = exp\n";
    return kExitUsage;
  }
  const PhaseGrid grid = config.grid();
  const Field g = reference_profile(grid, params, config.reference_delta, true);
  RunOutput output(config, options, "export-reference");
  write_checkpoint(output.path_of("reference.bin"), g, 0);
  if (config.snapshot_format == SnapshotFormat::csv) {
    output.write_field("reference", g, 0, SnapshotFormat::csv);
  }
  {
    auto rho_out = output.open("reference_density.csv");
    write_density_csv(rho_out, grid, density(g));
  }
  output.finish("ok");
  out << "export-reference: delta = " << real(config.reference_delta) << ", " << grid.nx()
      << " x " << grid.nv() << " cells\n";
  return kExitOk;
}

}  // namespace kfp
