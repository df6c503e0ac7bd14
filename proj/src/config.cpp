#include "kfp/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace kfp {

namespace {

std::string join_violations(const std::vector<std::string>& v) {
  std::string out = "invalid configuration:";
  for (const auto& s : v) out += "\n  " + s;
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string real_text(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

// Each parser returns an error message, empty on success.
using Setter = std::function<std::string(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  std::string name;
  Setter set;
  Getter get;
  std::function<bool(const RunConfig&)> emitted = [](const RunConfig&) { return true; };
};

std::string parse_real(const std::string& text, double& out) {
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE ||
      !std::isfinite(value)) {
    return "expected a finite real number, got '" + text + "'";
  }
  out = value;
  return {};
}

template <typename Int>
std::string parse_integer(const std::string& text, Int& out) {
  errno = 0;
  char* end = nullptr;
  const long long value = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    return "expected an integer, got '" + text + "'";
  }
  if constexpr (std::is_unsigned_v<Int>) {
    if (value < 0) return "expected a nonnegative integer, got '" + text + "'";
  }
  out = static_cast<Int>(value);
  return {};
}

std::string parse_bool(const std::string& text, bool& out) {
  if (text == "true") {
    out = true;
  } else if (text == "false") {
    out = false;
  } else {
    return "expected true or false, got '" + text + "'";
  }
  return {};
}

Key real_key(std::string name, double RunConfig::*field) {
  return {std::move(name),
          [field](RunConfig& c, const std::string& t) { return parse_real(t, c.*field); },
          [field](const RunConfig& c) { return real_text(c.*field); }};
}

template <typename Int>
Key int_key(std::string name, Int RunConfig::*field) {
  return {std::move(name),
          [field](RunConfig& c, const std::string& t) { return parse_integer(t, c.*field); },
          [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

Key bool_key(std::string name, bool RunConfig::*field) {
  return {std::move(name),
          [field](RunConfig& c, const std::string& t) { return parse_bool(t, c.*field); },
          [field](const RunConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

Key string_key(std::string name, std::string RunConfig::*field) {
  return {std::move(name),
          [field](RunConfig& c, const std::string& t) {
            c.*field = t;
            return std::string();
          },
          [field](const RunConfig& c) { return c.*field; }};
}

template <typename Enum>
Key enum_key(std::string name, Enum RunConfig::*field,
             std::vector<std::pair<std::string, Enum>> names) {
  return {std::move(name),
          [field, names](RunConfig& c, const std::string& t) {
            std::string allowed;
            for (const auto& [label, value] : names) {
              if (label == t) {
                c.*field = value;
                return std::string();
              }
              allowed += (allowed.empty() ? "" : ", ") + label;
            }
            return "expected one of " + allowed + ", got '" + t + "'";
          },
          [field, names](const RunConfig& c) {
            for (const auto& [label, value] : names) {
              if (value == c.*field) return label;
            }
            return std::string("?");
          }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(real_key("model.alpha", &RunConfig::alpha));
    k.push_back(enum_key<EquilibriumKind>(
        "model.kind", &RunConfig::kind,
        {{"exp", EquilibriumKind::exponential}, {"poly", EquilibriumKind::polynomial}}));
    Key beta = real_key("model.beta", &RunConfig::shape);
    beta.emitted = [](const RunConfig& c) { return c.kind == EquilibriumKind::exponential; };
    k.push_back(beta);
    Key gamma = real_key("model.gamma", &RunConfig::shape);
    gamma.emitted = [](const RunConfig& c) { return c.kind == EquilibriumKind::polynomial; };
    k.push_back(gamma);
    k.push_back(int_key("model.dim", &RunConfig::dim));
    k.push_back(enum_key<Regime>("model.regime", &RunConfig::regime,
                                 {{"theorem", Regime::theorem},
                                  {"exploratory", Regime::exploratory}}));

    k.push_back(real_key("grid.L", &RunConfig::L));
    k.push_back(real_key("grid.v_max", &RunConfig::v_max));
    k.push_back(int_key("grid.Nx", &RunConfig::nx));
    k.push_back(int_key("grid.Nv", &RunConfig::nv));

    k.push_back(real_key("time.t_final", &RunConfig::t_final));
    k.push_back({"time.dt",
                 [](RunConfig& c, const std::string& t) {
                   if (t == "auto") {
                     c.dt.reset();
                     return std::string();
                   }
                   double value = 0.0;
                   auto err = parse_real(t, value);
                   if (err.empty()) c.dt = value;
                   return err.empty() ? err : "expected 'auto' or a real number, got '" + t + "'";
                 },
                 [](const RunConfig& c) { return c.dt ? real_text(*c.dt) : std::string("auto"); }});
    k.push_back(real_key("time.cfl_safety", &RunConfig::cfl_safety));

    k.push_back(enum_key<InitialSource>(
        "initial.preset", &RunConfig::initial,
        {{"paper-default", InitialSource::paper_default}, {"file", InitialSource::file}}));
    k.push_back(string_key("initial.file", &RunConfig::initial_file));

    k.push_back(int_key("diagnostics.snapshot_cadence", &RunConfig::snapshot_cadence));
    k.push_back(int_key("diagnostics.cadence", &RunConfig::diagnostics_cadence));
    k.push_back(enum_key<ReferenceSource>("diagnostics.reference", &RunConfig::reference,
                                          {{"none", ReferenceSource::none},
                                           {"profile", ReferenceSource::profile},
                                           {"file", ReferenceSource::file}}));
    k.push_back(string_key("diagnostics.reference_file", &RunConfig::reference_file));
    k.push_back(real_key("diagnostics.delta", &RunConfig::reference_delta));
    k.push_back(bool_key("diagnostics.weighted_l1", &RunConfig::weighted_l1));
    k.push_back(enum_key<RateMode>("diagnostics.rate_mode", &RunConfig::rate_mode,
                                   {{"exp-theta", RateMode::exp_theta},
                                    {"poly-k", RateMode::poly_k}}));
    k.push_back(real_key("diagnostics.rate_theta", &RunConfig::rate_theta));
    k.push_back(real_key("diagnostics.rate_burn", &RunConfig::rate_burn));
    k.push_back(real_key("diagnostics.tail_x_lo", &RunConfig::tail_x_lo));
    k.push_back(real_key("diagnostics.tail_x_hi", &RunConfig::tail_x_hi));
    k.push_back(real_key("diagnostics.steady_tol", &RunConfig::steady_tol));
    k.push_back(int_key("diagnostics.steady_window", &RunConfig::steady_window));
    k.push_back(int_key("diagnostics.steady_max_steps", &RunConfig::steady_max_steps));

    k.push_back(real_key("lyapunov.ell", &RunConfig::ell));
    k.push_back(real_key("lyapunov.eps", &RunConfig::eps));
    k.push_back(real_key("lyapunov.A", &RunConfig::a_exp));
    k.push_back(real_key("lyapunov.B", &RunConfig::b_exp));
    k.push_back({"lyapunov.weight",
                 [](RunConfig& c, const std::string& t) {
                   if (t == "exp" || t == "poly") {
                     c.exp_weight = t == "exp";
                     return std::string();
                   }
                   return "expected one of exp, poly, got '" + t + "'";
                 },
                 [](const RunConfig& c) { return std::string(c.exp_weight ? "exp" : "poly"); }});
    k.push_back(real_key("lyapunov.theta", &RunConfig::theta));
    k.push_back(real_key("lyapunov.delta", &RunConfig::delta));
    k.push_back(real_key("lyapunov.k", &RunConfig::k));
    k.push_back(bool_key("lyapunov.search", &RunConfig::search));
    k.push_back(real_key("lyapunov.scan.x", &RunConfig::scan_x));
    k.push_back(real_key("lyapunov.scan.v", &RunConfig::scan_v));
    k.push_back(int_key("lyapunov.scan.samples", &RunConfig::scan_samples));
    k.push_back({"lyapunov.scan.radii",
                 [](RunConfig& c, const std::string& t) {
                   std::vector<double> radii;
                   std::istringstream in(t);
                   std::string item;
                   while (std::getline(in, item, ',')) {
                     double r = 0.0;
                     auto err = parse_real(trim(item), r);
                     if (!err.empty()) return "radius list: " + err;
                     radii.push_back(r);
                   }
                   if (radii.empty()) return std::string("radius list is empty");
                   c.scan_radii = std::move(radii);
                   return std::string();
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (double r : c.scan_radii) out += (out.empty() ? "" : ", ") + real_text(r);
                   return out;
                 }});
    k.push_back(real_key("lyapunov.scan.fd_step", &RunConfig::fd_step));
    k.push_back(real_key("lyapunov.scan.phi_scale", &RunConfig::phi_scale));

    k.push_back(string_key("output.directory", &RunConfig::output_dir));
    k.push_back(enum_key<SnapshotFormat>("output.snapshot_format", &RunConfig::snapshot_format,
                                         {{"csv", SnapshotFormat::csv},
                                          {"raw", SnapshotFormat::raw}}));
    return k;
  }();
  return table;
}

void validate(const RunConfig& c, const std::map<std::string, int>& seen,
              std::vector<std::string>& errors) {
  auto fail = [&](const std::string& path, const std::string& what) {
    errors.push_back(path + ": " + what);
  };

  const bool exp_kind = c.kind == EquilibriumKind::exponential;
  const char* shape_key = exp_kind ? "model.beta" : "model.gamma";
  bool model_ok = true;
  if (!seen.count("model.alpha")) {
    fail("model.alpha", "required key is missing");
    model_ok = false;
  }
  if (!seen.count("model.kind")) {
    fail("model.kind", "required key is missing");
    model_ok = false;
  }
  if (seen.count("model.kind") && !seen.count(shape_key)) {
    fail(shape_key, "required for this equilibrium kind");
    model_ok = false;
  }
  if (seen.count(exp_kind ? "model.gamma" : "model.beta")) {
    fail(exp_kind ? "model.gamma" : "model.beta", "does not apply to this equilibrium kind");
  }
  if (c.dim != 1) {
    fail("model.dim", "only d = 1 is supported by the solver and the scan");
    model_ok = false;
  }
  std::optional<ModelParams> params;
  if (model_ok) {
    try {
      params = c.model_params();
    } catch (const InvalidParameters& e) {
      const std::string what = e.what();
      std::string path = "model";
      if (what.find("alpha") != std::string::npos) path = "model.alpha";
      if (what.find("beta") != std::string::npos) path = "model.beta";
      if (what.find("gamma") != std::string::npos) path = "model.gamma";
      fail(path, what);
    }
  }

  std::optional<PhaseGrid> grid;
  bool grid_ok = true;
  auto check_half_width = [&](const char* path, double value) {
    if (!(value > 0.0 && std::isfinite(value))) {
      fail(path, "must be positive");
      grid_ok = false;
    }
  };
  auto check_count = [&](const char* path, int value) {
    if (value <= 0 || value % 2 != 0) {
      fail(path, "must be an even positive integer, got " + std::to_string(value));
      grid_ok = false;
    }
  };
  check_half_width("grid.L", c.L);
  check_half_width("grid.v_max", c.v_max);
  check_count("grid.Nx", c.nx);
  check_count("grid.Nv", c.nv);
  if (grid_ok) grid = c.grid();

  if (!(c.t_final >= 0.0)) fail("time.t_final", "must be nonnegative");
  if (c.dt && !(*c.dt > 0.0)) fail("time.dt", "must be positive or 'auto'");
  if (!(c.cfl_safety > 0.0 && c.cfl_safety <= 1.0)) {
    fail("time.cfl_safety", "must lie in (0, 1]");
  }
  if (params && grid && c.dt && *c.dt > 0.0) {
    const double bound = KineticSolver(*grid, *params).cfl_timestep(1.0);
    if (*c.dt > bound * (1.0 + 1e-12)) {
      fail("time.dt", "dt = " + real_text(*c.dt) + " exceeds the CFL bound " + real_text(bound));
    }
  }

  if (c.initial == InitialSource::file && c.initial_file.empty()) {
    fail("initial.file", "required when initial.preset = file");
  }

  if (c.snapshot_cadence == 0) fail("diagnostics.snapshot_cadence", "must be positive");
  if (c.diagnostics_cadence == 0) fail("diagnostics.cadence", "must be positive");
  if (c.reference == ReferenceSource::file && c.reference_file.empty()) {
    fail("diagnostics.reference_file", "required when diagnostics.reference = file");
  }
  if (c.reference == ReferenceSource::profile && !exp_kind) {
    fail("diagnostics.reference", "profile needs an exponential equilibrium");
  }
  if (!(c.reference_delta >= 0.0)) fail("diagnostics.delta", "must be nonnegative");
  if (!(c.rate_theta > 0.0 && c.rate_theta <= 1.0)) {
    fail("diagnostics.rate_theta", "must lie in (0, 1]");
  }
  if (!(c.rate_burn >= 0.0 && c.rate_burn < 1.0)) {
    fail("diagnostics.rate_burn", "must lie in [0, 1)");
  }
  if (!(c.tail_x_lo >= 0.0 && c.tail_x_lo < c.tail_x_hi)) {
    fail("diagnostics.tail_x_lo", "tail window needs 0 <= tail_x_lo < tail_x_hi");
  }
  if (!(c.steady_tol > 0.0)) fail("diagnostics.steady_tol", "must be positive");
  if (c.steady_window == 0) fail("diagnostics.steady_window", "must be positive");
  if (c.steady_max_steps == 0) fail("diagnostics.steady_max_steps", "must be positive");

  if (params) {
    try {
      c.lyapunov_spec().validate(*params);
    } catch (const InvalidParameters& e) {
      const std::string what = e.what();
      const std::string head = what.substr(0, what.find(' '));
      static const std::map<std::string, std::string> kPaths = {
          {"ell", "lyapunov.ell"}, {"eps", "lyapunov.eps"},     {"A", "lyapunov.A"},
          {"B", "lyapunov.B"},     {"theta", "lyapunov.theta"}, {"delta", "lyapunov.delta"},
          {"k", "lyapunov.k"}};
      const auto it = kPaths.find(head);
      fail(it == kPaths.end() ? "lyapunov" : it->second, what);
    }
  }
  try {
    c.scan_config().validate();
  } catch (const InvalidParameters& e) {
    fail("lyapunov.scan", e.what());
  }

  if (c.output_dir.empty()) fail("output.directory", "must not be empty");
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

ModelParams RunConfig::model_params() const {
  return kind == EquilibriumKind::exponential
             ? ModelParams::exponential(alpha, shape, dim, regime)
             : ModelParams::polynomial(alpha, shape, dim, regime);
}

PhaseGrid RunConfig::grid() const { return PhaseGrid(L, v_max, nx, nv); }

SolverConfig RunConfig::solver_config() const {
  return SolverConfig{model_params(), grid(),        t_final,
                      dt,             cfl_safety,    snapshot_cadence,
                      diagnostics_cadence, SolverOptions{}};
}

LyapunovSpec RunConfig::lyapunov_spec() const {
  LyapunovSpec s;
  s.ell = ell;
  s.eps = eps;
  s.a_exp = a_exp;
  s.b_exp = b_exp;
  if (exp_weight) {
    s.mode = ExpWeight{theta, delta};
  } else {
    s.mode = PolyWeight{k};
  }
  return s;
}

ScanConfig RunConfig::scan_config() const {
  ScanConfig s;
  s.x_scan = scan_x;
  s.v_scan = scan_v;
  s.samples_per_axis = scan_samples;
  s.radii = scan_radii;
  s.fd_step = fd_step;
  s.phi_scale = phi_scale;
  return s;
}

SteadyStateOptions RunConfig::steady_state_options() const {
  SteadyStateOptions s;
  s.tol_rate = steady_tol;
  s.window_steps = steady_window;
  s.max_steps = steady_max_steps;
  return s;
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::vector<std::string> errors;
  std::map<std::string, int> seen;
  std::map<std::string, const Key*> by_name;
  std::vector<std::string> unparsed;
  for (const auto& key : keys()) by_name[key.name] = &key;

  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) {
      raw = raw.substr(0, hash);
    }
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no);
    if (eq == std::string::npos) {
      errors.push_back(where + ": expected 'key = value'");
      continue;
    }
    const std::string name = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = by_name.find(name);
    if (it == by_name.end()) {
      errors.push_back(name + ": unknown key (" + where + ")");
      continue;
    }
    if (auto [prev, inserted] = seen.emplace(name, line_no); !inserted) {
      errors.push_back(name + ": repeated (" + where + ", first on line " +
                       std::to_string(prev->second) + ")");
      continue;
    }
    if (auto err = it->second->set(config, value); !err.empty()) {
      errors.push_back(name + ": " + err);
      unparsed.push_back(name);
    }
  }
  std::vector<std::string> semantic;
  validate(config, seen, semantic);
  for (auto& e : semantic) {
    const bool stale = std::any_of(unparsed.begin(), unparsed.end(), [&](const std::string& k) {
      return e.compare(0, k.size() + 1, k + ":") == 0;
    });
    if (!stale) errors.push_back(std::move(e));
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open configuration file"});
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& key : keys()) {
    if (!key.emitted(config)) continue;
    out += key.name + " = " + key.get(config) + "\n";
  }
  return out;
}

}  // namespace kfp
