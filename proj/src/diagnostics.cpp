#include "kfp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace kfp {

namespace {

void require_same_grid(const Field& f, const Field& g) {
  if (!(f.grid() == g.grid())) {
    throw std::invalid_argument("fields live on different grids");
  }
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

LineFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("regression abscissae are all equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - fit.intercept - fit.slope * xs[i];
    ss += r * r;
  }
  fit.rms = std::sqrt(ss / n);
  return fit;
}

double tail_abscissa(double x, const ModelParams& params) {
  return std::pow(potential(x, params), 0.5 * params.beta());
}

void require_exponential(const ModelParams& params, const char* what) {
  if (params.kind() != EquilibriumKind::exponential) {
    throw InvalidParameters(std::string(what) + " requires an exponential equilibrium");
  }
}

}  // namespace

std::vector<double> density(const Field& f) {
  const PhaseGrid& g = f.grid();
  std::vector<double> rho(g.nx(), 0.0);
  for (int n = 0; n < g.nx(); ++n) {
    double sum = 0.0;
    for (int m = 0; m < g.nv(); ++m) sum += f(n, m);
    rho[n] = sum * g.dv();
  }
  return rho;
}

double mass(const Field& f) {
  double total = 0.0;
  for (double r : density(f)) total += r * f.grid().dx();
  return total;
}

double l1_distance(const Field& f, const Field& g, const Field* weight) {
  require_same_grid(f, g);
  if (weight) require_same_grid(f, *weight);
  const auto a = f.values();
  const auto b = g.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double w = weight ? weight->values()[i] : 1.0;
    sum += std::abs(a[i] - b[i]) * w;
  }
  return sum * f.grid().cell_volume();
}

Field weight_field(const PhaseGrid& grid, const ModelParams& params,
                   const LyapunovSpec& spec) {
  spec.validate(params);
  Field w(grid);
  for (int n = 0; n < grid.nx(); ++n) {
    for (int m = 0; m < grid.nv(); ++m) {
      w(n, m) = lyapunov_weight(PointEval(grid.x(n), grid.v(m)), params, spec);
    }
  }
  return w;
}

Field reference_profile(const PhaseGrid& grid, const ModelParams& params,
                        double delta, bool normalize) {
  require_exponential(params, "reference_profile");
  if (!(delta >= 0.0)) throw InvalidParameters("delta must be nonnegative");
  const double half_beta = 0.5 * params.beta();
  Field g(grid);
  for (int n = 0; n < grid.nx(); ++n) {
    const double vx = potential(grid.x(n), params);
    for (int m = 0; m < grid.nv(); ++m) {
      const double v = grid.v(m);
      g(n, m) = std::exp(-delta * std::pow(0.5 * v * v + vx, half_beta));
    }
  }
  if (normalize) {
    const double total = mass(g);
    for (double& value : g.values()) value /= total;
  }
  return g;
}

EnergyScatter energy_scatter(const Field& f, const ModelParams& params) {
  const PhaseGrid& g = f.grid();
  EnergyScatter out;
  out.pairs.reserve(g.size());
  double f_max = 0.0;
  for (int n = 0; n < g.nx(); ++n) {
    const double vx = potential(g.x(n), params);
    for (int m = 0; m < g.nv(); ++m) {
      const double v = g.v(m);
      out.pairs.emplace_back(0.5 * v * v + vx, f(n, m));
      f_max = std::max(f_max, f(n, m));
    }
  }
  const double floor = kOccupiedFraction * f_max;
  out.e_lo = std::numeric_limits<double>::infinity();
  out.e_hi = -std::numeric_limits<double>::infinity();
  for (const auto& [e, value] : out.pairs) {
    if (value > floor) {
      out.e_lo = std::min(out.e_lo, e);
      out.e_hi = std::max(out.e_hi, e);
      ++out.occupied;
    }
  }
  if (out.occupied < 2 || !(out.e_hi > out.e_lo)) {
    out.dispersion = 0.0;
    return out;
  }
  const double width = (out.e_hi - out.e_lo) / kEnergyBins;
  auto bin_of = [&](double e) {
    return std::min(kEnergyBins - 1, static_cast<int>((e - out.e_lo) / width));
  };
  std::vector<double> sum(kEnergyBins, 0.0);
  std::vector<std::size_t> count(kEnergyBins, 0);
  for (const auto& [e, value] : out.pairs) {
    if (value <= floor) continue;
    sum[bin_of(e)] += value;
    ++count[bin_of(e)];
  }
  double ss = 0.0;
  double ss_rel = 0.0;
  for (const auto& [e, value] : out.pairs) {
    if (value <= floor) continue;
    const int b = bin_of(e);
    const double mean = sum[b] / static_cast<double>(count[b]);
    const double r = value - mean;
    ss += r * r;
    ss_rel += (r / mean) * (r / mean);
  }
  out.dispersion = std::sqrt(ss / static_cast<double>(out.occupied));
  out.relative_dispersion = std::sqrt(ss_rel / static_cast<double>(out.occupied));
  return out;
}

TailFit log_tail_regression(std::span<const double> xs, std::span<const double> rho,
                            const ModelParams& params, double x_lo, double x_hi,
                            bool remove_prefactor) {
  require_exponential(params, "log_tail_regression");
  if (xs.size() != rho.size()) throw std::invalid_argument("xs and rho differ in length");
  if (!(0.0 <= x_lo && x_lo < x_hi)) throw std::invalid_argument("empty tail window");
  const double power = 0.5 * params.alpha() * (1.0 - 0.5 * params.beta());
  std::vector<double> s;
  std::vector<double> y;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double ax = std::abs(xs[i]);
    if (ax < x_lo || ax > x_hi) continue;
    if (!(rho[i] > 0.0)) {
      std::ostringstream msg;
      msg << "nonpositive density " << rho[i] << " at x = " << xs[i];
      throw std::domain_error(msg.str());
    }
    double log_rho = std::log(rho[i]);
    if (remove_prefactor) log_rho -= power * std::log(ax);
    s.push_back(tail_abscissa(xs[i], params));
    y.push_back(log_rho);
  }
  if (s.size() < 2) throw std::invalid_argument("tail window holds fewer than two samples");
  const LineFit fit = least_squares(s, y);
  return {fit.slope, fit.intercept, fit.rms, s.size()};
}

TailComparison tail_comparison(std::span<const double> xs, std::span<const double> rho,
                               const ModelParams& params, double delta,
                               double x_lo, double x_hi) {
  TailComparison out;
  out.fit = log_tail_regression(xs, rho, params, x_lo, x_hi, true);
  out.fitted_delta = -out.fit.slope;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double ax = std::abs(xs[i]);
    if (ax < x_lo || ax > x_hi || ax == 0.0) continue;
    const double model = asymptotic_density(xs[i], params.alpha(), params.beta(), delta);
    out.max_rel_deviation = std::max(out.max_rel_deviation, std::abs(rho[i] / model - 1.0));
  }
  const double lead = delta * tail_abscissa(std::max(x_lo, 0.0), params);
  out.asymptotic_regime = 1.0 / lead < 0.25;
  return out;
}

RateFit rate_fit(std::span<const std::pair<double, double>> series, RateMode mode,
                 double theta, double burn_fraction) {
  if (series.empty()) throw std::invalid_argument("empty series");
  if (!(burn_fraction >= 0.0 && burn_fraction < 1.0)) {
    throw std::invalid_argument("burn fraction must lie in [0, 1)");
  }
  if (mode == RateMode::exp_theta && !(theta > 0.0 && theta <= 1.0)) {
    throw std::invalid_argument("theta must lie in (0, 1]");
  }
  double t0 = series.front().first;
  double t1 = series.front().first;
  for (const auto& [t, d] : series) {
    t0 = std::min(t0, t);
    t1 = std::max(t1, t);
  }
  const double t_burn = t0 + burn_fraction * (t1 - t0);
  std::vector<double> xs;
  std::vector<double> ys;
  RateFit fit;
  fit.mode = mode;
  fit.theta = mode == RateMode::exp_theta ? theta : 0.0;
  fit.t_lo = std::numeric_limits<double>::infinity();
  fit.t_hi = -std::numeric_limits<double>::infinity();
  for (const auto& [t, d] : series) {
    if (t < t_burn) continue;
    if (!(t >= 0.0)) throw std::domain_error("negative time in series");
    if (!(d > 0.0)) {
      std::ostringstream msg;
      msg << "nonpositive distance " << d << " at t = " << t;
      throw std::domain_error(msg.str());
    }
    xs.push_back(mode == RateMode::exp_theta ? std::pow(t, theta) : std::log1p(t));
    ys.push_back(std::log(d));
    fit.t_lo = std::min(fit.t_lo, t);
    fit.t_hi = std::max(fit.t_hi, t);
  }
  if (xs.size() < kMinRateSamples) {
    throw std::invalid_argument("rate fit needs at least 8 samples after the burn, got " +
                                std::to_string(xs.size()));
  }
  const LineFit line = least_squares(xs, ys);
  fit.fitted = -line.slope;
  fit.intercept = line.intercept;
  fit.residual_rms = line.rms;
  fit.samples = xs.size();
  return fit;
}

DiagnosticsRecord make_record(const Field& f, std::uint64_t step,
                              const Field* reference, const Field* weight) {
  DiagnosticsRecord r;
  r.step = step;
  r.time = f.time();
  r.mass = mass(f);
  const auto [lo, hi] = std::minmax_element(f.values().begin(), f.values().end());
  r.min_value = *lo;
  r.max_value = *hi;
  if (reference) {
    r.l1_distance_to_reference = l1_distance(f, *reference);
    if (weight) r.weighted_l1 = l1_distance(f, *reference, weight);
  }
  return r;
}

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", value);
  return buf;
}

void write_records_csv(std::ostream& out, std::span<const DiagnosticsRecord> records) {
  out << "step,time,mass,l1_distance_to_reference,weighted_l1,min_value,max_value\n";
  for (const auto& r : records) {
    out << r.step << ',' << format_real(r.time) << ',' << format_real(r.mass) << ','
        << (r.l1_distance_to_reference ? format_real(*r.l1_distance_to_reference) : "")
        << ',' << (r.weighted_l1 ? format_real(*r.weighted_l1) : "") << ','
        << format_real(r.min_value) << ',' << format_real(r.max_value) << '\n';
  }
}

void write_density_csv(std::ostream& out, const PhaseGrid& grid,
                       std::span<const double> rho) {
  out << "x,rho\n";
  for (int n = 0; n < grid.nx(); ++n) {
    out << format_real(grid.x(n)) << ',' << format_real(rho[n]) << '\n';
  }
}

void write_snapshot_csv(std::ostream& out, const Field& f) {
  const PhaseGrid& g = f.grid();
  out << "x,v,f\n";
  for (int n = 0; n < g.nx(); ++n) {
    for (int m = 0; m < g.nv(); ++m) {
      out << format_real(g.x(n)) << ',' << format_real(g.v(m)) << ','
          << format_real(f(n, m)) << '\n';
    }
  }
}

void write_scatter_csv(std::ostream& out, const EnergyScatter& scatter) {
  out << "E,f\n";
  for (const auto& [e, value] : scatter.pairs) {
    out << format_real(e) << ',' << format_real(value) << '\n';
  }
}

void write_rate_fit(std::ostream& out, const RateFit& fit) {
  out << "mode = " << (fit.mode == RateMode::exp_theta ? "exp-theta" : "poly-k") << '\n';
  if (fit.mode == RateMode::exp_theta) out << "theta = " << format_real(fit.theta) << '\n';
  out << (fit.mode == RateMode::exp_theta ? "lambda = " : "k = ") << format_real(fit.fitted)
      << '\n'
      << "intercept = " << format_real(fit.intercept) << '\n'
      << "t_lo = " << format_real(fit.t_lo) << '\n'
      << "t_hi = " << format_real(fit.t_hi) << '\n'
      << "residual_rms = " << format_real(fit.residual_rms) << '\n'
      << "samples = " << fit.samples << '\n';
}

std::vector<std::pair<double, double>> parse_series_csv(const std::string& text) {
  std::vector<std::pair<double, double>> rows;
  std::vector<std::string> errors;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto comma = line.find(',');
    bool ok = comma != std::string::npos;
    double t = 0.0;
    double d = 0.0;
    if (ok) {
      const std::string a = line.substr(0, comma);
      const std::string b = line.substr(comma + 1);
      char* end_a = nullptr;
      char* end_b = nullptr;
      t = std::strtod(a.c_str(), &end_a);
      d = std::strtod(b.c_str(), &end_b);
      auto rest_blank = [](const char* p) {
        while (*p == ' ' || *p == '\t') ++p;
        return *p == '\0';
      };
      ok = end_a != a.c_str() && end_b != b.c_str() && rest_blank(end_a) &&
           rest_blank(end_b) && std::isfinite(t) && std::isfinite(d);
    }
    if (!ok && first_content) {
      first_content = false;
      continue;
    }
    first_content = false;
    if (!ok) {
      errors.push_back("line " + std::to_string(line_no) + ": expected 't,distance', got '" +
                       line + "'");
      continue;
    }
    rows.emplace_back(t, d);
  }
  if (!errors.empty()) {
    std::string msg = "malformed series:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::runtime_error(msg);
  }
  return rows;
}

}  // namespace kfp
