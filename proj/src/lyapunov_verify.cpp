#include "kfp/lyapunov_verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace kfp {

namespace {

double checked(const ScalarField& f, const PointEval& p) {
  const double value = f(p);
  if (!std::isfinite(value)) {
    throw std::domain_error("finite-difference oracle: non-finite field value");
  }
  return value;
}

double point_radius(const PointEval& p) {
  double r2 = 0.0;
  for (double c : p.x) r2 += c * c;
  for (double c : p.v) r2 += c * c;
  return std::sqrt(r2);
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  }
  return out;
}

// Per-point data reused across candidate radii.
struct Sample {
  double radius;
  double lstar_m;
  double phi_m;
};

}  // namespace

void ScanConfig::validate() const {
  if (!(x_scan > 0.0 && v_scan > 0.0)) {
    throw InvalidParameters("scan box half-widths must be positive");
  }
  if (samples_per_axis < 16) {
    throw InvalidParameters("samples_per_axis must be at least 16");
  }
  if (radii.empty()) throw InvalidParameters("no candidate radius given");
  for (double r : radii) {
    if (!(r > 0.0)) throw InvalidParameters("candidate radii must be positive");
    if (!(r < x_scan && r < v_scan)) {
      throw InvalidParameters("candidate radii must lie inside the scan box");
    }
  }
  if (!(fd_step > 0.0)) throw InvalidParameters("fd_step must be positive");
  if (!(phi_scale >= 0.0)) throw InvalidParameters("phi_scale must be >= 0");
}

double LstarTerms::magnitude() const {
  return std::abs(transport) + std::abs(force) + std::abs(diffusion) +
         std::abs(drift);
}

LstarTerms apply_Lstar_fd_terms(const ScalarField& f, const PointEval& p,
                                const ModelParams& params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd step must be positive");
  const std::size_t d = p.x.size();
  const double step = h * std::sqrt(1.0 + point_radius(p) * point_radius(p));
  const auto grad_v = grad_potential(std::span<const double>(p.x), params);
  const auto drift = equilibrium_drift(std::span<const double>(p.v), params);
  const double f0 = checked(f, p);

  LstarTerms t;
  PointEval q = p;
  for (std::size_t i = 0; i < d; ++i) {
    q.x[i] = p.x[i] + step;
    const double fxp = checked(f, q);
    q.x[i] = p.x[i] - step;
    const double fxm = checked(f, q);
    q.x[i] = p.x[i];

    q.v[i] = p.v[i] + step;
    const double fvp = checked(f, q);
    q.v[i] = p.v[i] - step;
    const double fvm = checked(f, q);
    q.v[i] = p.v[i];

    const double dx = (fxp - fxm) / (2.0 * step);
    const double dv = (fvp - fvm) / (2.0 * step);
    t.transport += p.v[i] * dx;
    t.force -= grad_v[i] * dv;
    t.diffusion += (fvp - 2.0 * f0 + fvm) / (step * step);
    t.drift += drift[i] * dv;
  }
  return t;
}

double apply_Lstar_fd(const ScalarField& f, const PointEval& p,
                      const ModelParams& params, double h) {
  return apply_Lstar_fd_terms(f, p, params, h).value();
}

LstarTerms apply_Lstar_fd_richardson(const ScalarField& f, const PointEval& p,
                                     const ModelParams& params, double h) {
  const LstarTerms coarse = apply_Lstar_fd_terms(f, p, params, h);
  const LstarTerms fine = apply_Lstar_fd_terms(f, p, params, 0.5 * h);
  auto extrapolate = [](double c, double fn) { return (4.0 * fn - c) / 3.0; };
  return {extrapolate(coarse.transport, fine.transport),
          extrapolate(coarse.force, fine.force),
          extrapolate(coarse.diffusion, fine.diffusion),
          extrapolate(coarse.drift, fine.drift)};
}

bool in_theorem_range(const ModelParams& params, const LyapunovSpec& spec) {
  const bool exp_eq = params.kind() == EquilibriumKind::exponential;
  if (const auto* w = std::get_if<ExpWeight>(&spec.mode)) {
    return exp_eq && w->theta <= std::min(1.0, 0.5 * params.beta());
  }
  const double k = std::get<PolyWeight>(spec.mode).k;
  if (exp_eq) return k > 1.0 && k <= spec.ell;
  return spec.ell > 1.5 && spec.ell < 1.0 + 0.5 * params.gamma() &&
         k <= spec.ell;
}

std::vector<PointEval> scan_points(const ScanConfig& cfg) {
  cfg.validate();
  const int n = cfg.samples_per_axis;
  const auto xs = linspace(-cfg.x_scan, cfg.x_scan, n);
  const auto vs = linspace(-cfg.v_scan, cfg.v_scan, n);
  std::vector<PointEval> pts;
  pts.reserve(static_cast<std::size_t>(n) * n + 2 * n + 1);
  for (double x : xs) {
    for (double v : vs) pts.emplace_back(x, v);
  }
  for (double x : xs) pts.emplace_back(x, 0.0);
  for (double v : vs) pts.emplace_back(0.0, v);
  pts.emplace_back(0.0, 0.0);
  return pts;
}

CertificateReport scan_drift_inequality(const ModelParams& params,
                                        const LyapunovSpec& spec,
                                        const ScanConfig& cfg) {
  spec.validate(params);
  cfg.validate();
  if (params.dim() != 1) {
    throw InvalidParameters("the drift scan samples the d = 1 phase plane");
  }
  const auto pts = scan_points(cfg);
  std::vector<Sample> samples;
  samples.reserve(pts.size());
  for (const auto& p : pts) {
    const double m = lyapunov_weight(p, params, spec);
    samples.push_back({point_radius(p),
                       apply_Lstar_exact(p, params, spec, LstarTarget::weight_m),
                       phi(m, spec)});
  }

  const bool measured = cfg.phi_scale == 0.0;
  auto radii = cfg.radii;
  std::sort(radii.begin(), radii.end());

  CertificateReport report;
  report.spec_echo = spec;
  report.phi_scale_measured = measured;
  report.in_theorem_range = in_theorem_range(params, spec);
  report.samples = samples.size();

  for (double radius : radii) {
    double worst = std::numeric_limits<double>::infinity();
    std::size_t worst_idx = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Sample& s = samples[i];
      if (s.radius <= radius) continue;
      double margin = 0.0;
      if (measured) {
        margin = s.phi_m > 0.0 ? -s.lstar_m / s.phi_m
                               : (s.lstar_m < 0.0 ? std::numeric_limits<double>::infinity()
                                                  : -std::numeric_limits<double>::infinity());
      } else {
        margin = -s.lstar_m - cfg.phi_scale * s.phi_m;
      }
      if (margin < worst) {
        worst = margin;
        worst_idx = i;
      }
    }
    const double kappa = measured ? std::max(worst, 0.0) : cfg.phi_scale;
    double c_inside = 0.0;
    for (const Sample& s : samples) {
      if (s.radius <= radius) {
        c_inside = std::max(c_inside, s.lstar_m + kappa * s.phi_m);
      }
    }
    report.chosen_R = radius;
    report.chosen_C = c_inside;
    report.min_margin_outside = worst;
    report.worst_point = pts[worst_idx];
    report.phi_scale = kappa;
    report.passed = worst >= 0.0;
    if (report.passed) break;
  }
  return report;
}

std::pair<double, double> equivalence_constants(const ModelParams& params,
                                                const LyapunovSpec& spec,
                                                const ScanConfig& cfg) {
  spec.validate(params);
  double c1 = std::numeric_limits<double>::infinity();
  double c2 = -std::numeric_limits<double>::infinity();
  for (const auto& p : scan_points(cfg)) {
    const double ratio =
        lyapunov_H(p, params, spec) / std::pow(energy(p, params), spec.ell);
    c1 = std::min(c1, ratio);
    c2 = std::max(c2, ratio);
  }
  if (!(c1 > 0.0)) {
    std::ostringstream msg;
    msg << "H is not equivalent to E^ell on the scan box (c1 = " << c1 << ")";
    throw InvalidParameters(msg.str());
  }
  return {c1, c2};
}

std::optional<CandidateResult> search_lyapunov_candidates(
    const ModelParams& params, const LyapunovSpec& base,
    const CandidateGrid& grid, const ScanConfig& cfg) {
  const bool exp_weight = base.is_exp_weight();
  const std::vector<double> deltas =
      exp_weight ? grid.delta : std::vector<double>{0.0};
  std::size_t tried = 0;
  for (double delta : deltas) {
    for (double eps : grid.eps) {
      for (double a : grid.a_exp) {
        for (double b : grid.b_exp) {
          LyapunovSpec spec = base;
          spec.eps = eps;
          spec.a_exp = a;
          spec.b_exp = b;
          if (exp_weight) std::get<ExpWeight>(spec.mode).delta = delta;
          try {
            spec.validate(params);
            equivalence_constants(params, spec, cfg);
          } catch (const InvalidParameters&) {
            continue;
          }
          ++tried;
          auto report = scan_drift_inequality(params, spec, cfg);
          if (report.passed) return CandidateResult{spec, report, tried};
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace kfp
