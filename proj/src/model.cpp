#include "kfp/model.hpp"

#include "kfp/quadrature.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace kfp {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return dot(a, a); }

double sphere_area(int dim) {
  // |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)
  return 2.0 * std::pow(std::numbers::pi, 0.5 * dim) /
         std::tgamma(0.5 * dim);
}

[[noreturn]] void reject(const std::string& what) {
  throw InvalidParameters(what);
}

void require_finite(double value, const char* name) {
  if (!std::isfinite(value)) reject(std::string(name) + " must be finite");
}

constexpr double kTailTarget = 1e-12;

// Quantities shared by H, its gradient and L* at one point.
struct PointTerms {
  double x2, v2, xv;  // |x|^2, |v|^2, x.v
  double jx, jv;      // <x>, <v>
  double energy;
  double drift_dot_v;  // v . grad_v M / M
  double drift_dot_x;  // x . grad_v M / M
};

PointTerms point_terms(const PointEval& p, const ModelParams& params) {
  if (p.x.size() != p.v.size() ||
      p.x.size() != static_cast<std::size_t>(params.dim())) {
    reject("point dimension does not match the model dimension");
  }
  PointTerms t{};
  t.x2 = norm2(p.x);
  t.v2 = norm2(p.v);
  t.xv = dot(p.x, p.v);
  t.jx = std::sqrt(1.0 + t.x2);
  t.jv = std::sqrt(1.0 + t.v2);
  const double alpha = params.alpha();
  t.energy = 0.5 * t.v2 + std::pow(t.jx, alpha) / alpha;
  // grad_v M / M = -c(v) v, so both dot products share the scalar c(v).
  double c = 0.0;
  if (params.kind() == EquilibriumKind::exponential) {
    c = std::pow(t.jv, params.beta() - 2.0);
  } else {
    c = (params.dim() + params.gamma()) / (t.jv * t.jv);
  }
  t.drift_dot_v = -c * t.v2;
  t.drift_dot_x = -c * t.xv;
  return t;
}

double energy_power_lstar(const PointTerms& t, double ell, int dim) {
  const double e = t.energy;
  return ell * std::pow(e, ell - 1.0) *
         ((ell - 1.0) * t.v2 / e + dim + t.drift_dot_v);
}

double cross_term_value(const PointTerms& t, double a, double b) {
  return std::pow(t.jx, a) * std::pow(t.jv, -b) * t.xv;
}

double cross_term_lstar(const PointTerms& t, const ModelParams& params,
                        double a, double b) {
  const double jx2 = t.jx * t.jx;
  const double jv2 = t.jv * t.jv;
  const double xv2 = t.xv * t.xv;
  const double alpha = params.alpha();
  const int dim = params.dim();
  const double bracket =
      t.v2 + a * xv2 / jx2                                           // v.grad_x
      - std::pow(t.jx, alpha - 2.0) * (t.x2 - b * xv2 / jv2)         // -grad V.grad_v
      - b * t.xv * ((dim + 2.0) / jv2 - (b + 2.0) * t.v2 / (jv2 * jv2))  // lap_v
      + (t.drift_dot_x - b * t.xv / jv2 * t.drift_dot_v);            // drift
  return std::pow(t.jx, a) * std::pow(t.jv, -b) * bracket;
}

double h_value(const PointTerms& t, const LyapunovSpec& spec) {
  return std::pow(t.energy, spec.ell) +
         spec.eps * cross_term_value(t, spec.a_exp, spec.b_exp);
}

// Phi, Phi', Phi'' of the weight map at H.
struct WeightDerivs {
  double value, first, second;
};

WeightDerivs weight_derivs(double h, const LyapunovSpec& spec) {
  if (!(h > 0.0)) {
    std::ostringstream msg;
    msg << "Lyapunov function must be positive, got H = " << h;
    throw InvalidParameters(msg.str());
  }
  if (const auto* w = std::get_if<ExpWeight>(&spec.mode)) {
    const double q = 0.5 * w->delta * w->theta;  // delta theta / 2
    const double m = std::exp(w->delta * std::pow(h, 0.5 * w->theta));
    const double first = q * std::pow(h, 0.5 * w->theta - 1.0) * m;
    const double second =
        m * (q * q * std::pow(h, w->theta - 2.0) +
             q * (0.5 * w->theta - 1.0) * std::pow(h, 0.5 * w->theta - 2.0));
    return {m, first, second};
  }
  const double r = std::get<PolyWeight>(spec.mode).k / spec.ell;
  return {std::pow(h, r), r * std::pow(h, r - 1.0),
          r * (r - 1.0) * std::pow(h, r - 2.0)};
}

}  // namespace

// ---------------------------------------------------------------------------

ModelParams::ModelParams(double alpha, EquilibriumKind kind, double shape,
                         int dim, Regime regime)
    : alpha_(alpha), kind_(kind), shape_(shape), dim_(dim), regime_(regime) {
  require_finite(alpha, "alpha");
  require_finite(shape, kind == EquilibriumKind::exponential ? "beta" : "gamma");
  if (dim < 1) reject("dimension must be a positive integer");
  if (regime == Regime::theorem) {
    if (!(alpha > 1.0)) reject("alpha must exceed 1");
  } else if (!(alpha >= 1.0)) {
    reject("alpha must be at least 1");
  }
  if (kind == EquilibriumKind::exponential) {
    if (!(shape > 0.0)) reject("beta must be positive");
    norm_const_ = exp_norm_const(shape, dim);
  } else {
    if (regime == Regime::theorem && !(shape > 1.0)) {
      reject("gamma must exceed 1");
    }
    if (!(shape > 0.0)) reject("gamma must be positive");
    norm_const_ = poly_norm_const(shape, dim);
  }
}

ModelParams ModelParams::exponential(double alpha, double beta, int dim,
                                     Regime regime) {
  return ModelParams(alpha, EquilibriumKind::exponential, beta, dim, regime);
}

ModelParams ModelParams::polynomial(double alpha, double gamma, int dim,
                                    Regime regime) {
  return ModelParams(alpha, EquilibriumKind::polynomial, gamma, dim, regime);
}

double ModelParams::beta() const {
  if (kind_ != EquilibriumKind::exponential) {
    throw std::logic_error("beta requested from a polynomial equilibrium");
  }
  return shape_;
}

double ModelParams::gamma() const {
  if (kind_ != EquilibriumKind::polynomial) {
    throw std::logic_error("gamma requested from an exponential equilibrium");
  }
  return shape_;
}

double exp_norm_const(double beta, int dim) {
  if (!(beta > 0.0) || dim < 1) reject("exp_norm_const needs beta > 0, d >= 1");
  const double area = sphere_area(dim);
  // exp(-<r>^beta/beta) <= exp(-r^beta/beta), whose tail beyond R is
  // beta^(d/beta - 1) Gamma(d/beta, R^beta/beta).
  auto tail = [&](double r) {
    return area * std::pow(beta, dim / beta - 1.0) *
           boost::math::tgamma(dim / beta, std::pow(r, beta) / beta);
  };
  double upper = 4.0;
  while (tail(upper) > kTailTarget) upper *= 2.0;
  auto integrand = [&](double r) {
    return std::pow(r, dim - 1) *
           std::exp(-std::pow(jbracket(r), beta) / beta);
  };
  return area * integrate_geometric(integrand, upper);
}

double poly_norm_const(double gamma, int dim) {
  if (!(gamma > 0.0) || dim < 1) reject("poly_norm_const needs gamma > 0, d >= 1");
  const double area = sphere_area(dim);
  // r^(d-1) <r>^(-d-gamma) <= r^(-1-gamma): tail R^(-gamma)/gamma.
  const double upper =
      std::max(4.0, std::pow(area / (gamma * kTailTarget), 1.0 / gamma));
  auto integrand = [&](double r) {
    return std::pow(r, dim - 1) * std::pow(jbracket(r), -dim - gamma);
  };
  return area * integrate_geometric(integrand, upper);
}

// ---------------------------------------------------------------------------

PointEval::PointEval(std::vector<double> x_, std::vector<double> v_)
    : x(std::move(x_)), v(std::move(v_)) {
  if (x.size() != v.size()) reject("x and v must have the same dimension");
  for (double c : x) require_finite(c, "x");
  for (double c : v) require_finite(c, "v");
}

double jbracket(std::span<const double> z) { return std::sqrt(1.0 + norm2(z)); }

double potential(std::span<const double> x, const ModelParams& params) {
  return std::pow(jbracket(x), params.alpha()) / params.alpha();
}

double potential(double x, const ModelParams& params) {
  return std::pow(jbracket(x), params.alpha()) / params.alpha();
}

std::vector<double> grad_potential(std::span<const double> x,
                                   const ModelParams& params) {
  const double c = std::pow(jbracket(x), params.alpha() - 2.0);
  std::vector<double> g(x.begin(), x.end());
  for (double& gi : g) gi *= c;
  return g;
}

double grad_potential(double x, const ModelParams& params) {
  return std::pow(jbracket(x), params.alpha() - 2.0) * x;
}

double equilibrium(std::span<const double> v, const ModelParams& params) {
  const double jv = jbracket(v);
  if (params.kind() == EquilibriumKind::exponential) {
    const double beta = params.beta();
    return std::exp(-std::pow(jv, beta) / beta) / params.norm_const();
  }
  return std::pow(jv, -params.dim() - params.gamma()) / params.norm_const();
}

double equilibrium(double v, const ModelParams& params) {
  return equilibrium(std::span<const double>(&v, 1), params);
}

std::vector<double> equilibrium_drift(std::span<const double> v,
                                      const ModelParams& params) {
  const double jv = jbracket(v);
  const double c = params.kind() == EquilibriumKind::exponential
                       ? std::pow(jv, params.beta() - 2.0)
                       : (params.dim() + params.gamma()) / (jv * jv);
  std::vector<double> g(v.begin(), v.end());
  for (double& gi : g) gi *= -c;
  return g;
}

double equilibrium_drift(double v, const ModelParams& params) {
  const double jv2 = 1.0 + v * v;
  if (params.kind() == EquilibriumKind::exponential) {
    return -std::pow(jv2, 0.5 * (params.beta() - 2.0)) * v;
  }
  return -(params.dim() + params.gamma()) * v / jv2;
}

double energy(const PointEval& p, const ModelParams& params) {
  return 0.5 * norm2(p.v) + potential(p.x, params);
}

// ---------------------------------------------------------------------------

void LyapunovSpec::validate(const ModelParams& params) const {
  require_finite(ell, "ell");
  require_finite(eps, "eps");
  require_finite(a_exp, "A");
  require_finite(b_exp, "B");
  if (!(ell > 1.0)) reject("ell must exceed 1");
  if (!(eps >= 0.0)) reject("eps must be nonnegative");
  if (!(b_exp > 0.0 && b_exp < 1.0)) reject("B must lie in (0, 1)");
  const double lhs =
      std::max(a_exp + 1.0, 0.0) / params.alpha() + 0.5 * (1.0 - b_exp);
  if (lhs > ell) {
    std::ostringstream msg;
    msg << "equivalence condition (A+1)_+/alpha + (1-B)/2 <= ell violated: "
        << lhs << " > " << ell;
    reject(msg.str());
  }
  if (const auto* w = std::get_if<ExpWeight>(&mode)) {
    if (!(w->theta > 0.0 && w->theta <= 1.0)) reject("theta must lie in (0, 1]");
    if (!(w->delta > 0.0)) reject("delta must be positive");
  } else {
    const double k = std::get<PolyWeight>(mode).k;
    if (!(k > 1.0)) reject("k must exceed 1");
    if (k > ell) reject("k must not exceed ell");
  }
}

LyapunovSpec LyapunovSpec::for_exp_equilibrium(const ModelParams& params,
                                               double eps, double a, double b,
                                               double theta, double delta) {
  LyapunovSpec s;
  s.ell = 2.0;
  s.eps = eps;
  s.a_exp = params.alpha() * a;
  s.b_exp = 1.0 - b;
  s.mode = ExpWeight{theta, delta};
  return s;
}

LyapunovSpec LyapunovSpec::for_poly_equilibrium(const ModelParams& params,
                                                double ell, double eps,
                                                double a, double b, double k) {
  LyapunovSpec s;
  s.ell = ell;
  s.eps = eps;
  s.a_exp = params.alpha() * (ell - 2.0 + a);
  s.b_exp = 1.0 - b;
  s.mode = PolyWeight{k};
  return s;
}

double lyapunov_H(const PointEval& p, const ModelParams& params,
                  const LyapunovSpec& spec) {
  spec.validate(params);
  return h_value(point_terms(p, params), spec);
}

std::vector<double> grad_v_H(const PointEval& p, const ModelParams& params,
                             const LyapunovSpec& spec) {
  spec.validate(params);
  const PointTerms t = point_terms(p, params);
  const double ce = spec.ell * std::pow(t.energy, spec.ell - 1.0);
  const double cx = spec.eps * std::pow(t.jx, spec.a_exp) *
                    std::pow(t.jv, -spec.b_exp);
  const double cv = -cx * spec.b_exp * t.xv / (t.jv * t.jv);
  std::vector<double> g(p.v.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = ce * p.v[i] + cx * p.x[i] + cv * p.v[i];
  }
  return g;
}

double lyapunov_weight(const PointEval& p, const ModelParams& params,
                       const LyapunovSpec& spec) {
  return weight_derivs(lyapunov_H(p, params, spec), spec).value;
}

double apply_Lstar_exact(const PointEval& p, const ModelParams& params,
                         const LyapunovSpec& spec, LstarTarget target) {
  spec.validate(params);
  const PointTerms t = point_terms(p, params);
  const double ep = energy_power_lstar(t, spec.ell, params.dim());
  switch (target) {
    case LstarTarget::energy_power:
      return ep;
    case LstarTarget::cross_term:
      return cross_term_lstar(t, params, spec.a_exp, spec.b_exp);
    case LstarTarget::full_h:
      return ep + spec.eps * cross_term_lstar(t, params, spec.a_exp, spec.b_exp);
    case LstarTarget::weight_m: {
      const double lh =
          ep + spec.eps * cross_term_lstar(t, params, spec.a_exp, spec.b_exp);
      const auto g = grad_v_H(p, params, spec);
      const auto w = weight_derivs(h_value(t, spec), spec);
      return w.first * lh + w.second * norm2(g);
    }
  }
  throw std::logic_error("unknown L* target");
}

double phi(double mval, const LyapunovSpec& spec) {
  if (const auto* w = std::get_if<ExpWeight>(&spec.mode)) {
    if (!(mval >= 1.0)) {
      throw InvalidParameters("phi: exponential weights take values >= 1");
    }
    if (w->theta == 1.0) return mval;
    if (mval == 1.0) return 0.0;
    return mval * std::pow(std::log(mval), -(1.0 - w->theta) / w->theta);
  }
  // H^(k/ell) drops below 1 near the origin; m^(1-1/k) is fine there.
  if (!(mval >= 0.0)) throw InvalidParameters("phi: weights are nonnegative");
  const double k = std::get<PolyWeight>(spec.mode).k;
  return std::pow(mval, 1.0 - 1.0 / k);
}

double theta_decay(double t, const LyapunovSpec& spec, double lam) {
  if (!(t >= 0.0)) throw std::invalid_argument("theta_decay: t must be >= 0");
  if (const auto* w = std::get_if<ExpWeight>(&spec.mode)) {
    if (!(lam > 0.0)) throw std::invalid_argument("theta_decay: lam must be > 0");
    return std::exp(-lam * std::pow(t, w->theta));
  }
  return std::pow(1.0 + t, -std::get<PolyWeight>(spec.mode).k);
}

double asymptotic_density_constant(double alpha, double beta, double delta) {
  return 2.0 * std::sqrt(std::numbers::pi) * std::pow(alpha, 0.25 * beta) /
         std::sqrt(beta * delta * alpha);
}

double asymptotic_density(double x, double alpha, double beta, double delta) {
  if (!(std::abs(x) > 0.0)) {
    throw std::invalid_argument("asymptotic_density: |x| must be positive");
  }
  const double c = asymptotic_density_constant(alpha, beta, delta);
  const double vx = std::pow(jbracket(x), alpha) / alpha;
  return c * std::pow(std::abs(x), 0.5 * alpha * (1.0 - 0.5 * beta)) *
         std::exp(-delta * std::pow(vx, 0.5 * beta));
}

}  // namespace kfp
