#pragma once

/// @file model.hpp
/// @brief Closed-form objects of the confined kinetic Fokker-Planck model.
///
/// The model is
///
///   d_t f = -v.grad_x f + grad_x V . grad_v f + div_v(M grad_v(f/M))
///
/// with potential V = <x>^alpha / alpha (alpha > 1) and a local equilibrium M
/// that is either sub-exponential, M ~ exp(-<v>^beta / beta), or polynomial,
/// M ~ <v>^(-d-gamma). Here <z> = sqrt(1 + |z|^2).
///
/// Everything in this header is a pure function of its arguments. Vector
/// arguments hold one component per dimension; the solver only uses d = 1,
/// but the Lyapunov formulas are evaluated for any d.

#include <cmath>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace kfp {

/// Raised when a parameter set violates a model invariant.
class InvalidParameters : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class EquilibriumKind { exponential, polynomial };

/// `theorem` enforces alpha > 1 and gamma > 1. `exploratory` admits the
/// limit cases alpha >= 1 and gamma > 0 (e.g. the linear-potential runs).
enum class Regime { theorem, exploratory };

/// Confinement and equilibrium parameters. Immutable; the normalization
/// constant of M is computed by quadrature at construction.
class ModelParams {
 public:
  static ModelParams exponential(double alpha, double beta, int dim = 1,
                                 Regime regime = Regime::theorem);
  static ModelParams polynomial(double alpha, double gamma, int dim = 1,
                                Regime regime = Regime::theorem);

  double alpha() const { return alpha_; }
  EquilibriumKind kind() const { return kind_; }
  /// beta for the exponential kind, gamma for the polynomial kind.
  double shape() const { return shape_; }
  double beta() const;
  double gamma() const;
  int dim() const { return dim_; }
  Regime regime() const { return regime_; }
  /// c_beta or d_gamma: the integral of the unnormalized equilibrium.
  double norm_const() const { return norm_const_; }

 private:
  ModelParams(double alpha, EquilibriumKind kind, double shape, int dim,
              Regime regime);

  double alpha_;
  EquilibriumKind kind_;
  double shape_;
  int dim_;
  Regime regime_;
  double norm_const_;
};

struct ExpWeight {
  double theta;  // in (0, 1]
  double delta;  // > 0
};

struct PolyWeight {
  double k;  // > 1
};

/// Candidate Lyapunov function
///
///   H = E^ell + eps <x>^A <v>^(-B) (x.v)
///
/// together with the weight m = Phi(H): exp(delta H^(theta/2)) or H^(k/ell).
struct LyapunovSpec {
  double ell = 2.0;
  double eps = 0.0;
  double a_exp = 0.0;  // A
  double b_exp = 0.5;  // B
  std::variant<ExpWeight, PolyWeight> mode = ExpWeight{1.0, 0.1};

  bool is_exp_weight() const { return std::holds_alternative<ExpWeight>(mode); }

  /// Checks the structural invariants, including the equivalence condition
  /// (A+1)_+/alpha + (1-B)/2 <= ell and k <= ell. Throws InvalidParameters.
  void validate(const ModelParams& params) const;

  /// A = alpha a, B = 1 - b (sub-exponential construction, ell = 2).
  static LyapunovSpec for_exp_equilibrium(const ModelParams& params, double eps,
                                          double a, double b, double theta,
                                          double delta);
  /// A = alpha (ell - 2 + a), B = 1 - b (polynomial construction).
  static LyapunovSpec for_poly_equilibrium(const ModelParams& params, double ell,
                                           double eps, double a, double b,
                                           double k);
};

struct PointEval {
  std::vector<double> x;
  std::vector<double> v;

  PointEval() = default;
  PointEval(std::vector<double> x_, std::vector<double> v_);
  /// d = 1 convenience.
  PointEval(double x_, double v_) : x{x_}, v{v_} {}
};

// ---------------------------------------------------------------------------
// Elementary objects

double jbracket(std::span<const double> z);
inline double jbracket(double z);

double potential(std::span<const double> x, const ModelParams& params);
std::vector<double> grad_potential(std::span<const double> x,
                                   const ModelParams& params);
double potential(double x, const ModelParams& params);
double grad_potential(double x, const ModelParams& params);

/// Normalized local equilibrium M(v).
double equilibrium(std::span<const double> v, const ModelParams& params);
double equilibrium(double v, const ModelParams& params);

/// grad_v M / M: -<v>^(beta-2) v or -(d+gamma) <v>^(-2) v.
std::vector<double> equilibrium_drift(std::span<const double> v,
                                      const ModelParams& params);
double equilibrium_drift(double v, const ModelParams& params);

/// Normalization integrals over R^d, valid for any beta > 0 and gamma > 0.
double exp_norm_const(double beta, int dim);
double poly_norm_const(double gamma, int dim);

double energy(const PointEval& p, const ModelParams& params);

// ---------------------------------------------------------------------------
// Lyapunov functions and the dual operator
//
// L* m = v.grad_x m - grad_x V . grad_v m + lap_v m + (grad_v M / M).grad_v m

double lyapunov_H(const PointEval& p, const ModelParams& params,
                  const LyapunovSpec& spec);
std::vector<double> grad_v_H(const PointEval& p, const ModelParams& params,
                             const LyapunovSpec& spec);

/// The weight m = Phi(H).
double lyapunov_weight(const PointEval& p, const ModelParams& params,
                       const LyapunovSpec& spec);

enum class LstarTarget {
  energy_power,  // E^ell
  cross_term,    // <x>^A <v>^(-B) (x.v), without the eps factor
  full_h,        // H
  weight_m,      // Phi(H)
};

double apply_Lstar_exact(const PointEval& p, const ModelParams& params,
                         const LyapunovSpec& spec, LstarTarget target);

/// phi(m) = m (ln m)^(-(1-theta)/theta) for exponential weights (with
/// phi(1) = 0), m^(1-1/k) for polynomial weights.
double phi(double mval, const LyapunovSpec& spec);

/// Decay shape exp(-lam t^theta), or (1+t)^(-k) for polynomial weights
/// (lam is unused there).
double theta_decay(double t, const LyapunovSpec& spec, double lam);

/// Large-|x| behaviour of rho(x) = int exp(-delta E(x,v)^(beta/2)) dv, d = 1.
double asymptotic_density(double x, double alpha, double beta, double delta);
double asymptotic_density_constant(double alpha, double beta, double delta);

// ---------------------------------------------------------------------------

inline double jbracket(double z) {
  return std::sqrt(1.0 + z * z);
}

}  // namespace kfp
