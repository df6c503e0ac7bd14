#pragma once

/// @file lyapunov_verify.hpp
/// @brief Finite-difference L* oracle and a sampled certifier for drift
/// inequalities of the form  L* m <= C 1_{B_R} - kappa phi(m).

#include "kfp/model.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace kfp {

using ScalarField = std::function<double(const PointEval&)>;

struct ScanConfig {
  double x_scan = 50.0;
  double v_scan = 50.0;
  int samples_per_axis = 256;
  std::vector<double> radii = {2.0, 4.0, 6.0, 8.0, 10.0, 15.0, 20.0, 25.0,
                               30.0, 35.0, 40.0, 45.0};
  double fd_step = 1e-4;
  /// kappa in front of phi(m). 0 means "measure it": the certificate then
  /// requires L* m < 0 outside B_R and reports kappa = min(-L* m / phi(m)).
  double phi_scale = 0.0;

  void validate() const;
};

struct CertificateReport {
  bool passed = false;
  double chosen_R = 0.0;
  double chosen_C = 0.0;
  /// Literal kappa: min of -L*m - kappa phi(m) outside B_R.
  /// Measured kappa: min of -L*m / phi(m) outside B_R (equals phi_scale).
  double min_margin_outside = 0.0;
  PointEval worst_point;
  LyapunovSpec spec_echo;
  double phi_scale = 0.0;
  bool phi_scale_measured = true;
  bool in_theorem_range = false;
  std::size_t samples = 0;
};

/// The four pieces of the finite-difference L* F; value() is their sum.
struct LstarTerms {
  double transport = 0.0;  // v . grad_x F
  double force = 0.0;      // -grad V . grad_v F
  double diffusion = 0.0;  // lap_v F
  double drift = 0.0;      // (grad_v M / M) . grad_v F

  double value() const { return transport + force + diffusion + drift; }
  /// Sum of magnitudes; the natural scale for relative errors of value().
  double magnitude() const;
};

/// Centered differences with step h * <(x, v)> in every coordinate.
LstarTerms apply_Lstar_fd_terms(const ScalarField& f, const PointEval& p,
                                const ModelParams& params, double h);
double apply_Lstar_fd(const ScalarField& f, const PointEval& p,
                      const ModelParams& params, double h);
/// (4 L*_{h/2} - L*_h) / 3, applied termwise.
LstarTerms apply_Lstar_fd_richardson(const ScalarField& f, const PointEval& p,
                                     const ModelParams& params, double h);

/// theta <= min(1, beta/2) for exponential weights on an exponential
/// equilibrium; 3/2 < ell < 1 + gamma/2 and k <= ell for polynomial weights
/// on a polynomial equilibrium (any k > 1 on an exponential one).
bool in_theorem_range(const ModelParams& params, const LyapunovSpec& spec);

/// Sample points of the scan: a tensor grid plus both coordinate axes.
std::vector<PointEval> scan_points(const ScanConfig& cfg);

CertificateReport scan_drift_inequality(const ModelParams& params,
                                        const LyapunovSpec& spec,
                                        const ScanConfig& cfg);

/// min and max of H / E^ell over the scan points.
std::pair<double, double> equivalence_constants(const ModelParams& params,
                                                const LyapunovSpec& spec,
                                                const ScanConfig& cfg);

/// Coarse search grid for the certifier. The weight exponent (theta or k)
/// and ell are fixed by the caller through `base`.
struct CandidateGrid {
  std::vector<double> eps = {1e-3, 1e-2, 5e-2, 1e-1, 3e-1};
  std::vector<double> a_exp = {0.05, 0.25, 0.5, 1.0, 2.0};
  std::vector<double> b_exp = {0.95, 0.8, 0.6};
  /// Only used for exponential weights.
  std::vector<double> delta = {1e-2, 3e-2, 1e-1};
};

struct CandidateResult {
  LyapunovSpec spec;
  CertificateReport report;
  std::size_t tried = 0;
};

/// Walks the grid in a fixed order (delta, eps, A, B) and returns the first
/// admissible spec whose certificate passes.
std::optional<CandidateResult> search_lyapunov_candidates(
    const ModelParams& params, const LyapunovSpec& base,
    const CandidateGrid& grid, const ScanConfig& cfg);

}  // namespace kfp
