#pragma once

/// @file diagnostics.hpp
/// @brief Observables on fields and post-processing of time series.

#include "kfp/grid.hpp"
#include "kfp/model.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kfp {

/// rho_n = sum_m f_{n,m} dv.
std::vector<double> density(const Field& f);

/// sum_n rho_n dx, summed in the same order as density().
double mass(const Field& f);

/// sum |f - g| w dx dv, w = 1 when `weight` is null. Throws
/// std::invalid_argument on a grid mismatch.
double l1_distance(const Field& f, const Field& g, const Field* weight = nullptr);

/// The Lyapunov weight m evaluated at cell centres.
Field weight_field(const PhaseGrid& grid, const ModelParams& params,
                   const LyapunovSpec& spec);

/// exp(-delta E^{beta/2}) at cell centres; exponential equilibria only.
Field reference_profile(const PhaseGrid& grid, const ModelParams& params,
                        double delta, bool normalize = false);

struct EnergyScatter {
  std::vector<std::pair<double, double>> pairs;  ///< (E, f), one per cell
  double dispersion = 0.0;
  double relative_dispersion = 0.0;  ///< same, with residuals divided by the bin mean
  double e_lo = 0.0;
  double e_hi = 0.0;
  std::size_t occupied = 0;
};

inline constexpr int kEnergyBins = 64;
/// Cells with f below this fraction of max f are outside the occupied range.
inline constexpr double kOccupiedFraction = 1e-6;

/// Dispersion is the RMS deviation of f from its bin mean, over the occupied
/// cells binned into kEnergyBins uniform bins of E.
EnergyScatter energy_scatter(const Field& f, const ModelParams& params);

struct TailFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
  std::size_t samples = 0;
};

/// Least squares of log rho against s(x) = (<x>^alpha / alpha)^{beta/2} over
/// cells with x_lo <= |x| <= x_hi, optionally after dividing rho by the
/// algebraic prefactor |x|^{(alpha/2)(1 - beta/2)}.
TailFit log_tail_regression(std::span<const double> xs, std::span<const double> rho,
                            const ModelParams& params, double x_lo, double x_hi,
                            bool remove_prefactor = false);

struct TailComparison {
  double max_rel_deviation = 0.0;
  double fitted_delta = 0.0;
  TailFit fit;
  /// False when 1 / (delta V(x_lo)^{beta/2}) >= 0.25, i.e. the window sits in
  /// the core where the asymptotic form is not meaningful.
  bool asymptotic_regime = false;
};

/// Compares rho with asymptotic_density over the window. The fitted delta
/// comes from the prefactor-corrected regression. Throws std::domain_error
/// on nonpositive density in the window.
TailComparison tail_comparison(std::span<const double> xs, std::span<const double> rho,
                               const ModelParams& params, double delta,
                               double x_lo, double x_hi);

// ---------------------------------------------------------------------------

enum class RateMode { exp_theta, poly_k };

struct RateFit {
  RateMode mode = RateMode::exp_theta;
  double theta = 0.0;           ///< exp_theta only
  double fitted = 0.0;          ///< lambda or k
  double intercept = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  double residual_rms = 0.0;
  std::size_t samples = 0;
};

inline constexpr std::size_t kMinRateSamples = 8;

/// Fits log d = c - lambda t^theta (exp_theta) or log d = c - k log(1 + t)
/// (poly_k) after dropping t < t_0 + burn_fraction (t_max - t_0).
/// Throws std::invalid_argument on fewer than kMinRateSamples points after
/// the burn and std::domain_error on nonpositive distances.
RateFit rate_fit(std::span<const std::pair<double, double>> series, RateMode mode,
                 double theta = 0.25, double burn_fraction = 0.1);

// ---------------------------------------------------------------------------

struct DiagnosticsRecord {
  std::uint64_t step = 0;
  double time = 0.0;
  double mass = 0.0;
  std::optional<double> l1_distance_to_reference;
  std::optional<double> weighted_l1;
  double min_value = 0.0;
  double max_value = 0.0;
};

DiagnosticsRecord make_record(const Field& f, std::uint64_t step,
                              const Field* reference = nullptr,
                              const Field* weight = nullptr);

/// Reals in CSV files use 17 significant digits.
std::string format_real(double value);

void write_records_csv(std::ostream& out, std::span<const DiagnosticsRecord> records);
void write_density_csv(std::ostream& out, const PhaseGrid& grid,
                       std::span<const double> rho);
void write_snapshot_csv(std::ostream& out, const Field& f);
void write_scatter_csv(std::ostream& out, const EnergyScatter& scatter);
void write_rate_fit(std::ostream& out, const RateFit& fit);

/// Reads `t,distance` rows; blank lines and lines starting with '#' are
/// skipped, as is a non-numeric first row. Throws std::runtime_error naming
/// every malformed line.
std::vector<std::pair<double, double>> parse_series_csv(const std::string& text);

}  // namespace kfp
