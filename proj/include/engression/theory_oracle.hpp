#pragma once

// Closed-form extrapolation uncertainties and gains for monotone pre-additive
// noise models, quadratic ground truth, and empirical-CDF concentration bounds.

#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace engression {

enum class NoiseKind { Uniform, GaussianTruncated, Gaussian };

/// Symmetric noise law. Uniform lives on [-eta_max, eta_max]; GaussianTruncated
/// is N(0, sd^2) conditioned on that interval.
struct NoiseDist {
  NoiseKind kind = NoiseKind::Uniform;
  double sd = 1.0;
  double eta_max = 1.0;

  static NoiseDist uniform(double eta_max);
  static NoiseDist truncated_gaussian(double sd, double eta_max);
  static NoiseDist gaussian(double sd);

  bool bounded() const { return kind != NoiseKind::Gaussian; }
  double cdf(double x) const;
  double pdf(double x) const;
  double quantile(double alpha) const;
  double second_moment() const;
  /// Points where the density is not smooth.
  std::vector<double> breakpoints() const;
  void validate() const;
};

struct GainResult {
  double uncertainty_engression = 0.0;
  double uncertainty_baseline = 0.0;
  double gain = 0.0;
};

/// Adaptive Simpson quadrature of f on [a, b] split at `breaks`, absolute tolerance `tol`.
/// Throws NumericError if the recursion depth is exhausted before convergence.
double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-10,
                 const std::vector<double>& breaks = {});

GainResult median_uncertainty_gain(double lipschitz, double eta_max, double delta);
GainResult mean_uncertainty_gain(double lipschitz, const NoiseDist& noise, double delta);
/// Wasserstein order `ell` in [1, inf]; pass infinity for the sup-norm case.
GainResult dist_uncertainty_gain(double lipschitz, const NoiseDist& noise, double delta, double ell);

inline constexpr double kInfiniteOrder = std::numeric_limits<double>::infinity();

struct QuadraticTruth {
  double mean = 0.0;
  double median = 0.0;
  std::optional<double> quantile;
};

/// Conditional law of b0 + b1 (x + eta) + b2 (x + eta)^2 for symmetric eta.
/// The quantile formula assumes the map is increasing on the noise support.
QuadraticTruth quadratic_truth(const std::array<double, 3>& beta, const NoiseDist& noise, double x,
                               std::optional<double> alpha = std::nullopt);

/// support_length * log(2 / delta) / (2 n).
double dkw_cramer_bound(double support_length, double confidence_delta, double n);
/// (3 * cramer_distance / b^2)^(1/3).
double quantile_gap_bound(double cramer_distance, double density_lower_bound);

}  // namespace engression
