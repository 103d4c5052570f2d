#pragma once

// Training losses and evaluation distances.
//
// Generated samples for a batch of n observations with m draws each are stored
// as an (n*m) x k matrix, observation-major: row i*m + j is draw j of observation i.

#include <cstddef>
#include <span>
#include <string>

#include "engression/nd_core.hpp"

namespace engression {

enum class KernelKind { Energy, Gaussian, Laplace, InverseMultiquadric };

/// Positive-definite (or conditionally p.d.) kernel on R^k.
///   Energy:   -|z - z'|
///   Gaussian: exp(-|z - z'|^2 / (2 sigma))
///   Laplace:  exp(-|z - z'| / sigma)
///   IMQ:      1 / sqrt(|z - z'|^2 + c)
struct Kernel {
  KernelKind kind = KernelKind::Gaussian;
  double param = 1.0;  // sigma, or c for IMQ; ignored for Energy

  double operator()(std::span<const double> a, std::span<const double> b) const;
  /// out += scale * d k(a, b) / d a
  void add_grad(std::span<const double> a, std::span<const double> b, double scale, std::span<double> out) const;
  void validate() const;
};

enum class LossKind { Energy, KernelGaussian, KernelLaplace, KernelIMQ, L1, L2, Pinball };

struct LossSpec {
  LossKind kind = LossKind::Energy;
  double param = 1.0;  // sigma / c / alpha depending on kind

  static LossSpec energy() { return {LossKind::Energy, 1.0}; }
  static LossSpec gaussian(double sigma = 1.0) { return {LossKind::KernelGaussian, sigma}; }
  static LossSpec laplace(double sigma = 1.0) { return {LossKind::KernelLaplace, sigma}; }
  static LossSpec imq(double c = 1.0) { return {LossKind::KernelIMQ, c}; }
  static LossSpec l1() { return {LossKind::L1, 0.5}; }
  static LossSpec l2() { return {LossKind::L2, 0.0}; }
  static LossSpec pinball(double alpha) { return {LossKind::Pinball, alpha}; }

  /// "energy", "gaussian[:sigma]", "laplace[:sigma]", "imq[:c]", "l1", "l2", "pinball:alpha".
  static LossSpec parse(const std::string& text);
  std::string to_string() const;

  /// Energy and kernel losses compare sample sets and need m >= 2 draws per observation.
  bool distributional() const;
  Kernel kernel() const;
  void validate() const;

  bool operator==(const LossSpec&) const = default;
};

struct LossAndGrad {
  double value = 0.0;
  Matrix grad;  // same shape as the samples
};

/// (1/n) sum_i [ (1/m) sum_j |y_i - g_ij| - 1/(2m(m-1)) sum_j sum_j' |g_ij - g_ij'| ].
double energy_loss_batch(const Matrix& y, const Matrix& samples, std::size_t m);
/// Gradient of energy_loss_batch with respect to each sample; the norm's subgradient at 0 is 0.
Matrix energy_loss_grad(const Matrix& y, const Matrix& samples, std::size_t m);

/// (1/n) sum_i [ -(1/m) sum_j k(g_ij, y_i) + 1/(2m(m-1)) sum_{j != j'} k(g_ij, g_ij') ].
double kernel_loss_batch(const Matrix& y, const Matrix& samples, std::size_t m, const Kernel& kernel);
Matrix kernel_loss_grad(const Matrix& y, const Matrix& samples, std::size_t m, const Kernel& kernel);

/// Mean over rows of rho_alpha(y - pred), summed over output columns.
double pinball_loss(std::span<const double> y, std::span<const double> pred, double alpha);

/// Value and sample gradient of any LossSpec. For pointwise losses every draw is
/// scored as its own prediction of y_i and the result is averaged over draws.
LossAndGrad evaluate_loss(const LossSpec& spec, const Matrix& y, const Matrix& samples, std::size_t m);

/// Unbiased Monte-Carlo energy score 1/2 mean_{j != j'} |Z_j - Z_j'| - mean_j |Z_j - z|
/// (higher is better). Samples are rows of an m x k matrix.
double energy_score_mc(const Matrix& samples, std::span<const double> z);
/// 2 mean |Z - Z'| - mean_{j != j'} |Z - Z~| - mean_{j != j'} |Z' - Z~'|.
double energy_distance_mc(const Matrix& p, const Matrix& q);
/// Exact integral of (F_a - F_b)^2 for the empirical CDFs of two univariate samples.
double cramer_distance_exact(std::span<const double> a, std::span<const double> b);
/// Sample CRPS in loss orientation: integral of (F_hat(t) - 1{t >= z})^2 dt.
double crps_sample(std::span<const double> samples, double z);
/// Closed-form CRPS of N(mu, sd^2) at z, loss orientation.
double crps_gaussian(double mu, double sd, double z);
/// Unbiased squared MMD with within-set pair means over distinct pairs.
double mmd_squared(const Matrix& p, const Matrix& q, const Kernel& kernel);

}  // namespace engression
