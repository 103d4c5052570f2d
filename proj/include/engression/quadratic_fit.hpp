#pragma once

// Quadratic pre-additive-noise model b0 + b1 (x + h) + b2 (x + h)^2 with a learned
// symmetric noise quantile table h, fitted by minimizing the exact Cramér
// distance between model and empirical conditional CDFs at each observed x.
// Also: plain quadratic-feature regression for the non-uniqueness harness.

#include <array>
#include <cstddef>
#include <span>

#include "engression/losses.hpp"
#include "engression/nd_core.hpp"

namespace engression {

struct CramerFitConfig {
  std::size_t grid = 101;  // odd; noise quantile levels (k + 0.5) / grid
  std::size_t steps = 4000;
  double lr_start = 0.05;
  double lr_end = 1e-4;  // geometric decay from lr_start
};

struct QuadraticPreAnmFit {
  std::array<double, 3> beta{};
  Vector noise_table;  // grid values, symmetric about the middle entry (which is 0), nondecreasing
  double loss = 0.0;   // weighted Cramér distance at the returned parameters

  /// Model atoms b(x + h_k), sorted ascending.
  Vector atoms(double x) const;
  double quantile(double x, double alpha) const;
  double mean(double x) const;
};

/// Fits on data whose covariate takes finitely many values (each group weighted by its frequency).
QuadraticPreAnmFit fit_quadratic_cramer(const Matrix& x, const Matrix& y, const CramerFitConfig& config = {});

/// Euclidean projection onto {0 <= u_1 <= ... <= u_n}.
void project_nonneg_monotone(std::span<double> u);

struct QuadraticRegressionConfig {
  std::size_t steps = 20000;
  double init_scale = 1.0;  // initial coefficients uniform on [-init_scale, init_scale]
};

/// Gradient descent on features (1, x, x^2) from `init`, L2 or pinball loss. Every step
/// stays in the span of the observed features, so the component of `init` that the
/// design cannot see is kept.
std::array<double, 3> fit_quadratic_regression(const Matrix& x, const Matrix& y, const LossSpec& loss,
                                               std::array<double, 3> init, std::size_t steps);

struct RegressionSpread {
  double in_support_range = 0.0;  // max over observed x of the prediction range across inits
  double out_support_range = 0.0; // prediction range across inits at the evaluation point
  Vector out_predictions;
};

/// Refits from `inits` random starts and reports how far the predictions disagree.
RegressionSpread quadratic_regression_spread(const Matrix& x, const Matrix& y, const LossSpec& loss, double x_eval,
                                             std::size_t inits, const QuadraticRegressionConfig& config, Rng& rng);

}  // namespace engression
