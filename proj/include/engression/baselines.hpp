#pragma once

// Point-prediction baselines: deterministic-net L1/L2 regression, least squares
// and linear quantile regression.

#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "engression/engression.hpp"

namespace engression {

enum class BaselineKind { NnL1, NnL2, LinearOls, LinearQr };

std::string to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& s);

struct BaselineModel {
  BaselineKind kind = BaselineKind::LinearOls;
  /// Deterministic net and its normalization (NN kinds only).
  std::optional<EngressionModel> net;
  /// (1 + d) x outputs, intercept first; one column per response (OLS) or per alpha (QR).
  Matrix coef;
  Vector alphas;
  bool jittered = false;  // normal equations were singular and a ridge of 1e-8 was added

  /// rows x k for NN and OLS, rows x alphas.size() for QR.
  Matrix predict(const Matrix& x) const;

  std::string save() const;
  static BaselineModel load(const std::string& payload);
};

/// Trains the configured net with noise_dim forced to 0 and one draw per
/// observation. `loss` must be L1 or L2.
BaselineModel fit_nn_regression(const Matrix& x, const Matrix& y, const LossSpec& loss, NetConfig net,
                                TrainConfig train, Rng& rng);

BaselineModel fit_linear_ols(const Matrix& x, const Matrix& y);

/// Per-alpha linear pinball regression by Adam subgradient steps on standardized
/// data. The returned coefficients average the iterates of the second half of the run.
BaselineModel fit_linear_quantile(const Matrix& x, const Matrix& y, std::span<const double> alphas,
                                  const TrainConfig& train);

}  // namespace engression
