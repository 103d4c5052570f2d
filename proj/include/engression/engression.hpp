#pragma once

// Engression estimator: a noisy MLP fitted with a distributional loss on
// standardized data, queried by Monte-Carlo sampling.

#include <cstddef>
#include <span>
#include <string>

#include <json.hpp>

#include "engression/noisy_mlp.hpp"
#include "engression/optim.hpp"

namespace engression {

/// Per-coordinate standardization statistics from a training set.
struct Normalization {
  Vector x_mean, x_std, y_mean, y_std;
  bool degenerate = false;  // some column had zero variance; its std was set to 1

  static Normalization fit(const Matrix& x, const Matrix& y);

  Matrix standardize_x(const Matrix& x) const;
  Matrix standardize_y(const Matrix& y) const;
  Matrix destandardize_y(const Matrix& y) const;

  bool operator==(const Normalization&) const = default;
};

nlohmann::json to_json(const Normalization& n);
Normalization normalization_from_json(const nlohmann::json& j);

inline constexpr std::size_t kDefaultSamples = 512;

class EngressionModel {
 public:
  EngressionModel() = default;
  EngressionModel(NetConfig net, NetParams params, TrainConfig train, Normalization norm, Vector loss_trace = {});

  /// Standardizes by training statistics and trains the network. The network's
  /// in_dim/out_dim are taken from the data.
  static EngressionModel fit(const Matrix& x, const Matrix& y, const TrainConfig& train, NetConfig net, Rng& rng,
                             const TrainObserver& observer = {});

  /// nsample x k draws from the fitted conditional distribution at one covariate vector.
  Matrix sample(std::span<const double> x, std::size_t nsample, Rng& rng) const;
  /// (rows * nsample) x k draws, observation-major.
  Matrix sample_batch(const Matrix& x, std::size_t nsample, Rng& rng) const;

  Matrix predict_mean(const Matrix& x, Rng& rng, std::size_t nsample = kDefaultSamples) const;
  /// rows x alphas.size(); one shared draw set per row. Univariate responses only.
  Matrix predict_quantile(const Matrix& x, std::span<const double> alphas, Rng& rng,
                          std::size_t nsample = kDefaultSamples) const;
  Matrix predict_median(const Matrix& x, Rng& rng, std::size_t nsample = kDefaultSamples) const;
  /// rows x 2 of (lower, upper) at quantile levels (1 -+ level) / 2.
  Matrix prediction_interval(const Matrix& x, Rng& rng, double level = 0.95,
                             std::size_t nsample = kDefaultSamples) const;

  std::string save() const;
  /// Throws VersionError / FormatError like `deserialize`.
  static EngressionModel load(const std::string& payload);
  /// Model document tagged with `kind`; baselines reuse the layout for deterministic nets.
  nlohmann::json to_document(const std::string& kind) const;
  static EngressionModel from_document(const nlohmann::json& doc, const std::string& kind);

  const NetConfig& net_config() const { return net_; }
  const NetParams& params() const { return params_; }
  const TrainConfig& train_config() const { return train_; }
  const Normalization& normalization() const { return norm_; }
  const Vector& loss_trace() const { return loss_trace_; }
  bool degenerate_column_warning() const { return norm_.degenerate; }
  std::size_t in_dim() const { return net_.in_dim; }
  std::size_t out_dim() const { return net_.out_dim; }

 private:
  void check_x(const Matrix& x) const;

  NetConfig net_;
  NetParams params_;
  TrainConfig train_;
  Normalization norm_;
  Vector loss_trace_;
};

/// Model file "kind" tag of an engression fit.
inline constexpr const char* kEngressionKind = "engression";

}  // namespace engression
