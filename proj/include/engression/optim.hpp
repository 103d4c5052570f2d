#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include <json.hpp>

#include "engression/losses.hpp"
#include "engression/noisy_mlp.hpp"

namespace engression {

enum class OptimizerKind { Adam, GradientDescent };

/// Bias-corrected Adam over a flat parameter vector.
struct AdamState {
  Vector m;
  Vector v;
  std::size_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t num_values, double lr);

  /// One update of `params` in place. Throws ContractError when sizes disagree with the state.
  void update(std::span<double> params, std::span<const double> grads);
};

/// Adam step over every tensor of `params`, flattened in NetParams::tensors() order.
void adam_step(NetParams& params, const NetParams& grads, AdamState& state);
void gd_step(NetParams& params, const NetParams& grads, double lr);

struct TrainConfig {
  std::size_t steps = 1000;
  double lr = 1e-2;
  double lr_end = 0.0;  // > 0: geometric decay from lr to lr_end over the run
  std::size_t batch_size = 0;  // 0 = full batch
  std::size_t m_per_obs = 2;
  LossSpec loss = LossSpec::energy();
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainResult {
  NetParams params;
  Vector loss_trace;
};

/// Called after every step with (step, loss).
using TrainObserver = std::function<void(std::size_t, double)>;

/// Runs `config.steps` optimizer steps. Each step draws m_per_obs fresh noise
/// blocks per observation of the (mini-)batch. Throws DivergenceError on a
/// non-finite loss.
TrainResult train(NetParams params, const NetConfig& net, const Matrix& x, const Matrix& y,
                  const TrainConfig& config, Rng& rng, const TrainObserver& observer = {});

/// Each row of `x` repeated `times` times consecutively.
Matrix repeat_rows(const Matrix& x, std::size_t times);

}  // namespace engression
