#pragma once

// Noise-concatenating multilayer perceptron g(x, eps): every hidden layer sees
// [previous activation, fresh Unif[0,1) noise block], followed by a dense
// output map and an optional direct linear term B*x.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "engression/nd_core.hpp"

namespace engression {

enum class Activation { Relu };

struct NetConfig {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  std::size_t hidden_dim = 100;
  std::size_t num_layers = 3;   // hidden layers; the output map is always one dense layer
  std::size_t noise_dim = 100;  // 0 gives a deterministic MLP
  Activation activation = Activation::Relu;
  bool skip = true;             // identity skip where a layer's input and output widths match
  bool linear_term = true;      // direct out_dim x in_dim map from x to y

  void validate() const;
  /// Width of the non-noise part of hidden layer `layer`'s input.
  std::size_t layer_input_dim(std::size_t layer) const { return layer == 0 ? in_dim : hidden_dim; }
  bool layer_has_skip(std::size_t layer) const { return skip && layer_input_dim(layer) == hidden_dim; }

  bool operator==(const NetConfig&) const = default;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  bool operator==(const DenseLayer&) const = default;
};

struct NetParams {
  std::vector<DenseLayer> hidden;
  DenseLayer output;
  Matrix linear;  // out_dim x in_dim; 0x0 when the config has no linear term

  /// Every parameter array in a fixed order: per hidden layer (weight, bias),
  /// output (weight, bias), linear term.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t num_values() const;
  bool all_finite() const;

  /// Same shapes, all zeros.
  static NetParams zeros_like(const NetParams& other);

  bool operator==(const NetParams&) const = default;
};

/// Intermediates of a batched forward pass. The noise used by hidden layer l is
/// the trailing noise_dim columns of inputs[l].
struct ForwardCache {
  Matrix x;
  std::vector<Matrix> inputs;  // concat(previous activation, noise), per hidden layer
  std::vector<Matrix> pre;     // pre-activations, per hidden layer
  Matrix last;                 // final hidden activation, input of the output map

  std::vector<Matrix> noise(std::size_t noise_dim) const;
};

struct ForwardResult {
  Matrix y;
  ForwardCache cache;
};

/// Weights uniform on [-sqrt(6/fan_in), sqrt(6/fan_in)], biases and linear term zero.
NetParams init_params(const NetConfig& config, Rng& rng);

/// Batched forward pass over the rows of `x`, drawing one fresh noise block per row per layer.
ForwardResult forward(const NetParams& params, const NetConfig& config, const Matrix& x, Rng& rng);
/// Forward pass with caller-supplied noise blocks (one rows x noise_dim matrix per hidden layer).
ForwardResult forward_with_noise(const NetParams& params, const NetConfig& config, const Matrix& x,
                                 std::span<const Matrix> noise);
/// Single input vector.
Vector forward(const NetParams& params, const NetConfig& config, std::span<const double> x, Rng& rng);
/// Inference-only forward pass (no cache kept). Draws noise in the same order as `forward`.
Matrix generate(const NetParams& params, const NetConfig& config, const Matrix& x, Rng& rng);

/// Gradient of <dy, y> with respect to every parameter, for the pass recorded in `cache`.
NetParams backward(const NetParams& params, const NetConfig& config, const ForwardCache& cache,
                   const Matrix& dy);

nlohmann::json to_json(const NetConfig& config);
NetConfig net_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NetParams& params);
NetParams net_params_from_json(const nlohmann::json& j, const NetConfig& config);

inline constexpr const char* kModelFormatVersion = "1";

/// Versioned JSON document {version, config, params}.
std::string serialize(const NetParams& params, const NetConfig& config);
/// Throws VersionError for an unsupported version and FormatError for anything malformed.
std::pair<NetParams, NetConfig> deserialize(const std::string& payload);

}  // namespace engression
