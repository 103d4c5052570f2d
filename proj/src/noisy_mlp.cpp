#include "engression/noisy_mlp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "engression/errors.hpp"

namespace engression {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) { return ConstMap(m.data(), m.rows(), m.cols()); }
MutMap view(Matrix& m) { return MutMap(m.data(), m.rows(), m.cols()); }

// out = a * w^T + bias (broadcast over rows)
void affine(const Matrix& a, const DenseLayer& layer, Matrix& out) {
  out = Matrix(a.rows(), layer.weight.rows());
  if (a.cols() > 0) view(out).noalias() = view(a) * view(layer.weight).transpose();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
  }
}

// grad += d^T * a
void accumulate_outer(const Matrix& d, const Matrix& a, Matrix& grad) {
  if (d.rows() == 0) return;
  view(grad).noalias() += view(d).transpose() * view(a);
}

void accumulate_colsum(const Matrix& d, Vector& out) {
  for (std::size_t r = 0; r < d.rows(); ++r) {
    auto row = d.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c];
  }
}

// [prev, noise] with the noise block either copied from `noise` or drawn from `rng`.
Matrix layer_input(const Matrix& prev, std::size_t noise_dim, const Matrix* noise, Rng* rng) {
  if (noise_dim == 0) return prev;
  const std::size_t n = prev.rows();
  const std::size_t p = prev.cols();
  Matrix in(n, p + noise_dim);
  for (std::size_t r = 0; r < n; ++r) {
    auto dst = in.row(r);
    const auto src = prev.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    if (noise) {
      const auto z = noise->row(r);
      std::copy(z.begin(), z.end(), dst.begin() + static_cast<std::ptrdiff_t>(p));
    } else {
      for (std::size_t j = p; j < p + noise_dim; ++j) dst[j] = rng->uniform();
    }
  }
  return in;
}

// Applies ReLU to `pre` and the identity skip from `prev` when present.
Matrix activate(const Matrix& pre, const Matrix& prev, bool skip) {
  Matrix act(pre.rows(), pre.cols());
  const auto p = pre.values();
  auto a = act.values();
  for (std::size_t i = 0; i < p.size(); ++i) a[i] = p[i] > 0.0 ? p[i] : 0.0;
  if (skip) {
    const auto s = prev.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += s[i];
  }
  return act;
}

void check_input(const NetConfig& config, const Matrix& x) {
  if (x.cols() != config.in_dim) {
    throw ShapeError("noisy_mlp: input has " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(config.in_dim));
  }
}

Matrix output_map(const NetParams& params, const NetConfig& config, const Matrix& last, const Matrix& x) {
  Matrix y;
  affine(last, params.output, y);
  if (config.linear_term) view(y).noalias() += view(x) * view(params.linear).transpose();
  return y;
}

}  // namespace

void NetConfig::validate() const {
  if (in_dim == 0) throw DomainError("NetConfig: in_dim must be positive");
  if (out_dim == 0) throw DomainError("NetConfig: out_dim must be positive");
  if (hidden_dim == 0) throw DomainError("NetConfig: hidden_dim must be positive");
  if (num_layers == 0) throw DomainError("NetConfig: num_layers must be at least 1");
}

std::vector<std::span<double>> NetParams::tensors() {
  std::vector<std::span<double>> out;
  for (auto& layer : hidden) {
    out.emplace_back(layer.weight.values());
    out.emplace_back(layer.bias);
  }
  out.emplace_back(output.weight.values());
  out.emplace_back(output.bias);
  out.emplace_back(linear.values());
  return out;
}

std::vector<std::span<const double>> NetParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& layer : hidden) {
    out.emplace_back(layer.weight.values());
    out.emplace_back(layer.bias);
  }
  out.emplace_back(output.weight.values());
  out.emplace_back(output.bias);
  out.emplace_back(linear.values());
  return out;
}

std::size_t NetParams::num_values() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

bool NetParams::all_finite() const {
  for (auto t : tensors())
    for (double v : t)
      if (!std::isfinite(v)) return false;
  return true;
}

NetParams NetParams::zeros_like(const NetParams& other) {
  NetParams z = other;
  for (auto t : z.tensors()) std::fill(t.begin(), t.end(), 0.0);
  return z;
}

std::vector<Matrix> ForwardCache::noise(std::size_t noise_dim) const {
  std::vector<Matrix> out;
  for (const auto& in : inputs) {
    std::vector<std::size_t> idx(noise_dim);
    for (std::size_t j = 0; j < noise_dim; ++j) idx[j] = in.cols() - noise_dim + j;
    out.push_back(take_cols(in, idx));
  }
  return out;
}

NetParams init_params(const NetConfig& config, Rng& rng) {
  config.validate();
  auto dense = [&rng](std::size_t out, std::size_t in) {
    DenseLayer layer{Matrix(out, in), Vector(out, 0.0)};
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
    return layer;
  };
  NetParams params;
  for (std::size_t l = 0; l < config.num_layers; ++l)
    params.hidden.push_back(dense(config.hidden_dim, config.layer_input_dim(l) + config.noise_dim));
  params.output = dense(config.out_dim, config.hidden_dim);
  if (config.linear_term) params.linear = Matrix(config.out_dim, config.in_dim);
  return params;
}

namespace {

// Noise comes from `noise` (one block per layer) when given, else from `rng`.
ForwardResult run_forward(const NetParams& params, const NetConfig& config, const Matrix& x,
                          std::span<const Matrix> noise, Rng* rng, bool keep_cache) {
  ForwardResult res;
  auto& cache = res.cache;
  Matrix prev = x;
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    Matrix in = layer_input(prev, config.noise_dim, noise.empty() ? nullptr : &noise[l], rng);
    Matrix pre;
    affine(in, params.hidden[l], pre);
    Matrix act = activate(pre, prev, config.layer_has_skip(l));
    if (keep_cache) {
      cache.inputs.push_back(std::move(in));
      cache.pre.push_back(std::move(pre));
    }
    prev = std::move(act);
  }
  res.y = output_map(params, config, prev, x);
  if (keep_cache) {
    cache.x = x;
    cache.last = std::move(prev);
  }
  return res;
}

}  // namespace

ForwardResult forward_with_noise(const NetParams& params, const NetConfig& config, const Matrix& x,
                                 std::span<const Matrix> noise) {
  check_input(config, x);
  if (noise.size() != config.num_layers) throw ShapeError("forward: need one noise block per hidden layer");
  for (const auto& z : noise)
    if (z.rows() != x.rows() || z.cols() != config.noise_dim) throw ShapeError("forward: noise block shape mismatch");
  return run_forward(params, config, x, noise, nullptr, true);
}

ForwardResult forward(const NetParams& params, const NetConfig& config, const Matrix& x, Rng& rng) {
  check_input(config, x);
  return run_forward(params, config, x, {}, &rng, true);
}

Vector forward(const NetParams& params, const NetConfig& config, std::span<const double> x, Rng& rng) {
  Matrix xm(1, x.size(), Vector(x.begin(), x.end()));
  Matrix y = generate(params, config, xm, rng);
  return Vector(y.values().begin(), y.values().end());
}

Matrix generate(const NetParams& params, const NetConfig& config, const Matrix& x, Rng& rng) {
  check_input(config, x);
  return run_forward(params, config, x, {}, &rng, false).y;
}

NetParams backward(const NetParams& params, const NetConfig& config, const ForwardCache& cache,
                   const Matrix& dy) {
  const std::size_t n = cache.x.rows();
  if (cache.inputs.size() != config.num_layers || cache.pre.size() != config.num_layers ||
      params.hidden.size() != config.num_layers || cache.last.rows() != n ||
      cache.last.cols() != config.hidden_dim || cache.x.cols() != config.in_dim) {
    throw ContractError("backward: cache does not match the network configuration");
  }
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    if (cache.inputs[l].rows() != n || cache.pre[l].rows() != n ||
        cache.inputs[l].cols() != params.hidden[l].weight.cols() ||
        cache.pre[l].cols() != params.hidden[l].weight.rows()) {
      throw ContractError("backward: stale cache for hidden layer " + std::to_string(l));
    }
  }
  if (dy.rows() != n || dy.cols() != config.out_dim) throw ShapeError("backward: dy shape mismatch");

  NetParams grad = NetParams::zeros_like(params);
  accumulate_outer(dy, cache.last, grad.output.weight);
  accumulate_colsum(dy, grad.output.bias);
  if (config.linear_term) accumulate_outer(dy, cache.x, grad.linear);

  Matrix d_act(n, config.hidden_dim);
  if (n > 0) view(d_act).noalias() = view(dy) * view(params.output.weight);

  for (std::size_t li = config.num_layers; li-- > 0;) {
    Matrix dz = d_act;
    {
      auto z = dz.values();
      const auto p = cache.pre[li].values();
      for (std::size_t i = 0; i < z.size(); ++i)
        if (!(p[i] > 0.0)) z[i] = 0.0;
    }
    accumulate_outer(dz, cache.inputs[li], grad.hidden[li].weight);
    accumulate_colsum(dz, grad.hidden[li].bias);
    if (li == 0) break;

    const std::size_t prev_dim = config.layer_input_dim(li);
    // The noise columns need no gradient.
    Matrix d_prev(n, prev_dim);
    if (n > 0)
      view(d_prev).noalias() = view(dz) * view(params.hidden[li].weight).leftCols(static_cast<Eigen::Index>(prev_dim));
    if (config.layer_has_skip(li)) {
      auto dp = d_prev.values();
      const auto da = d_act.values();
      for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += da[i];
    }
    d_act = std::move(d_prev);
  }
  return grad;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.values().begin(), m.values().end())}};
}

Matrix matrix_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols, const char* what) {
  const auto r = j.at("rows").get<std::size_t>();
  const auto c = j.at("cols").get<std::size_t>();
  if (r != rows || c != cols) throw FormatError(std::string("model file: ") + what + " has the wrong shape");
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != r * c) throw FormatError(std::string("model file: ") + what + " data length mismatch");
  return Matrix(r, c, std::move(data));
}

DenseLayer layer_from_json(const nlohmann::json& j, std::size_t out, std::size_t in, const char* what) {
  DenseLayer layer{matrix_from_json(j.at("weight"), out, in, what), j.at("bias").get<Vector>()};
  if (layer.bias.size() != out) throw FormatError(std::string("model file: ") + what + " bias length mismatch");
  return layer;
}

}  // namespace

nlohmann::json to_json(const NetConfig& config) {
  return {{"in_dim", config.in_dim},         {"out_dim", config.out_dim},
          {"hidden_dim", config.hidden_dim}, {"num_layers", config.num_layers},
          {"noise_dim", config.noise_dim},   {"activation", "relu"},
          {"skip", config.skip},             {"linear_term", config.linear_term}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.in_dim = j.at("in_dim").get<std::size_t>();
  c.out_dim = j.at("out_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.noise_dim = j.at("noise_dim").get<std::size_t>();
  if (j.value("activation", std::string("relu")) != "relu") throw FormatError("model file: unknown activation");
  c.skip = j.at("skip").get<bool>();
  c.linear_term = j.at("linear_term").get<bool>();
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const NetParams& params) {
  nlohmann::json hidden = nlohmann::json::array();
  for (const auto& layer : params.hidden) hidden.push_back({{"weight", matrix_json(layer.weight)}, {"bias", layer.bias}});
  return {{"hidden", hidden},
          {"output", {{"weight", matrix_json(params.output.weight)}, {"bias", params.output.bias}}},
          {"linear", matrix_json(params.linear)}};
}

NetParams net_params_from_json(const nlohmann::json& j, const NetConfig& config) {
  NetParams p;
  const auto& hidden = j.at("hidden");
  if (!hidden.is_array() || hidden.size() != config.num_layers) throw FormatError("model file: hidden layer count mismatch");
  for (std::size_t l = 0; l < config.num_layers; ++l)
    p.hidden.push_back(layer_from_json(hidden[l], config.hidden_dim, config.layer_input_dim(l) + config.noise_dim, "hidden layer"));
  p.output = layer_from_json(j.at("output"), config.out_dim, config.hidden_dim, "output layer");
  if (config.linear_term) p.linear = matrix_from_json(j.at("linear"), config.out_dim, config.in_dim, "linear term");
  return p;
}

std::string serialize(const NetParams& params, const NetConfig& config) {
  nlohmann::json doc = {{"version", kModelFormatVersion}, {"config", to_json(config)}, {"params", to_json(params)}};
  return doc.dump();
}

std::pair<NetParams, NetConfig> deserialize(const std::string& payload) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("version")) throw FormatError("model file: missing version");
    const auto& v = doc.at("version");
    const std::string version = v.is_string() ? v.get<std::string>() : v.dump();
    if (version != kModelFormatVersion)
      throw VersionError("model file: unsupported version " + version + " (supported: 1)");
    NetConfig config = net_config_from_json(doc.at("config"));
    NetParams params = net_params_from_json(doc.at("params"), config);
    return {std::move(params), config};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

}  // namespace engression
