#include "engression/optim.hpp"

#include <algorithm>
#include <cmath>

#include "engression/errors.hpp"

namespace engression {

AdamState::AdamState(std::size_t num_values, double lr) : m(num_values, 0.0), v(num_values, 0.0), lr(lr) {}

void AdamState::update(std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || params.size() != m.size())
    throw ContractError("adam: parameter, gradient and state sizes differ");
  ++t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

namespace {

void check_same_shapes(const std::vector<std::span<double>>& p, const std::vector<std::span<const double>>& g) {
  if (p.size() != g.size()) throw ContractError("optimizer: parameter and gradient layouts differ");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i].size() != g[i].size()) throw ContractError("optimizer: parameter and gradient shapes differ");
}

}  // namespace

void adam_step(NetParams& params, const NetParams& grads, AdamState& state) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  check_same_shapes(p, g);
  std::size_t total = 0;
  for (auto t : p) total += t.size();
  if (total != state.m.size()) throw ContractError("adam: state was built for a different parameter count");

  Vector flat_p;
  Vector flat_g;
  flat_p.reserve(total);
  flat_g.reserve(total);
  for (std::size_t i = 0; i < p.size(); ++i) {
    flat_p.insert(flat_p.end(), p[i].begin(), p[i].end());
    flat_g.insert(flat_g.end(), g[i].begin(), g[i].end());
  }
  state.update(flat_p, flat_g);
  std::size_t off = 0;
  for (auto t : p) {
    std::copy_n(flat_p.begin() + static_cast<std::ptrdiff_t>(off), t.size(), t.begin());
    off += t.size();
  }
}

void gd_step(NetParams& params, const NetParams& grads, double lr) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  check_same_shapes(p, g);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p[i].size(); ++j) p[i][j] -= lr * g[i][j];
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw DomainError("train: learning rate must be positive");
  if (!(lr_end >= 0.0) || !std::isfinite(lr_end)) throw DomainError("train: lr_end must be nonnegative");
  loss.validate();
  if (loss.distributional() && m_per_obs < 2)
    throw DomainError("train: distributional losses need m_per_obs >= 2");
  if (m_per_obs == 0) throw DomainError("train: m_per_obs must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"lr", c.lr},
          {"lr_end", c.lr_end},
          {"batch_size", c.batch_size},
          {"m_per_obs", c.m_per_obs},
          {"loss", c.loss.to_string()},
          {"seed", c.seed},
          {"optimizer", c.optimizer == OptimizerKind::Adam ? "adam" : "gd"}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.steps = j.at("steps").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.lr_end = j.value("lr_end", 0.0);
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.m_per_obs = j.at("m_per_obs").get<std::size_t>();
  c.loss = LossSpec::parse(j.at("loss").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto opt = j.value("optimizer", std::string("adam"));
  if (opt == "adam") {
    c.optimizer = OptimizerKind::Adam;
  } else if (opt == "gd") {
    c.optimizer = OptimizerKind::GradientDescent;
  } else {
    throw FormatError("unknown optimizer '" + opt + "'");
  }
  return c;
}

Matrix repeat_rows(const Matrix& x, std::size_t times) {
  Matrix out(x.rows() * times, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < times; ++j) std::copy(x.row(i).begin(), x.row(i).end(), out.row(i * times + j).begin());
  return out;
}

TrainResult train(NetParams params, const NetConfig& net, const Matrix& x, const Matrix& y,
                  const TrainConfig& config, Rng& rng, const TrainObserver& observer) {
  config.validate();
  net.validate();
  if (x.rows() == 0) throw DomainError("train: no observations");
  if (x.rows() != y.rows()) throw ShapeError("train: X and Y row counts differ");
  if (x.cols() != net.in_dim || y.cols() != net.out_dim) throw ShapeError("train: data does not match the network");
  if (!x.all_finite() || !y.all_finite()) throw DomainError("train: data contains non-finite values");

  const std::size_t n = x.rows();
  const std::size_t m = config.m_per_obs;
  const bool full = config.batch_size == 0 || config.batch_size >= n;

  AdamState adam(params.num_values(), config.lr);
  TrainResult result;
  result.loss_trace.reserve(config.steps);

  const Matrix x_full_rep = full ? repeat_rows(x, m) : Matrix();
  std::vector<std::size_t> order;
  std::size_t cursor = n;

  const double decay = config.lr_end > 0.0 && config.steps > 1
                           ? std::log(config.lr_end / config.lr) / static_cast<double>(config.steps - 1)
                           : 0.0;

  for (std::size_t step = 0; step < config.steps; ++step) {
    const double lr = config.lr * std::exp(decay * static_cast<double>(step));
    Matrix xb_rep;
    Matrix yb;
    const Matrix* xr = &x_full_rep;
    const Matrix* yr = &y;
    if (!full) {
      if (cursor + config.batch_size > n) {
        order = permutation(rng, n);
        cursor = 0;
      }
      std::span<const std::size_t> idx(order.data() + cursor, config.batch_size);
      cursor += config.batch_size;
      xb_rep = repeat_rows(take_rows(x, idx), m);
      yb = take_rows(y, idx);
      xr = &xb_rep;
      yr = &yb;
    }

    ForwardResult fwd = forward(params, net, *xr, rng);
    LossAndGrad lg = evaluate_loss(config.loss, *yr, fwd.y, m);
    if (!std::isfinite(lg.value)) throw DivergenceError(step, "non-finite loss");
    const NetParams grads = backward(params, net, fwd.cache, lg.grad);
    if (config.optimizer == OptimizerKind::Adam) {
      adam.lr = lr;
      adam_step(params, grads, adam);
    } else {
      gd_step(params, grads, lr);
    }
    result.loss_trace.push_back(lg.value);
    if (observer) observer(step, lg.value);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace engression
