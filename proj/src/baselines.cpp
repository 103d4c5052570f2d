#include "engression/baselines.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "engression/errors.hpp"

namespace engression {

namespace {

using Design = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

constexpr double kRidgeJitter = 1e-8;

Design with_intercept(const Matrix& x) {
  Design d(x.rows(), x.cols() + 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    d(static_cast<Eigen::Index>(r), 0) = 1.0;
    for (std::size_t c = 0; c < x.cols(); ++c)
      d(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c + 1)) = x(r, c);
  }
  return d;
}

Matrix affine_predict(const Matrix& coef, const Matrix& x) {
  if (x.cols() + 1 != coef.rows()) throw ShapeError("linear model: covariate count mismatch");
  Matrix out(x.rows(), coef.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t k = 0; k < coef.cols(); ++k) {
      double v = coef(0, k);
      for (std::size_t c = 0; c < x.cols(); ++c) v += coef(c + 1, k) * x(r, c);
      out(r, k) = v;
    }
  return out;
}

void check_data(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) throw ShapeError("baseline: X and Y row counts differ");
  if (x.rows() == 0) throw DomainError("baseline: no observations");
  if (!x.all_finite() || !y.all_finite()) throw DomainError("baseline: data contains non-finite values");
}

}  // namespace

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::NnL1: return "nn_l1";
    case BaselineKind::NnL2: return "nn_l2";
    case BaselineKind::LinearOls: return "lin_ols";
    case BaselineKind::LinearQr: return "lin_qr";
  }
  return "";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "nn_l1") return BaselineKind::NnL1;
  if (s == "nn_l2") return BaselineKind::NnL2;
  if (s == "lin_ols") return BaselineKind::LinearOls;
  if (s == "lin_qr") return BaselineKind::LinearQr;
  throw FormatError("unknown baseline kind '" + s + "'");
}

Matrix BaselineModel::predict(const Matrix& x) const {
  if (kind == BaselineKind::NnL1 || kind == BaselineKind::NnL2) {
    if (!net) throw ContractError("baseline: network model missing");
    Rng unused(0);
    return net->sample_batch(x, 1, unused);
  }
  return affine_predict(coef, x);
}

std::string BaselineModel::save() const {
  nlohmann::json doc;
  if (net) {
    doc = net->to_document(to_string(kind));
  } else {
    doc = {{"version", kModelFormatVersion},
           {"kind", to_string(kind)},
           {"coef", {{"rows", coef.rows()}, {"cols", coef.cols()}, {"data", Vector(coef.values().begin(), coef.values().end())}}},
           {"alphas", alphas},
           {"jittered", jittered}};
  }
  return doc.dump();
}

BaselineModel BaselineModel::load(const std::string& payload) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("kind")) throw FormatError("model file: missing kind");
    BaselineModel m;
    m.kind = baseline_kind_from_string(doc.at("kind").get<std::string>());
    if (m.kind == BaselineKind::NnL1 || m.kind == BaselineKind::NnL2) {
      m.net = EngressionModel::from_document(doc, to_string(m.kind));
      return m;
    }
    const auto& v = doc.at("version");
    const std::string version = v.is_string() ? v.get<std::string>() : v.dump();
    if (version != kModelFormatVersion) throw VersionError("model file: unsupported version " + version);
    const auto& c = doc.at("coef");
    m.coef = Matrix(c.at("rows").get<std::size_t>(), c.at("cols").get<std::size_t>(), c.at("data").get<Vector>());
    m.alphas = doc.value("alphas", Vector{});
    m.jittered = doc.value("jittered", false);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

BaselineModel fit_nn_regression(const Matrix& x, const Matrix& y, const LossSpec& loss, NetConfig net,
                                TrainConfig train, Rng& rng) {
  if (loss.kind != LossKind::L1 && loss.kind != LossKind::L2)
    throw DomainError("fit_nn_regression: loss must be l1 or l2");
  net.noise_dim = 0;
  train.loss = loss;
  train.m_per_obs = 1;
  BaselineModel m;
  m.kind = loss.kind == LossKind::L1 ? BaselineKind::NnL1 : BaselineKind::NnL2;
  m.net = EngressionModel::fit(x, y, train, net, rng);
  return m;
}

BaselineModel fit_linear_ols(const Matrix& x, const Matrix& y) {
  check_data(x, y);
  const Design d = with_intercept(x);
  Design rhs(y.rows(), y.cols());
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) rhs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = y(r, c);

  BaselineModel m;
  m.kind = BaselineKind::LinearOls;
  Design gram = d.transpose() * d;
  const Design xty = d.transpose() * rhs;
  Eigen::ColPivHouseholderQR<Design> qr(d);
  if (qr.rank() < d.cols()) {
    gram += kRidgeJitter * Design::Identity(d.cols(), d.cols());
    m.jittered = true;
  }
  const Design beta = gram.ldlt().solve(xty);
  m.coef = Matrix(static_cast<std::size_t>(beta.rows()), static_cast<std::size_t>(beta.cols()));
  for (Eigen::Index r = 0; r < beta.rows(); ++r)
    for (Eigen::Index c = 0; c < beta.cols(); ++c) m.coef(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = beta(r, c);
  if (!m.coef.all_finite()) throw NumericError("fit_linear_ols: non-finite solution");
  return m;
}

BaselineModel fit_linear_quantile(const Matrix& x, const Matrix& y, std::span<const double> alphas,
                                  const TrainConfig& train) {
  check_data(x, y);
  if (y.cols() != 1) throw UnsupportedError("linear quantile regression needs a univariate response");
  if (alphas.empty()) throw DomainError("fit_linear_quantile: no quantile levels");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw DomainError("pinball level must lie in (0, 1)");
  if (!(train.lr > 0.0)) throw DomainError("fit_linear_quantile: learning rate must be positive");

  const Normalization norm = Normalization::fit(x, y);
  const Matrix xs = norm.standardize_x(x);
  const Matrix ys = norm.standardize_y(y);
  const std::size_t n = x.rows();
  const std::size_t p = x.cols() + 1;

  BaselineModel m;
  m.kind = BaselineKind::LinearQr;
  m.alphas.assign(alphas.begin(), alphas.end());
  m.coef = Matrix(p, alphas.size());

  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const double alpha = alphas[a];
    Vector w(p, 0.0);
    Vector grad(p);
    Vector avg(p, 0.0);
    std::size_t averaged = 0;
    AdamState adam(p, train.lr);
    const std::size_t burn = train.steps / 2;
    for (std::size_t step = 0; step < train.steps; ++step) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto xi = xs.row(i);
        double pred = w[0];
        for (std::size_t c = 0; c < xi.size(); ++c) pred += w[c + 1] * xi[c];
        const double r = ys(i, 0) - pred;
        const double slope = alpha - (r < 0.0 ? 1.0 : 0.0);
        loss += r * slope;
        grad[0] -= slope;
        for (std::size_t c = 0; c < xi.size(); ++c) grad[c + 1] -= slope * xi[c];
      }
      if (!std::isfinite(loss)) throw DivergenceError(step, "non-finite pinball loss");
      for (double& g : grad) g /= static_cast<double>(n);
      // Subgradient steps oscillate at the scale of lr; shrink it linearly over the averaging half.
      if (step >= burn)
        adam.lr = train.lr * static_cast<double>(train.steps - step) / static_cast<double>(train.steps - burn);
      adam.update(w, grad);
      if (step >= burn) {
        for (std::size_t c = 0; c < p; ++c) avg[c] += w[c];
        ++averaged;
      }
    }
    if (averaged > 0)
      for (double& v : avg) v /= static_cast<double>(averaged);
    else
      avg = w;
    // Back to original units: y = ym + ys * (w0 + sum_c wc (x_c - xm_c) / xs_c).
    const double ysd = norm.y_std[0];
    double intercept = norm.y_mean[0] + ysd * avg[0];
    for (std::size_t c = 0; c + 1 < p; ++c) {
      const double slope = ysd * avg[c + 1] / norm.x_std[c];
      m.coef(c + 1, a) = slope;
      intercept -= slope * norm.x_mean[c];
    }
    m.coef(0, a) = intercept;
  }
  return m;
}

}  // namespace engression
