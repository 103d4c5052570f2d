#include "engression/engression.hpp"

#include <algorithm>
#include <cmath>

#include "engression/errors.hpp"

namespace engression {

namespace {

constexpr std::size_t kChunkRows = 1 << 14;

void column_stats(const Matrix& m, Vector& mu, Vector& sd, bool& degenerate) {
  mu.assign(m.cols(), 0.0);
  sd.assign(m.cols(), 1.0);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const Vector col = m.col(c);
    mu[c] = mean(col);
    const double s = stddev(col);
    if (s > 0.0 && std::isfinite(s)) {
      sd[c] = s;
    } else {
      degenerate = true;
    }
  }
}

Matrix apply_affine(const Matrix& m, const Vector& shift, const Vector& scale, bool forward) {
  if (m.cols() != shift.size()) throw ShapeError("normalization: column count mismatch");
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c)
      row[c] = forward ? (row[c] - shift[c]) / scale[c] : row[c] * scale[c] + shift[c];
  }
  return out;
}

}  // namespace

Normalization Normalization::fit(const Matrix& x, const Matrix& y) {
  if (x.rows() == 0) throw DomainError("normalization: empty data");
  Normalization n;
  column_stats(x, n.x_mean, n.x_std, n.degenerate);
  column_stats(y, n.y_mean, n.y_std, n.degenerate);
  return n;
}

Matrix Normalization::standardize_x(const Matrix& x) const { return apply_affine(x, x_mean, x_std, true); }
Matrix Normalization::standardize_y(const Matrix& y) const { return apply_affine(y, y_mean, y_std, true); }
Matrix Normalization::destandardize_y(const Matrix& y) const { return apply_affine(y, y_mean, y_std, false); }

nlohmann::json to_json(const Normalization& n) {
  return {{"x_mean", n.x_mean}, {"x_std", n.x_std}, {"y_mean", n.y_mean}, {"y_std", n.y_std}, {"degenerate", n.degenerate}};
}

Normalization normalization_from_json(const nlohmann::json& j) {
  Normalization n;
  n.x_mean = j.at("x_mean").get<Vector>();
  n.x_std = j.at("x_std").get<Vector>();
  n.y_mean = j.at("y_mean").get<Vector>();
  n.y_std = j.at("y_std").get<Vector>();
  n.degenerate = j.value("degenerate", false);
  for (double s : n.x_std)
    if (!(s > 0.0)) throw FormatError("model file: x_std must be positive");
  for (double s : n.y_std)
    if (!(s > 0.0)) throw FormatError("model file: y_std must be positive");
  return n;
}

// ---------------------------------------------------------------------------

EngressionModel::EngressionModel(NetConfig net, NetParams params, TrainConfig train, Normalization norm,
                                 Vector loss_trace)
    : net_(net), params_(std::move(params)), train_(std::move(train)), norm_(std::move(norm)),
      loss_trace_(std::move(loss_trace)) {
  if (norm_.x_mean.size() != net_.in_dim || norm_.x_std.size() != net_.in_dim ||
      norm_.y_mean.size() != net_.out_dim || norm_.y_std.size() != net_.out_dim)
    throw ShapeError("EngressionModel: normalization does not match the network");
}

EngressionModel EngressionModel::fit(const Matrix& x, const Matrix& y, const TrainConfig& train, NetConfig net,
                                     Rng& rng, const TrainObserver& observer) {
  if (x.rows() != y.rows()) throw ShapeError("fit: X and Y row counts differ");
  if (x.rows() < 2) throw DomainError("fit: need at least 2 observations");
  if (!x.all_finite() || !y.all_finite()) throw DomainError("fit: data contains non-finite values");
  net.in_dim = x.cols();
  net.out_dim = y.cols();
  net.validate();
  train.validate();
  Normalization norm = Normalization::fit(x, y);
  NetParams init = init_params(net, rng);
  TrainResult res = engression::train(std::move(init), net, norm.standardize_x(x), norm.standardize_y(y), train, rng,
                                      observer);
  return EngressionModel(net, std::move(res.params), train, std::move(norm), std::move(res.loss_trace));
}

void EngressionModel::check_x(const Matrix& x) const {
  if (x.cols() != net_.in_dim)
    throw ShapeError("model expects " + std::to_string(net_.in_dim) + " covariates, got " + std::to_string(x.cols()));
}

Matrix EngressionModel::sample_batch(const Matrix& x, std::size_t nsample, Rng& rng) const {
  check_x(x);
  if (nsample == 0) throw DomainError("sample: nsample must be at least 1");
  const Matrix xs = norm_.standardize_x(x);
  Matrix out(x.rows() * nsample, net_.out_dim);
  const std::size_t per_chunk = std::max<std::size_t>(1, kChunkRows / nsample);
  for (std::size_t start = 0; start < x.rows(); start += per_chunk) {
    const std::size_t stop = std::min(x.rows(), start + per_chunk);
    std::vector<std::size_t> idx;
    idx.reserve((stop - start) * nsample);
    for (std::size_t i = start; i < stop; ++i)
      for (std::size_t j = 0; j < nsample; ++j) idx.push_back(i);
    const Matrix draws = norm_.destandardize_y(generate(params_, net_, take_rows(xs, idx), rng));
    std::copy(draws.values().begin(), draws.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(start * nsample * net_.out_dim));
  }
  return out;
}

Matrix EngressionModel::sample(std::span<const double> x, std::size_t nsample, Rng& rng) const {
  return sample_batch(Matrix(1, x.size(), Vector(x.begin(), x.end())), nsample, rng);
}

Matrix EngressionModel::predict_mean(const Matrix& x, Rng& rng, std::size_t nsample) const {
  const Matrix draws = sample_batch(x, nsample, rng);
  Matrix out(x.rows(), net_.out_dim);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < nsample; ++j) {
      const auto d = draws.row(i * nsample + j);
      for (std::size_t c = 0; c < o.size(); ++c) o[c] += d[c];
    }
    for (double& v : o) v /= static_cast<double>(nsample);
  }
  return out;
}

Matrix EngressionModel::predict_quantile(const Matrix& x, std::span<const double> alphas, Rng& rng,
                                         std::size_t nsample) const {
  if (net_.out_dim != 1) throw UnsupportedError("quantiles are only defined for a univariate response");
  for (double a : alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw DomainError("quantile level outside [0, 1]");
  const Matrix draws = sample_batch(x, nsample, rng);
  Matrix out(x.rows(), alphas.size());
  Vector buf(nsample);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::copy_n(draws.values().begin() + static_cast<std::ptrdiff_t>(i * nsample), nsample, buf.begin());
    std::sort(buf.begin(), buf.end());
    for (std::size_t a = 0; a < alphas.size(); ++a) out(i, a) = quantile_sorted(buf, alphas[a]);
  }
  return out;
}

Matrix EngressionModel::predict_median(const Matrix& x, Rng& rng, std::size_t nsample) const {
  const double half[1] = {0.5};
  return predict_quantile(x, half, rng, nsample);
}

Matrix EngressionModel::prediction_interval(const Matrix& x, Rng& rng, double level, std::size_t nsample) const {
  if (!(level >= 0.0 && level < 1.0)) throw DomainError("interval level must lie in [0, 1)");
  const double alphas[2] = {(1.0 - level) / 2.0, (1.0 + level) / 2.0};
  return predict_quantile(x, alphas, rng, nsample);
}

nlohmann::json EngressionModel::to_document(const std::string& kind) const {
  return {{"version", kModelFormatVersion},
          {"kind", kind},
          {"config", to_json(net_)},
          {"params", to_json(params_)},
          {"normalization", to_json(norm_)},
          {"train", to_json(train_)}};
}

std::string EngressionModel::save() const { return to_document(kEngressionKind).dump(); }

EngressionModel EngressionModel::from_document(const nlohmann::json& doc, const std::string& kind) {
  try {
    if (!doc.is_object() || !doc.contains("version")) throw FormatError("model file: missing version");
    const auto& v = doc.at("version");
    const std::string version = v.is_string() ? v.get<std::string>() : v.dump();
    if (version != kModelFormatVersion)
      throw VersionError("model file: unsupported version " + version + " (supported: 1)");
    if (doc.value("kind", std::string(kEngressionKind)) != kind)
      throw FormatError("model file: expected a model of kind " + kind);
    const NetConfig net = net_config_from_json(doc.at("config"));
    NetParams params = net_params_from_json(doc.at("params"), net);
    TrainConfig train = doc.contains("train") ? train_config_from_json(doc.at("train")) : TrainConfig{};
    return EngressionModel(net, std::move(params), train, normalization_from_json(doc.at("normalization")));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("model file: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

EngressionModel EngressionModel::load(const std::string& payload) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  return from_document(doc, kEngressionKind);
}

}  // namespace engression
