#include "engression/simgen.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>

#include "engression/errors.hpp"

namespace engression {

namespace {

double quad(const std::array<double, 3>& b, double t) { return b[0] + b[1] * t + b[2] * t * t; }

double monotone_g(SettingKind kind, double x) {
  switch (kind) {
    case SettingKind::Softplus:
      return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    case SettingKind::Square: {
      const double p = std::max(x, 0.0);
      return 0.5 * p * p;
    }
    case SettingKind::Cubic:
      return x * x * x / 3.0;
    case SettingKind::Log:
      return x <= 2.0 ? (x - 2.0) / 3.0 + std::log(3.0) : std::log1p(x);
    default:
      break;
  }
  throw ContractError("monotone_g: not a single-index setting");
}

double std_normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

}  // namespace

SimSetting SimSetting::softplus() {
  SimSetting s;
  s.kind = SettingKind::Softplus;
  s.x_lo = -2.0;
  s.x_hi = 2.0;
  s.noise_sd = 1.0;
  return s;
}

SimSetting SimSetting::square() {
  SimSetting s;
  s.kind = SettingKind::Square;
  s.x_lo = 0.0;
  s.x_hi = 2.0;
  s.noise_sd = 1.0;
  return s;
}

SimSetting SimSetting::cubic() {
  SimSetting s;
  s.kind = SettingKind::Cubic;
  s.x_lo = -2.0;
  s.x_hi = 2.0;
  s.noise_sd = 1.1;
  return s;
}

SimSetting SimSetting::log() {
  SimSetting s;
  s.kind = SettingKind::Log;
  s.x_lo = 0.0;
  s.x_hi = 2.0;
  s.noise_sd = 1.0;
  return s;
}

SimSetting SimSetting::quadratic_two_point(std::array<double, 3> beta, NoiseDist noise, double x1, double x2) {
  SimSetting s;
  s.kind = SettingKind::QuadraticTwoPoint;
  s.beta = beta;
  s.noise = noise;
  s.x1 = x1;
  s.x2 = x2;
  s.x_lo = x1;
  s.x_hi = x2;
  s.validate();
  return s;
}

SimSetting SimSetting::quadratic_post_anm(std::array<double, 3> beta, NoiseDist noise, double x1, double x2) {
  SimSetting s = quadratic_two_point(beta, noise, x1, x2);
  s.kind = SettingKind::QuadraticPostAnmMisspec;
  return s;
}

SimSetting SimSetting::pre_post_anm() {
  SimSetting s;
  s.kind = SettingKind::PrePostAnm;
  s.x_lo = -1.0;
  s.x_hi = 1.0;
  s.noise_sd = 1.0;
  s.beta = {0.0, 1.0, 0.25};
  s.linear = 0.5;
  s.post_sd = 0.5;
  return s;
}

SimSetting SimSetting::by_name(const std::string& name) {
  if (name == "softplus") return softplus();
  if (name == "square") return square();
  if (name == "cubic") return cubic();
  if (name == "log") return log();
  if (name == "quadratic") return quadratic_two_point();
  if (name == "quadratic_postanm") return quadratic_post_anm();
  if (name == "prepost") return pre_post_anm();
  throw DomainError("unknown setting '" + name + "'");
}

std::string SimSetting::name() const {
  switch (kind) {
    case SettingKind::Softplus: return "softplus";
    case SettingKind::Square: return "square";
    case SettingKind::Cubic: return "cubic";
    case SettingKind::Log: return "log";
    case SettingKind::QuadraticTwoPoint: return "quadratic";
    case SettingKind::QuadraticPostAnmMisspec: return "quadratic_postanm";
    case SettingKind::PrePostAnm: return "prepost";
  }
  return "";
}

bool SimSetting::two_point() const {
  return kind == SettingKind::QuadraticTwoPoint || kind == SettingKind::QuadraticPostAnmMisspec;
}

bool SimSetting::monotone_table() const {
  return kind == SettingKind::Softplus || kind == SettingKind::Square || kind == SettingKind::Cubic ||
         kind == SettingKind::Log;
}

double SimSetting::x_max() const { return two_point() ? x2 : x_hi; }

double SimSetting::eta_max() const { return two_point() ? noise.eta_max : 2.0 * noise_sd; }

void SimSetting::validate() const {
  if (two_point()) {
    noise.validate();
    if (!(x1 < x2)) throw DomainError("two-point design needs x1 < x2");
    if (kind == SettingKind::QuadraticTwoPoint) {
      if (!(beta[1] * beta[2] > 0.0)) throw DomainError("quadratic pre-noise design needs beta1 * beta2 > 0");
      if (!noise.bounded()) throw DomainError("quadratic pre-noise design needs bounded noise");
      // Increasing on the noise support.
      if (!(beta[1] + 2.0 * beta[2] * (x1 - noise.eta_max) > 0.0))
        throw DomainError("quadratic pre-noise design must be increasing on x1 + noise support");
    }
    return;
  }
  if (!(x_lo < x_hi)) throw DomainError("setting needs x_lo < x_hi");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw DomainError("noise sd must be nonnegative");
  if (kind == SettingKind::PrePostAnm && !(post_sd >= 0.0)) throw DomainError("post-noise sd must be nonnegative");
}

// ---------------------------------------------------------------------------

Truth::Truth(SimSetting setting) : setting_(std::move(setting)) {
  setting_.validate();
  Rng rng(kOracleSeed);
  if (setting_.kind == SettingKind::PrePostAnm) {
    oracle_noise_.resize(2 * kOracleDraws);
    for (double& v : oracle_noise_) v = rng.normal();
  } else if (setting_.monotone_table()) {
    oracle_noise_ = sample_normal(rng, kOracleDraws);
  }
}

double Truth::g(double x) const {
  if (setting_.monotone_table()) return monotone_g(setting_.kind, x);
  if (setting_.kind == SettingKind::PrePostAnm) return quad(setting_.beta, x) + setting_.linear * x;
  return quad(setting_.beta, x);
}

double Truth::noise_draw(Rng& rng) const {
  const NoiseDist& n = setting_.noise;
  switch (n.kind) {
    case NoiseKind::Uniform:
      return rng.uniform(-n.eta_max, n.eta_max);
    case NoiseKind::GaussianTruncated:
      return n.quantile(rng.uniform());
    case NoiseKind::Gaussian:
      return n.sd * rng.normal();
  }
  return 0.0;
}

double Truth::draw(double x, Rng& rng) const {
  switch (setting_.kind) {
    case SettingKind::QuadraticTwoPoint:
      return quad(setting_.beta, x + noise_draw(rng));
    case SettingKind::QuadraticPostAnmMisspec:
      return quad(setting_.beta, x) + noise_draw(rng);
    case SettingKind::PrePostAnm: {
      const double eta = setting_.noise_sd * rng.normal();
      const double xi = setting_.post_sd * rng.normal();
      return quad(setting_.beta, x + eta) + setting_.linear * x + xi;
    }
    default:
      return monotone_g(setting_.kind, x + setting_.noise_sd * rng.normal());
  }
}

Vector Truth::mc_sorted_draws(double x) const {
  Vector v(kOracleDraws);
  for (std::size_t i = 0; i < kOracleDraws; ++i) {
    const double eta = setting_.noise_sd * oracle_noise_[2 * i];
    const double xi = setting_.post_sd * oracle_noise_[2 * i + 1];
    v[i] = quad(setting_.beta, x + eta) + setting_.linear * x + xi;
  }
  std::sort(v.begin(), v.end());
  return v;
}

double Truth::quantile(double x, double alpha) const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("truth quantile level must lie in (0, 1)");
  switch (setting_.kind) {
    case SettingKind::QuadraticTwoPoint:
      return *quadratic_truth(setting_.beta, setting_.noise, x, alpha).quantile;
    case SettingKind::QuadraticPostAnmMisspec:
      return quad(setting_.beta, x) + setting_.noise.quantile(alpha);
    case SettingKind::PrePostAnm:
      return quantile_sorted(mc_sorted_draws(x), alpha);
    default:
      return monotone_g(setting_.kind, x + setting_.noise_sd * std_normal_quantile(alpha));
  }
}

double Truth::median(double x) const {
  switch (setting_.kind) {
    case SettingKind::PrePostAnm:
      return quantile_sorted(mc_sorted_draws(x), 0.5);
    case SettingKind::QuadraticTwoPoint:
    case SettingKind::QuadraticPostAnmMisspec:
      return quad(setting_.beta, x);
    default:
      return monotone_g(setting_.kind, x);
  }
}

double Truth::mean(double x) const {
  switch (setting_.kind) {
    case SettingKind::QuadraticTwoPoint:
      return quad(setting_.beta, x) + setting_.beta[2] * setting_.noise.second_moment();
    case SettingKind::QuadraticPostAnmMisspec:
      return quad(setting_.beta, x);
    case SettingKind::PrePostAnm: {
      const double s2 = setting_.noise_sd * setting_.noise_sd;
      return quad(setting_.beta, x) + setting_.beta[2] * s2 + setting_.linear * x;
    }
    default: {
      double total = 0.0;
      for (double z : oracle_noise_) total += monotone_g(setting_.kind, x + setting_.noise_sd * z);
      return total / static_cast<double>(oracle_noise_.size());
    }
  }
}

Vector Truth::median(std::span<const double> x) const {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = median(x[i]);
  return out;
}

Vector Truth::mean(std::span<const double> x) const {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = mean(x[i]);
  return out;
}

// ---------------------------------------------------------------------------

SimData generate(const SimSetting& setting, std::size_t n, Rng& rng) {
  if (n == 0) throw DomainError("generate: n must be at least 1");
  setting.validate();
  const Truth truth(setting);
  SimData data{Matrix(n, 1), Matrix(n, 1), setting};
  for (std::size_t i = 0; i < n; ++i) {
    double x;
    if (setting.two_point()) {
      x = rng.uniform() < 0.5 ? setting.x1 : setting.x2;
    } else {
      x = rng.uniform(setting.x_lo, setting.x_hi);
    }
    data.x(i, 0) = x;
    data.y(i, 0) = truth.draw(x, rng);
  }
  return data;
}

Split split_at_quantile(const Matrix& x, const Matrix& y, double q, Keep keep, std::size_t split_dim) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("split_at_quantile: q must lie in (0, 1)");
  if (x.rows() != y.rows()) throw ShapeError("split_at_quantile: X and Y row counts differ");
  if (split_dim >= x.cols()) throw ShapeError("split_at_quantile: split dimension out of range");
  const Vector col = x.col(split_dim);
  const double t = empirical_quantile(col, q);
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  for (std::size_t i = 0; i < col.size(); ++i) {
    const bool in_train = keep == Keep::Smaller ? col[i] <= t : col[i] >= t;
    (in_train ? train : test).push_back(i);
  }
  if (train.empty() || test.empty()) throw DomainError("split_at_quantile: empty partition");
  return {take_rows(x, train), take_rows(y, train), take_rows(x, test), take_rows(y, test), t};
}

std::vector<SimData> noise_level_sweep(const SimSetting& setting, std::span<const double> sds, std::size_t n,
                                       Rng& rng) {
  if (!setting.monotone_table()) throw DomainError("noise_level_sweep: needs a single-index Gaussian setting");
  if (n == 0) throw DomainError("noise_level_sweep: n must be at least 1");
  const Vector x = sample_uniform(rng, n);
  const Vector z = sample_normal(rng, n);
  std::vector<SimData> out;
  for (double sd : sds) {
    SimSetting s = setting;
    s.noise_sd = sd;
    s.validate();
    SimData d{Matrix(n, 1), Matrix(n, 1), s};
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = s.x_lo + (s.x_hi - s.x_lo) * x[i];
      d.x(i, 0) = xi;
      d.y(i, 0) = monotone_g(s.kind, xi + sd * z[i]);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace engression
