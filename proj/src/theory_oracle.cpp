#include "engression/theory_oracle.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "engression/errors.hpp"

namespace engression {

namespace {

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double std_normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

struct Simpson {
  const std::function<double(double)>& f;
  int max_depth;

  double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) const {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    const double floor = 4.0 * std::numeric_limits<double>::epsilon() * (std::abs(left) + std::abs(right));
    if (std::abs(diff) <= 15.0 * std::max(tol, floor) || !(a < m && m < b)) return left + right + diff / 15.0;
    if (depth >= max_depth) throw NumericError("adaptive quadrature did not converge");
    return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) + recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }

  double run(double a, double b, double tol) const {
    const double fa = f(a);
    const double fb = f(b);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    // Always split once so a coincidentally exact coarse estimate cannot stop the recursion.
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    return recurse(a, m, fa, flm, fm, left, 0.5 * tol, 1) + recurse(m, b, fm, frm, fb, right, 0.5 * tol, 1);
  }
};

void require_bounded(const NoiseDist& noise) {
  noise.validate();
  if (!noise.bounded()) throw DomainError("gain oracles need bounded noise");
}

void require_positive(double lipschitz, double delta) {
  if (!(lipschitz > 0.0)) throw DomainError("Lipschitz constant must be positive");
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
}

// Integral of h against dF over [eta_max - delta, eta_max] intersected with the support.
double tail_integral(const NoiseDist& noise, double delta, const std::function<double(double)>& h) {
  const double lo = std::max(noise.eta_max - delta, -noise.eta_max);
  const double hi = noise.eta_max;
  if (!(hi > lo)) return 0.0;
  return integrate([&](double e) { return h(e) * noise.pdf(e); }, lo, hi, 1e-10, noise.breakpoints());
}

}  // namespace

NoiseDist NoiseDist::uniform(double eta_max) {
  NoiseDist d{NoiseKind::Uniform, eta_max / std::sqrt(3.0), eta_max};
  d.validate();
  return d;
}

NoiseDist NoiseDist::truncated_gaussian(double sd, double eta_max) {
  NoiseDist d{NoiseKind::GaussianTruncated, sd, eta_max};
  d.validate();
  return d;
}

NoiseDist NoiseDist::gaussian(double sd) {
  NoiseDist d{NoiseKind::Gaussian, sd, std::numeric_limits<double>::infinity()};
  d.validate();
  return d;
}

void NoiseDist::validate() const {
  if (kind != NoiseKind::Uniform && !(sd > 0.0)) throw DomainError("noise sd must be positive");
  if (kind != NoiseKind::Gaussian && !(eta_max > 0.0 && std::isfinite(eta_max)))
    throw DomainError("bounded noise needs a finite positive eta_max");
}

double NoiseDist::cdf(double x) const {
  switch (kind) {
    case NoiseKind::Uniform:
      if (x <= -eta_max) return 0.0;
      if (x >= eta_max) return 1.0;
      return (x + eta_max) / (2.0 * eta_max);
    case NoiseKind::GaussianTruncated: {
      if (x <= -eta_max) return 0.0;
      if (x >= eta_max) return 1.0;
      const double lo = std_normal_cdf(-eta_max / sd);
      const double mass = 1.0 - 2.0 * lo;
      return (std_normal_cdf(x / sd) - lo) / mass;
    }
    case NoiseKind::Gaussian:
      return std_normal_cdf(x / sd);
  }
  return 0.0;
}

double NoiseDist::pdf(double x) const {
  switch (kind) {
    case NoiseKind::Uniform:
      return (x < -eta_max || x > eta_max) ? 0.0 : 1.0 / (2.0 * eta_max);
    case NoiseKind::GaussianTruncated: {
      if (x < -eta_max || x > eta_max) return 0.0;
      const double mass = 1.0 - 2.0 * std_normal_cdf(-eta_max / sd);
      return std_normal_pdf(x / sd) / (sd * mass);
    }
    case NoiseKind::Gaussian:
      return std_normal_pdf(x / sd) / sd;
  }
  return 0.0;
}

double NoiseDist::quantile(double alpha) const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("quantile level outside [0, 1]");
  switch (kind) {
    case NoiseKind::Uniform:
      return -eta_max + 2.0 * eta_max * alpha;
    case NoiseKind::GaussianTruncated: {
      if (alpha == 0.0) return -eta_max;
      if (alpha == 1.0) return eta_max;
      const double lo = std_normal_cdf(-eta_max / sd);
      return sd * std_normal_quantile(lo + alpha * (1.0 - 2.0 * lo));
    }
    case NoiseKind::Gaussian:
      if (alpha == 0.0) return -std::numeric_limits<double>::infinity();
      if (alpha == 1.0) return std::numeric_limits<double>::infinity();
      return sd * std_normal_quantile(alpha);
  }
  return 0.0;
}

double NoiseDist::second_moment() const {
  switch (kind) {
    case NoiseKind::Uniform:
      return eta_max * eta_max / 3.0;
    case NoiseKind::GaussianTruncated: {
      const double a = eta_max / sd;
      const double mass = 1.0 - 2.0 * std_normal_cdf(-a);
      return sd * sd * (1.0 - 2.0 * a * std_normal_pdf(a) / mass);
    }
    case NoiseKind::Gaussian:
      return sd * sd;
  }
  return 0.0;
}

std::vector<double> NoiseDist::breakpoints() const {
  if (kind == NoiseKind::Gaussian) return {};
  return {-eta_max, eta_max};
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol,
                 const std::vector<double>& breaks) {
  if (!(tol > 0.0)) throw DomainError("integrate: tolerance must be positive");
  if (!std::isfinite(a) || !std::isfinite(b)) throw DomainError("integrate: bounds must be finite");
  if (a == b) return 0.0;
  if (a > b) return -integrate(f, b, a, tol, breaks);
  std::vector<double> cuts{a};
  for (double p : breaks)
    if (p > a && p < b) cuts.push_back(p);
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(b);
  const Simpson s{f, 60};
  double total = 0.0;
  const double width = b - a;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double piece_tol = tol * (cuts[i + 1] - cuts[i]) / width;
    const double v = s.run(cuts[i], cuts[i + 1], piece_tol);
    if (!std::isfinite(v)) throw NumericError("integrate: non-finite integrand");
    total += v;
  }
  return total;
}

GainResult median_uncertainty_gain(double lipschitz, double eta_max, double delta) {
  require_positive(lipschitz, delta);
  if (!(eta_max > 0.0)) throw DomainError("eta_max must be positive");
  return {lipschitz * std::max(delta - eta_max, 0.0), lipschitz * delta, lipschitz * std::min(delta, eta_max)};
}

GainResult mean_uncertainty_gain(double lipschitz, const NoiseDist& noise, double delta) {
  require_positive(lipschitz, delta);
  require_bounded(noise);
  const double em = noise.eta_max;
  GainResult r;
  r.uncertainty_engression = lipschitz * tail_integral(noise, delta, [&](double e) { return e - em + delta; });
  r.uncertainty_baseline = lipschitz * delta;
  r.gain = lipschitz * delta * noise.cdf(em - delta) +
           lipschitz * tail_integral(noise, delta, [&](double e) { return em - e; });
  return r;
}

GainResult dist_uncertainty_gain(double lipschitz, const NoiseDist& noise, double delta, double ell) {
  require_positive(lipschitz, delta);
  require_bounded(noise);
  if (!(ell >= 1.0)) throw DomainError("Wasserstein order must be at least 1");
  GainResult r;
  r.uncertainty_baseline = lipschitz * delta;
  if (std::isinf(ell)) {
    r.uncertainty_engression = lipschitz * delta;
  } else {
    const double em = noise.eta_max;
    const double moment =
        tail_integral(noise, delta, [&](double e) { return std::pow(std::max(e - em + delta, 0.0), ell); });
    r.uncertainty_engression = lipschitz * std::pow(moment, 1.0 / ell);
  }
  r.gain = r.uncertainty_baseline - r.uncertainty_engression;
  return r;
}

QuadraticTruth quadratic_truth(const std::array<double, 3>& beta, const NoiseDist& noise, double x,
                               std::optional<double> alpha) {
  noise.validate();
  const auto [b0, b1, b2] = beta;
  if (!(b1 * b2 > 0.0)) throw DomainError("quadratic_truth: needs beta1 * beta2 > 0");
  QuadraticTruth t;
  t.mean = b0 + b1 * x + b2 * (x * x + noise.second_moment());
  t.median = b0 + b1 * x + b2 * x * x;
  if (alpha) {
    const double q = noise.quantile(*alpha);
    t.quantile = b0 + b1 * x + b2 * x * x + (b1 + 2.0 * b2 * x) * q + b2 * q * q;
  }
  return t;
}

double dkw_cramer_bound(double support_length, double confidence_delta, double n) {
  if (!(support_length > 0.0) || !(n > 0.0)) throw DomainError("dkw_cramer_bound: inputs must be positive");
  if (!(confidence_delta > 0.0 && confidence_delta < 1.0)) throw DomainError("dkw_cramer_bound: delta must lie in (0, 1)");
  return support_length * std::log(2.0 / confidence_delta) / (2.0 * n);
}

double quantile_gap_bound(double cramer_distance, double density_lower_bound) {
  if (!(cramer_distance >= 0.0)) throw DomainError("quantile_gap_bound: distance must be nonnegative");
  if (!(density_lower_bound > 0.0)) throw DomainError("quantile_gap_bound: density bound must be positive");
  return std::cbrt(3.0 * cramer_distance / (density_lower_bound * density_lower_bound));
}

}  // namespace engression
