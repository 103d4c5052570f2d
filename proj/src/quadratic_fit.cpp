#include "engression/quadratic_fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>

#include "engression/errors.hpp"
#include "engression/optim.hpp"

namespace engression {

namespace {

struct Group {
  double x;
  double weight;
  Vector y;  // sorted
};

std::vector<Group> group_by_x(const Matrix& x, const Matrix& y) {
  if (x.cols() != 1 || y.cols() != 1) throw ShapeError("quadratic fit: univariate X and Y required");
  if (x.rows() != y.rows()) throw ShapeError("quadratic fit: X and Y row counts differ");
  if (x.rows() == 0) throw DomainError("quadratic fit: no observations");
  std::map<double, Vector> by_x;
  for (std::size_t i = 0; i < x.rows(); ++i) by_x[x(i, 0)].push_back(y(i, 0));
  std::vector<Group> groups;
  for (auto& [xv, ys] : by_x) {
    std::sort(ys.begin(), ys.end());
    groups.push_back({xv, static_cast<double>(ys.size()) / static_cast<double>(x.rows()), std::move(ys)});
  }
  return groups;
}

double quad(const std::array<double, 3>& b, double t) { return b[0] + b[1] * t + b[2] * t * t; }

// Full symmetric table from its upper half u (entries above the middle).
void expand_table(std::span<const double> u, Vector& table) {
  const std::size_t half = u.size();
  table.assign(2 * half + 1, 0.0);
  for (std::size_t j = 0; j < half; ++j) {
    table[half + 1 + j] = u[j];
    table[half - 1 - j] = -u[j];
  }
}

}  // namespace

void project_nonneg_monotone(std::span<double> u) {
  // Pool-adjacent-violators for the nondecreasing fit, then clip at zero.
  std::vector<double> level;
  std::vector<std::size_t> width;
  for (double v : u) {
    level.push_back(v);
    width.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const std::size_t w = width.back() + width[width.size() - 2];
      const double merged = (level.back() * static_cast<double>(width.back()) +
                             level[level.size() - 2] * static_cast<double>(width[width.size() - 2])) /
                            static_cast<double>(w);
      level.pop_back();
      width.pop_back();
      level.back() = merged;
      width.back() = w;
    }
  }
  std::size_t k = 0;
  for (std::size_t b = 0; b < level.size(); ++b)
    for (std::size_t j = 0; j < width[b]; ++j) u[k++] = std::max(level[b], 0.0);
}

Vector QuadraticPreAnmFit::atoms(double x) const {
  Vector a(noise_table.size());
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = quad(beta, x + noise_table[k]);
  std::sort(a.begin(), a.end());
  return a;
}

double QuadraticPreAnmFit::quantile(double x, double alpha) const { return empirical_quantile(atoms(x), alpha); }

double QuadraticPreAnmFit::mean(double x) const { return engression::mean(atoms(x)); }

QuadraticPreAnmFit fit_quadratic_cramer(const Matrix& x, const Matrix& y, const CramerFitConfig& config) {
  if (config.grid < 3 || config.grid % 2 == 0) throw DomainError("cramer fit: grid must be odd and at least 3");
  if (!(config.lr_start > 0.0 && config.lr_end > 0.0)) throw DomainError("cramer fit: learning rates must be positive");
  const std::vector<Group> groups = group_by_x(x, y);
  if (groups.size() < 2) throw DomainError("cramer fit: need at least two distinct covariate values");

  const std::size_t m = config.grid;
  const std::size_t half = m / 2;
  const double md = static_cast<double>(m);

  // Work in u = (t - xc) / s and standardized y; maps back exactly at the end.
  const Group& lo = groups.front();
  const Group& hi = groups.back();
  const double xc = 0.5 * (lo.x + hi.x);
  const double xs = 0.5 * (hi.x - lo.x);
  Vector pooled;
  for (const auto& g : groups) pooled.insert(pooled.end(), g.y.begin(), g.y.end());
  const double ym = engression::mean(pooled);
  double ysd = stddev(pooled);
  if (!(ysd > 0.0)) ysd = 1.0;
  std::vector<Group> scaled = groups;
  for (auto& g : scaled) {
    g.x = (g.x - xc) / xs;
    for (double& v : g.y) v = (v - ym) / ysd;
  }

  // Start from the line through the outer group medians with noise read off pooled residuals.
  double slope = (median(scaled.back().y) - median(scaled.front().y)) / (scaled.back().x - scaled.front().x);
  if (!(std::abs(slope) > 1e-8)) slope = 1.0;
  const double intercept = median(scaled.front().y) - slope * scaled.front().x;
  Vector resid;
  for (const auto& g : scaled)
    for (double v : g.y) resid.push_back(v - intercept - slope * g.x);
  std::sort(resid.begin(), resid.end());

  // Parameters: a0, a1, a2, then the upper half of the noise table (in u units).
  Vector theta(3 + half);
  theta[0] = intercept;
  theta[1] = slope;
  theta[2] = 0.0;
  for (std::size_t j = 0; j < half; ++j) {
    const double alpha = (static_cast<double>(half + 1 + j) + 0.5) / md;
    const double spread = quantile_sorted(resid, alpha) - quantile_sorted(resid, 1.0 - alpha);
    theta[3 + j] = 0.5 * spread / slope;
  }
  project_nonneg_monotone(std::span<double>(theta).subspan(3));

  AdamState adam(theta.size(), config.lr_start);
  Vector grad(theta.size());
  Vector table;
  std::vector<std::pair<double, std::size_t>> atoms(m);
  Vector dtable(m);
  const double decay = config.steps > 1 ? std::log(config.lr_end / config.lr_start) / static_cast<double>(config.steps - 1) : 0.0;

  for (std::size_t step = 0; step < config.steps; ++step) {
    adam.lr = config.lr_start * std::exp(decay * static_cast<double>(step));
    expand_table(std::span<const double>(theta).subspan(3), table);
    const std::array<double, 3> a{theta[0], theta[1], theta[2]};
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(dtable.begin(), dtable.end(), 0.0);
    for (const auto& g : scaled) {
      for (std::size_t k = 0; k < m; ++k) atoms[k] = {quad(a, g.x + table[k]), k};
      std::sort(atoms.begin(), atoms.end());
      const double n = static_cast<double>(g.y.size());
      std::size_t below = 0;
      for (std::size_t r = 0; r < m; ++r) {
        const double v = atoms[r].first;
        while (below < g.y.size() && g.y[below] <= v) ++below;
        // d/dv of the Cramér distance for the atom of rank r.
        const double dv = g.weight * (2.0 / md) * (static_cast<double>(below) / n - (static_cast<double>(r) + 0.5) / md);
        const std::size_t k = atoms[r].second;
        const double u = g.x + table[k];
        grad[0] += dv;
        grad[1] += dv * u;
        grad[2] += dv * u * u;
        dtable[k] += dv * (a[1] + 2.0 * a[2] * u);
      }
    }
    for (std::size_t j = 0; j < half; ++j) grad[3 + j] = dtable[half + 1 + j] - dtable[half - 1 - j];
    for (double v : grad)
      if (!std::isfinite(v)) throw DivergenceError(step, "non-finite Cramér gradient");
    adam.update(theta, grad);
    project_nonneg_monotone(std::span<double>(theta).subspan(3));
  }

  QuadraticPreAnmFit fit;
  const double a0 = theta[0], a1 = theta[1], a2 = theta[2];
  fit.beta = {ym + ysd * (a0 - a1 * xc / xs + a2 * xc * xc / (xs * xs)), ysd * (a1 / xs - 2.0 * a2 * xc / (xs * xs)),
              ysd * a2 / (xs * xs)};
  expand_table(std::span<const double>(theta).subspan(3), fit.noise_table);
  for (double& h : fit.noise_table) h *= xs;
  for (const auto& g : groups) fit.loss += g.weight * cramer_distance_exact(fit.atoms(g.x), g.y);
  return fit;
}

// ---------------------------------------------------------------------------

std::array<double, 3> fit_quadratic_regression(const Matrix& x, const Matrix& y, const LossSpec& loss,
                                               std::array<double, 3> init, std::size_t steps) {
  if (x.cols() != 1 || y.cols() != 1) throw ShapeError("quadratic regression: univariate X and Y required");
  if (x.rows() != y.rows() || x.rows() == 0) throw ShapeError("quadratic regression: bad data shape");
  if (loss.kind != LossKind::L2 && loss.kind != LossKind::Pinball)
    throw DomainError("quadratic regression: loss must be l2 or pinball");
  loss.validate();
  const std::size_t n = x.rows();
  const double nd = static_cast<double>(n);

  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d phi(1.0, x(i, 0), x(i, 0) * x(i, 0));
    gram += phi * phi.transpose() / nd;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(gram);
  const double lambda_max = eig.eigenvalues().maxCoeff();
  // Pseudo-inverse of the Gram matrix: preconditions within the span of the
  // features and leaves the unseen component of `init` untouched.
  Eigen::Vector3d inv_eig = Eigen::Vector3d::Zero();
  for (int k = 0; k < 3; ++k)
    if (eig.eigenvalues()[k] > 1e-10 * lambda_max) inv_eig[k] = 1.0 / eig.eigenvalues()[k];
  const Eigen::Matrix3d pinv = eig.eigenvectors() * inv_eig.asDiagonal() * eig.eigenvectors().transpose();
  double y_scale = 0.0;
  if (loss.kind == LossKind::Pinball) {
    y_scale = stddev(y.col(0));
    if (!(y_scale > 0.0)) y_scale = 1.0;
  }

  std::array<double, 3> beta = init;
  std::array<double, 3> avg{0.0, 0.0, 0.0};
  std::size_t averaged = 0;
  for (std::size_t step = 0; step < steps; ++step) {
    std::array<double, 3> g{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = x(i, 0);
      const double r = y(i, 0) - quad(beta, xi);
      const double w = loss.kind == LossKind::L2 ? -2.0 * r : -(loss.param - (r < 0.0 ? 1.0 : 0.0));
      g[0] += w;
      g[1] += w * xi;
      g[2] += w * xi * xi;
    }
    // L2: plain steps of 1/(2 lambda_max). Pinball: preconditioned subgradient steps of
    // decaying size in y units, with tail averaging.
    if (loss.kind == LossKind::L2) {
      for (std::size_t c = 0; c < 3; ++c) beta[c] -= 0.5 / lambda_max * g[c] / nd;
    } else {
      const Eigen::Vector3d d = pinv * Eigen::Vector3d(g[0], g[1], g[2]) / nd;
      const double lr = y_scale / std::sqrt(static_cast<double>(step) + 1.0);
      for (std::size_t c = 0; c < 3; ++c) beta[c] -= lr * d[static_cast<int>(c)];
    }
    if (!std::isfinite(beta[0] + beta[1] + beta[2])) throw DivergenceError(step, "quadratic regression diverged");
    if (loss.kind == LossKind::Pinball && step >= steps / 2) {
      for (std::size_t c = 0; c < 3; ++c) avg[c] += beta[c];
      ++averaged;
    }
  }
  if (averaged > 0)
    for (std::size_t c = 0; c < 3; ++c) beta[c] = avg[c] / static_cast<double>(averaged);
  return beta;
}

RegressionSpread quadratic_regression_spread(const Matrix& x, const Matrix& y, const LossSpec& loss, double x_eval,
                                             std::size_t inits, const QuadraticRegressionConfig& config, Rng& rng) {
  if (inits < 2) throw DomainError("quadratic_regression_spread: need at least two inits");
  Vector support = x.col(0);
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());

  std::vector<Vector> in_preds(support.size());
  RegressionSpread out;
  for (std::size_t r = 0; r < inits; ++r) {
    std::array<double, 3> init{};
    for (double& v : init) v = rng.uniform(-config.init_scale, config.init_scale);
    const auto beta = fit_quadratic_regression(x, y, loss, init, config.steps);
    for (std::size_t s = 0; s < support.size(); ++s) in_preds[s].push_back(quad(beta, support[s]));
    out.out_predictions.push_back(quad(beta, x_eval));
  }
  auto range = [](const Vector& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
  };
  for (const auto& p : in_preds) out.in_support_range = std::max(out.in_support_range, range(p));
  out.out_support_range = range(out.out_predictions);
  return out;
}

}  // namespace engression
