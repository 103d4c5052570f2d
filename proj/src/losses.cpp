#include "engression/losses.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "engression/errors.hpp"

namespace engression {

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
  double ss = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = a[c] - b[c];
    ss += d * d;
  }
  return std::sqrt(ss);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double ss = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = a[c] - b[c];
    ss += d * d;
  }
  return ss;
}

// out += scale * (a - b) / |a - b|, nothing when a == b
void add_unit(std::span<const double> a, std::span<const double> b, double scale, std::span<double> out) {
  const double norm = distance(a, b);
  if (norm == 0.0) return;
  const double f = scale / norm;
  for (std::size_t c = 0; c < a.size(); ++c) out[c] += f * (a[c] - b[c]);
}

void check_batch(const Matrix& y, const Matrix& samples, std::size_t m) {
  if (m < 2) throw DomainError("distributional loss needs at least 2 draws per observation");
  if (samples.rows() != y.rows() * m) throw ShapeError("loss: samples must have n*m rows");
  if (samples.cols() != y.cols()) throw ShapeError("loss: samples and y differ in dimension");
  if (y.rows() == 0) throw DomainError("loss: empty batch");
}

// Sum over unordered pairs of |a_i - a_j| for sorted univariate values.
double pair_abs_sum_sorted(std::span<const double> sorted) {
  const auto m = static_cast<double>(sorted.size());
  double s = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) s += sorted[k] * (2.0 * static_cast<double>(k) + 1.0 - m);
  return s;
}

// Sum over all (i, j) of |a_i - b_j| for sorted univariate values.
double cross_abs_sum_sorted(std::span<const double> a, std::span<const double> b) {
  double total_b = 0.0;
  for (double v : b) total_b += v;
  double below_sum = 0.0;
  std::size_t below = 0;
  double s = 0.0;
  const auto nb = static_cast<double>(b.size());
  for (double v : a) {
    while (below < b.size() && b[below] <= v) below_sum += b[below++];
    const auto cnt = static_cast<double>(below);
    s += v * cnt - below_sum + (total_b - below_sum) - v * (nb - cnt);
  }
  return s;
}

Vector sorted_column(const Matrix& m) {
  Vector v(m.values().begin(), m.values().end());
  std::sort(v.begin(), v.end());
  return v;
}

double mean_distinct_pair_distance(const Matrix& s) {
  const std::size_t m = s.rows();
  if (s.cols() == 1) return 2.0 * pair_abs_sum_sorted(sorted_column(s)) / (static_cast<double>(m) * static_cast<double>(m - 1));
  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t l = j + 1; l < m; ++l) total += distance(s.row(j), s.row(l));
  return 2.0 * total / (static_cast<double>(m) * static_cast<double>(m - 1));
}

}  // namespace

// ---------------------------------------------------------------------------

void Kernel::validate() const {
  if (kind != KernelKind::Energy && !(param > 0.0)) throw DomainError("kernel parameter must be positive");
}

double Kernel::operator()(std::span<const double> a, std::span<const double> b) const {
  switch (kind) {
    case KernelKind::Energy:
      return -distance(a, b);
    case KernelKind::Gaussian:
      return std::exp(-squared_distance(a, b) / (2.0 * param));
    case KernelKind::Laplace:
      return std::exp(-distance(a, b) / param);
    case KernelKind::InverseMultiquadric:
      return 1.0 / std::sqrt(squared_distance(a, b) + param);
  }
  return 0.0;
}

void Kernel::add_grad(std::span<const double> a, std::span<const double> b, double scale,
                      std::span<double> out) const {
  switch (kind) {
    case KernelKind::Energy:
      add_unit(a, b, -scale, out);
      return;
    case KernelKind::Gaussian: {
      const double f = -scale * (*this)(a, b) / param;
      for (std::size_t c = 0; c < a.size(); ++c) out[c] += f * (a[c] - b[c]);
      return;
    }
    case KernelKind::Laplace:
      add_unit(a, b, -scale * (*this)(a, b) / param, out);
      return;
    case KernelKind::InverseMultiquadric: {
      const double base = squared_distance(a, b) + param;
      const double f = -scale / (base * std::sqrt(base));
      for (std::size_t c = 0; c < a.size(); ++c) out[c] += f * (a[c] - b[c]);
      return;
    }
  }
}

LossSpec LossSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const bool has_arg = colon != std::string::npos;
  double arg = 0.0;
  if (has_arg) {
    const std::string rest = text.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), arg);
    if (rest.empty() || ec != std::errc() || ptr != rest.data() + rest.size())
      throw DomainError("loss: bad parameter in '" + text + "'");
  }
  LossSpec spec;
  if (name == "energy") {
    spec = energy();
  } else if (name == "gaussian") {
    spec = gaussian(has_arg ? arg : 1.0);
  } else if (name == "laplace") {
    spec = laplace(has_arg ? arg : 1.0);
  } else if (name == "imq") {
    spec = imq(has_arg ? arg : 1.0);
  } else if (name == "l1") {
    spec = l1();
  } else if (name == "l2") {
    spec = l2();
  } else if (name == "pinball") {
    if (!has_arg) throw DomainError("loss: pinball needs a level, e.g. pinball:0.9");
    spec = pinball(arg);
  } else {
    throw DomainError("unknown loss '" + text + "'");
  }
  spec.validate();
  return spec;
}

std::string LossSpec::to_string() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case LossKind::Energy: return "energy";
    case LossKind::KernelGaussian: os << "gaussian:" << param; break;
    case LossKind::KernelLaplace: os << "laplace:" << param; break;
    case LossKind::KernelIMQ: os << "imq:" << param; break;
    case LossKind::L1: return "l1";
    case LossKind::L2: return "l2";
    case LossKind::Pinball: os << "pinball:" << param; break;
  }
  return os.str();
}

bool LossSpec::distributional() const {
  return kind == LossKind::Energy || kind == LossKind::KernelGaussian || kind == LossKind::KernelLaplace ||
         kind == LossKind::KernelIMQ;
}

Kernel LossSpec::kernel() const {
  switch (kind) {
    case LossKind::Energy: return {KernelKind::Energy, 1.0};
    case LossKind::KernelGaussian: return {KernelKind::Gaussian, param};
    case LossKind::KernelLaplace: return {KernelKind::Laplace, param};
    case LossKind::KernelIMQ: return {KernelKind::InverseMultiquadric, param};
    default: throw DomainError("loss " + to_string() + " has no kernel");
  }
}

void LossSpec::validate() const {
  switch (kind) {
    case LossKind::KernelGaussian:
    case LossKind::KernelLaplace:
    case LossKind::KernelIMQ:
      if (!(param > 0.0)) throw DomainError("kernel loss parameter must be positive");
      break;
    case LossKind::Pinball:
      if (!(param > 0.0 && param < 1.0)) throw DomainError("pinball level must lie in (0, 1)");
      break;
    default:
      break;
  }
}

// ---------------------------------------------------------------------------

double energy_loss_batch(const Matrix& y, const Matrix& samples, std::size_t m) {
  check_batch(y, samples, m);
  const std::size_t n = y.rows();
  const double md = static_cast<double>(m);
  const double pair_norm = 2.0 * md * (md - 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto yi = y.row(i);
    double fit = 0.0;
    for (std::size_t j = 0; j < m; ++j) fit += distance(samples.row(i * m + j), yi);
    double spread = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t l = 0; l < m; ++l) spread += distance(samples.row(i * m + j), samples.row(i * m + l));
    total += fit / md - spread / pair_norm;
  }
  return total / static_cast<double>(n);
}

Matrix energy_loss_grad(const Matrix& y, const Matrix& samples, std::size_t m) {
  check_batch(y, samples, m);
  const std::size_t n = y.rows();
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);
  const double fit_scale = 1.0 / (nd * md);
  const double spread_scale = -2.0 / (nd * 2.0 * md * (md - 1.0));
  Matrix grad(samples.rows(), samples.cols());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const auto g = samples.row(i * m + j);
      auto out = grad.row(i * m + j);
      add_unit(g, y.row(i), fit_scale, out);
      for (std::size_t l = 0; l < m; ++l)
        if (l != j) add_unit(g, samples.row(i * m + l), spread_scale, out);
    }
  }
  return grad;
}

double kernel_loss_batch(const Matrix& y, const Matrix& samples, std::size_t m, const Kernel& kernel) {
  check_batch(y, samples, m);
  kernel.validate();
  const std::size_t n = y.rows();
  const double md = static_cast<double>(m);
  const double pair_norm = 2.0 * md * (md - 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto yi = y.row(i);
    double fit = 0.0;
    for (std::size_t j = 0; j < m; ++j) fit += kernel(samples.row(i * m + j), yi);
    double spread = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t l = 0; l < m; ++l)
        if (l != j) spread += kernel(samples.row(i * m + j), samples.row(i * m + l));
    total += -fit / md + spread / pair_norm;
  }
  return total / static_cast<double>(n);
}

Matrix kernel_loss_grad(const Matrix& y, const Matrix& samples, std::size_t m, const Kernel& kernel) {
  check_batch(y, samples, m);
  kernel.validate();
  const std::size_t n = y.rows();
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);
  const double fit_scale = -1.0 / (nd * md);
  const double spread_scale = 2.0 / (nd * 2.0 * md * (md - 1.0));
  Matrix grad(samples.rows(), samples.cols());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const auto g = samples.row(i * m + j);
      auto out = grad.row(i * m + j);
      kernel.add_grad(g, y.row(i), fit_scale, out);
      for (std::size_t l = 0; l < m; ++l)
        if (l != j) kernel.add_grad(g, samples.row(i * m + l), spread_scale, out);
    }
  }
  return grad;
}

double pinball_loss(std::span<const double> y, std::span<const double> pred, double alpha) {
  if (y.size() != pred.size()) throw ShapeError("pinball_loss: length mismatch");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("pinball level must lie in (0, 1)");
  if (y.empty()) throw DomainError("pinball_loss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - pred[i];
    total += r * (alpha - (r < 0.0 ? 1.0 : 0.0));
  }
  return total / static_cast<double>(y.size());
}

LossAndGrad evaluate_loss(const LossSpec& spec, const Matrix& y, const Matrix& samples, std::size_t m) {
  spec.validate();
  if (spec.distributional()) {
    if (spec.kind == LossKind::Energy) return {energy_loss_batch(y, samples, m), energy_loss_grad(y, samples, m)};
    const Kernel k = spec.kernel();
    return {kernel_loss_batch(y, samples, m, k), kernel_loss_grad(y, samples, m, k)};
  }
  if (m == 0 || samples.rows() != y.rows() * m || samples.cols() != y.cols())
    throw ShapeError("loss: samples must have n*m rows and y's column count");
  if (y.rows() == 0) throw DomainError("loss: empty batch");
  const double scale = 1.0 / static_cast<double>(samples.rows());
  LossAndGrad out{0.0, Matrix(samples.rows(), samples.cols())};
  double total = 0.0;
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    const auto yi = y.row(r / m);
    const auto g = samples.row(r);
    auto d = out.grad.row(r);
    for (std::size_t c = 0; c < g.size(); ++c) {
      const double res = yi[c] - g[c];
      switch (spec.kind) {
        case LossKind::L1:
          total += std::abs(res);
          d[c] = res > 0.0 ? -scale : (res < 0.0 ? scale : 0.0);
          break;
        case LossKind::L2:
          total += res * res;
          d[c] = -2.0 * res * scale;
          break;
        case LossKind::Pinball: {
          const double slope = spec.param - (res < 0.0 ? 1.0 : 0.0);
          total += res * slope;
          d[c] = -slope * scale;
          break;
        }
        default:
          break;
      }
    }
  }
  out.value = total * scale;
  return out;
}

// ---------------------------------------------------------------------------

double energy_score_mc(const Matrix& samples, std::span<const double> z) {
  if (samples.rows() < 2) throw DomainError("energy_score_mc: need at least 2 samples");
  if (samples.cols() != z.size()) throw ShapeError("energy_score_mc: dimension mismatch");
  double fit = 0.0;
  for (std::size_t j = 0; j < samples.rows(); ++j) fit += distance(samples.row(j), z);
  fit /= static_cast<double>(samples.rows());
  return 0.5 * mean_distinct_pair_distance(samples) - fit;
}

double energy_distance_mc(const Matrix& p, const Matrix& q) {
  if (p.rows() < 2 || q.rows() < 2) throw DomainError("energy_distance_mc: need at least 2 samples per set");
  if (p.cols() != q.cols()) throw ShapeError("energy_distance_mc: dimension mismatch");
  double cross = 0.0;
  if (p.cols() == 1) {
    cross = cross_abs_sum_sorted(sorted_column(p), sorted_column(q));
  } else {
    for (std::size_t i = 0; i < p.rows(); ++i)
      for (std::size_t j = 0; j < q.rows(); ++j) cross += distance(p.row(i), q.row(j));
  }
  cross /= static_cast<double>(p.rows()) * static_cast<double>(q.rows());
  return 2.0 * cross - mean_distinct_pair_distance(p) - mean_distinct_pair_distance(q);
}

double cramer_distance_exact(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("cramer_distance_exact: empty sample");
  Vector sa(a.begin(), a.end());
  Vector sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t ia = 0;
  std::size_t ib = 0;
  double total = 0.0;
  double prev = std::min(sa.front(), sb.front());
  // Walk breakpoints in order; F_a and F_b are constant between consecutive ones.
  while (ia < sa.size() || ib < sb.size()) {
    const double next = (ib >= sb.size() || (ia < sa.size() && sa[ia] <= sb[ib])) ? sa[ia] : sb[ib];
    const double diff = static_cast<double>(ia) / na - static_cast<double>(ib) / nb;
    total += diff * diff * (next - prev);
    while (ia < sa.size() && sa[ia] == next) ++ia;
    while (ib < sb.size() && sb[ib] == next) ++ib;
    prev = next;
  }
  return total;
}

double crps_sample(std::span<const double> samples, double z) {
  const double point[1] = {z};
  return cramer_distance_exact(samples, point);
}

double crps_gaussian(double mu, double sd, double z) {
  if (!(sd > 0.0)) throw DomainError("crps_gaussian: sd must be positive");
  const double w = (z - mu) / sd;
  const double cdf = 0.5 * std::erfc(-w / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * w * w) / std::sqrt(2.0 * std::numbers::pi);
  return sd * (w * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(std::numbers::pi));
}

double mmd_squared(const Matrix& p, const Matrix& q, const Kernel& kernel) {
  if (p.rows() < 2 || q.rows() < 2) throw DomainError("mmd_squared: need at least 2 samples per set");
  if (p.cols() != q.cols()) throw ShapeError("mmd_squared: dimension mismatch");
  if (kernel.kind == KernelKind::Energy) throw DomainError("mmd_squared: needs a positive-definite kernel");
  kernel.validate();
  auto within = [&kernel](const Matrix& s) {
    double total = 0.0;
    for (std::size_t j = 0; j < s.rows(); ++j)
      for (std::size_t l = j + 1; l < s.rows(); ++l) total += kernel(s.row(j), s.row(l));
    const auto m = static_cast<double>(s.rows());
    return 2.0 * total / (m * (m - 1.0));
  };
  double cross = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < q.rows(); ++j) cross += kernel(p.row(i), q.row(j));
  cross /= static_cast<double>(p.rows()) * static_cast<double>(q.rows());
  return within(p) - 2.0 * cross + within(q);
}

}  // namespace engression
