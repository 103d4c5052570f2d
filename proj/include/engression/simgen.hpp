#pragma once

// Synthetic data with known conditional laws.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "engression/nd_core.hpp"
#include "engression/theory_oracle.hpp"

namespace engression {

enum class SettingKind { Softplus, Square, Cubic, Log, QuadraticTwoPoint, QuadraticPostAnmMisspec, PrePostAnm };

struct SimSetting {
  SettingKind kind = SettingKind::Softplus;
  double x_lo = -2.0;  // X ~ Unif[x_lo, x_hi] for continuous designs
  double x_hi = 2.0;
  double noise_sd = 1.0;  // Gaussian pre-noise sd (monotone and pre-post settings)
  NoiseDist noise = NoiseDist::uniform(1.0);  // noise of the two-point designs
  std::array<double, 3> beta{1.0, 1.0, 0.5};  // quadratic coefficients (two-point designs, pre-post theta)
  double x1 = 2.0;
  double x2 = 4.0;
  double linear = 0.0;   // pre-post: coefficient of the direct X term
  double post_sd = 0.0;  // pre-post: sd of the Gaussian post-noise

  static SimSetting softplus();
  static SimSetting square();
  static SimSetting cubic();
  static SimSetting log();
  static SimSetting quadratic_two_point(std::array<double, 3> beta = {1.0, 1.0, 0.5},
                                        NoiseDist noise = NoiseDist::uniform(1.0), double x1 = 2.0, double x2 = 4.0);
  static SimSetting quadratic_post_anm(std::array<double, 3> beta = {1.0, 1.0, 0.5},
                                       NoiseDist noise = NoiseDist::uniform(1.0), double x1 = 2.0, double x2 = 4.0);
  static SimSetting pre_post_anm();
  /// "softplus", "square", "cubic", "log", "quadratic", "quadratic_postanm", "prepost".
  static SimSetting by_name(const std::string& name);

  std::string name() const;
  bool two_point() const;
  bool monotone_table() const;  // one of the four single-index Gaussian pre-noise settings
  /// Upper end of the training support.
  double x_max() const;
  /// Effective noise bound: 2 sd for Gaussian pre-noise, the support bound otherwise.
  double eta_max() const;
  void validate() const;
};

/// Ground-truth handle of a setting.
class Truth {
 public:
  explicit Truth(SimSetting setting);

  const SimSetting& setting() const { return setting_; }
  /// Noise-free structural function: g(x) for the monotone settings, the quadratic map otherwise.
  double g(double x) const;
  double median(double x) const;
  double quantile(double x, double alpha) const;
  double mean(double x) const;
  /// One draw of Y given X = x.
  double draw(double x, Rng& rng) const;

  Vector median(std::span<const double> x) const;
  Vector mean(std::span<const double> x) const;

 private:
  double noise_draw(Rng& rng) const;
  Vector mc_sorted_draws(double x) const;

  SimSetting setting_;
  Vector oracle_noise_;  // standardized noise draws from a fixed seed, for MC means
};

inline constexpr std::uint64_t kOracleSeed = 20230512;
inline constexpr std::size_t kOracleDraws = 100000;

struct SimData {
  Matrix x;  // n x 1
  Matrix y;  // n x 1
  SimSetting setting;
  Truth truth() const { return Truth(setting); }
};

SimData generate(const SimSetting& setting, std::size_t n, Rng& rng);

enum class Keep { Smaller, Larger };

struct Split {
  Matrix x_train, y_train, x_test, y_test;
  double threshold = 0.0;
};

/// Keep::Smaller trains on rows with x[dim] <= Q_q(x[dim]) and tests on the rest.
Split split_at_quantile(const Matrix& x, const Matrix& y, double q, Keep keep, std::size_t split_dim = 0);

/// Regenerates a monotone setting at every noise sd with paired X and standardized noise.
std::vector<SimData> noise_level_sweep(const SimSetting& setting, std::span<const double> sds, std::size_t n, Rng& rng);

}  // namespace engression
