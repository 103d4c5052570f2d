#pragma once

// Metrics and seed-replicated benchmark orchestration.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "engression/baselines.hpp"
#include "engression/engression.hpp"
#include "engression/simgen.hpp"

namespace engression {

/// Loss summary on one region; `value` is empty when the region has no points.
struct RegionValue {
  std::optional<double> value;
  std::size_t count = 0;
};

struct RegionLosses {
  RegionValue in_support;  // x <= x_max
  RegionValue band;        // x_max < x <= band_hi
  RegionValue out_support; // x > x_max, band included
};

struct RegionReport {
  RegionLosses l1;
  RegionLosses l2;
};

/// Pointwise |pred - truth| and (pred - truth)^2 averaged per region along column `dim` of x.
/// The band is (x_max, x_max + eta_max].
RegionReport region_losses(std::span<const double> pred, std::span<const double> truth, const Matrix& x, double x_max,
                           double eta_max, std::size_t dim = 0);
/// Same with an explicit upper band edge.
RegionReport region_losses_band(std::span<const double> pred, std::span<const double> truth, const Matrix& x,
                                double x_max, double band_hi, std::size_t dim = 0);

/// Fraction of rows with lower <= y <= upper.
double coverage(const Matrix& intervals, std::span<const double> y);
/// Mean sample CRPS; draws is (rows * m) x 1, observation-major.
double mean_crps(const Matrix& draws, std::size_t m, std::span<const double> y);
/// Least-squares slope of log(error) on log(n).
double rate_slope(std::span<const double> ns, std::span<const double> errors);
/// First grid point (ascending) whose error exceeds `threshold`; the last grid point when none does.
double first_exceedance(std::span<const double> grid, std::span<const double> errors, double threshold);

struct HyperParams {
  std::size_t layers = 3;
  std::size_t hidden = 100;
  double lr = 1e-2;
  std::size_t steps = 1000;

  bool operator==(const HyperParams&) const = default;
};

nlohmann::json to_json(const HyperParams& h);
HyperParams hyper_params_from_json(const nlohmann::json& j);

/// Grid used when none is given: layers/hidden in {(2,100),(3,10),(3,100)}, lr in {1e-3,1e-2},
/// steps in {500,1000,3000}.
std::vector<HyperParams> default_hyper_grid();

struct BenchmarkConfig {
  SimSetting setting = SimSetting::softplus();
  std::vector<std::string> methods{"engression"};  // engression, nn_l1, nn_l2, lin_ols, lin_qr
  std::vector<HyperParams> grid{HyperParams{}};
  std::size_t reps = 1;
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  double test_x_hi = 0.0;  // 0 picks x_max + 2 eta_max
  std::size_t noise_dim = 100;
  std::size_t nsample = kDefaultSamples;
  double interval_level = 0.95;
  bool cv = false;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 reads ENGRESS_THREADS, default 1

  void validate() const;
};

struct BenchmarkCell {
  std::string method;
  std::size_t rep = 0;
  std::size_t hyper_index = 0;
  std::string region;  // in, band, out
  std::size_t points = 0;
  std::optional<double> l1, l2, crps, coverage;
  std::optional<std::string> error;
};

struct BenchmarkSummary {
  std::string method;
  std::string region;
  std::string metric;
  double median = 0.0;
  double iqr = 0.0;
  std::size_t count = 0;
};

struct BenchmarkReport {
  std::string setting;
  std::string fingerprint;
  std::vector<HyperParams> grid;
  std::vector<BenchmarkCell> cells;
  std::vector<BenchmarkSummary> summary;

  nlohmann::json to_json() const;
  /// Header: method,rep,hyper,region,points,l1,l2,crps,coverage,error
  std::string to_csv() const;
};

BenchmarkReport run_benchmark(const BenchmarkConfig& config);

/// Threads requested through ENGRESS_THREADS, at least 1.
std::size_t threads_from_env();

}  // namespace engression
