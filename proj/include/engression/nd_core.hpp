#pragma once

// Dense double-precision matrices, seedable random streams and order statistics.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace engression {

using Vector = std::vector<double>;

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  /// n x 1 column matrix.
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  Vector col(std::size_t c) const;
  bool all_finite() const noexcept;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a * b. Throws ShapeError when a.cols() != b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
/// Rows of `a` selected by index, in order.
Matrix take_rows(const Matrix& a, std::span<const std::size_t> idx);
/// Columns of `a` selected by index, in order.
Matrix take_cols(const Matrix& a, std::span<const std::size_t> idx);
/// Horizontal concatenation; row counts must agree.
Matrix hconcat(const Matrix& a, const Matrix& b);

/// xoshiro256** stream. Single owner; hand out `split()`/`derive()` children
/// instead of sharing across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, second variate cached).
  double normal() noexcept;
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Child stream seeded from this stream's output; advances this stream.
  Rng split() noexcept;
  /// Child stream keyed by `key`; does not advance this stream.
  Rng derive(std::uint64_t key) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
  std::uint64_t seed_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

Vector sample_uniform(Rng& rng, std::size_t n);
Vector sample_normal(Rng& rng, std::size_t n, double mean = 0.0, double sd = 1.0);
/// Random permutation of 0..n-1 (Fisher-Yates).
std::vector<std::size_t> permutation(Rng& rng, std::size_t n);

/// Linear-interpolation ("type 7") quantile at position (n-1)*alpha of the sorted values.
double empirical_quantile(std::span<const double> values, double alpha);
/// Same as empirical_quantile for input that is already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double alpha);

double mean(std::span<const double> v);
/// Sample standard deviation (n-1 denominator); 0 for n < 2.
double stddev(std::span<const double> v);
double median(std::span<const double> v);

}  // namespace engression
