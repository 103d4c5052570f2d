#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "engression/baselines.hpp"
#include "engression/errors.hpp"

using namespace engression;

namespace {

NetConfig net() {
  NetConfig c;
  c.hidden_dim = 32;
  c.num_layers = 2;
  return c;
}

TrainConfig steps(std::size_t n, double lr = 1e-2) {
  TrainConfig t;
  t.steps = n;
  t.lr = lr;
  return t;
}

double mse_between(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(a.values()[i] - b.values()[i], 2);
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST(Ols, NoiselessLineIsExact) {
  Matrix x(10, 1), y(10, 1);
  for (std::size_t i = 0; i < 10; ++i) x(i, 0) = static_cast<double>(i) - 3.0, y(i, 0) = 3.0 * x(i, 0) + 1.0;
  const BaselineModel m = fit_linear_ols(x, y);
  EXPECT_NEAR(m.coef(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(m.coef(1, 0), 3.0, 1e-10);
  EXPECT_FALSE(m.jittered);
}

TEST(Ols, HandSolvedThreePointSystem) {
  // Points (-1, 0), (0, 1), (1, 5): centred design, slope = (5 - 0) / 2, intercept = mean(y) = 2.
  const BaselineModel m = fit_linear_ols(Matrix::from_rows({{-1}, {0}, {1}}), Matrix::from_rows({{0}, {1}, {5}}));
  EXPECT_NEAR(m.coef(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(m.coef(1, 0), 2.5, 1e-12);
}

TEST(Ols, RankDeficientDesignUsesJitter) {
  Matrix x(6, 2), y(6, 1);
  for (std::size_t i = 0; i < 6; ++i) x(i, 0) = static_cast<double>(i), x(i, 1) = 4.0, y(i, 0) = 2.0 * x(i, 0);
  const BaselineModel m = fit_linear_ols(x, y);
  EXPECT_TRUE(m.jittered);
  const Matrix p = m.predict(x);
  EXPECT_TRUE(p.all_finite());
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(p(i, 0), y(i, 0), 1e-6);
}

TEST(NnRegression, L2ApproachesOlsOnLinearData) {
  Rng rng(1);
  Matrix x(2000, 2), y(2000, 1);
  for (std::size_t i = 0; i < 2000; ++i) {
    x(i, 0) = rng.normal(), x(i, 1) = rng.normal();
    y(i, 0) = 1.5 * x(i, 0) - 0.5 * x(i, 1) + 0.2 + 0.5 * rng.normal();
  }
  const BaselineModel nn = fit_nn_regression(x, y, LossSpec::l2(), net(), steps(1000), rng);
  const BaselineModel ols = fit_linear_ols(x, y);
  Matrix xt(500, 2), ft(500, 1);
  for (std::size_t i = 0; i < 500; ++i) {
    xt(i, 0) = rng.normal(), xt(i, 1) = rng.normal();
    ft(i, 0) = 1.5 * xt(i, 0) - 0.5 * xt(i, 1) + 0.2;
  }
  // Distance to the regression function, on fresh covariates.
  EXPECT_LT(mse_between(ols.predict(xt), ft), 1e-3);
  EXPECT_LT(mse_between(nn.predict(xt), ft), 0.02);
}

TEST(NnRegression, L1TracksMedianAndL2TracksMean) {
  Rng rng(2);
  Matrix x(2000, 1), y(2000, 1);
  for (std::size_t i = 0; i < 2000; ++i) {
    x(i, 0) = rng.uniform(-1, 1);
    const double e = -std::log(1.0 - rng.uniform()) - std::numbers::ln2;  // skewed, median 0, mean 1 - ln 2
    y(i, 0) = x(i, 0) + e;
  }
  const BaselineModel l1 = fit_nn_regression(x, y, LossSpec::l1(), net(), steps(1500), rng);
  const BaselineModel l2 = fit_nn_regression(x, y, LossSpec::l2(), net(), steps(1500), rng);
  Matrix grid(11, 1);
  for (std::size_t i = 0; i < 11; ++i) grid(i, 0) = -0.9 + 0.18 * static_cast<double>(i);
  const Matrix p1 = l1.predict(grid);
  const Matrix p2 = l2.predict(grid);
  double off1 = 0.0, off2 = 0.0;
  for (std::size_t i = 0; i < 11; ++i) off1 += (p1(i, 0) - grid(i, 0)) / 11.0, off2 += (p2(i, 0) - grid(i, 0)) / 11.0;
  EXPECT_NEAR(off1, 0.0, 0.08);
  EXPECT_NEAR(off2, 1.0 - std::numbers::ln2, 0.08);
}

TEST(NnRegression, ConstantResponse) {
  Rng rng(3);
  Matrix x(100, 1), y(100, 1, 4.25);
  for (double& v : x.values()) v = rng.normal();
  const BaselineModel nn = fit_nn_regression(x, y, LossSpec::l2(), net(), steps(200), rng);
  const Matrix p = nn.predict(x);
  for (double v : p.values()) EXPECT_NEAR(v, 4.25, 1e-2);
  EXPECT_THROW(fit_nn_regression(x, y, LossSpec::energy(), net(), steps(1), rng), DomainError);
}

TEST(LinearQuantile, MedianSlopeMatchesOls) {
  Rng rng(4);
  Matrix x(1000, 1), y(1000, 1);
  for (std::size_t i = 0; i < 1000; ++i) x(i, 0) = rng.uniform(-2, 2), y(i, 0) = 0.7 * x(i, 0) + rng.normal();
  const double a[] = {0.5};
  const BaselineModel qr = fit_linear_quantile(x, y, a, steps(3000));
  EXPECT_NEAR(qr.coef(1, 0), fit_linear_ols(x, y).coef(1, 0), 0.05);
}

TEST(LinearQuantile, UpperGaussianQuantile) {
  Rng rng(5);
  Matrix x(5000, 1), y(5000, 1);
  for (std::size_t i = 0; i < 5000; ++i) x(i, 0) = rng.uniform(-1, 1), y(i, 0) = x(i, 0) + rng.normal();
  const double a[] = {0.975};
  const BaselineModel qr = fit_linear_quantile(x, y, a, steps(3000));
  EXPECT_NEAR(qr.coef(0, 0), 1.96, 0.1);
  EXPECT_NEAR(qr.coef(1, 0), 1.0, 0.15);
}

TEST(LinearQuantile, NoiselessLevelsCoincide) {
  Matrix x(200, 1), y(200, 1);
  for (std::size_t i = 0; i < 200; ++i) x(i, 0) = -1.0 + 0.01 * static_cast<double>(i), y(i, 0) = 2.0 - x(i, 0);
  const double a[] = {0.1, 0.5, 0.9};
  const BaselineModel qr = fit_linear_quantile(x, y, a, steps(4000));
  const Matrix p = qr.predict(x);
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(p(i, c), y(i, 0), 1e-3);
}

TEST(Baselines, SaveLoadRoundTrip) {
  Rng rng(6);
  Matrix x(50, 1), y(50, 1);
  for (std::size_t i = 0; i < 50; ++i) x(i, 0) = rng.normal(), y(i, 0) = x(i, 0) + rng.normal();
  const double a[] = {0.25, 0.75};
  for (const BaselineModel& m : {fit_linear_ols(x, y), fit_linear_quantile(x, y, a, steps(50)),
                                 fit_nn_regression(x, y, LossSpec::l1(), net(), steps(20), rng)}) {
    const BaselineModel back = BaselineModel::load(m.save());
    EXPECT_EQ(back.kind, m.kind);
    EXPECT_EQ(back.predict(x), m.predict(x));
    EXPECT_EQ(back.save(), m.save());
  }
  EXPECT_THROW(BaselineModel::load("{}"), FormatError);
  EXPECT_EQ(baseline_kind_from_string(to_string(BaselineKind::LinearQr)), BaselineKind::LinearQr);
}
