#include <gtest/gtest.h>

#include <cmath>

#include "engression/errors.hpp"
#include "engression/optim.hpp"

using namespace engression;

namespace {

NetConfig net1(std::size_t hidden, std::size_t noise) {
  NetConfig c;
  c.hidden_dim = hidden;
  c.num_layers = 1;
  c.noise_dim = noise;
  return c;
}

}  // namespace

TEST(Adam, FirstStepIsUnitScaled) {
  AdamState s(1, 0.1);
  Vector p{0.0};
  const Vector g{1.0};
  s.update(p, g);
  EXPECT_NEAR(p[0], -0.1, 1e-8);
  EXPECT_EQ(s.t, 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  AdamState s(3, 0.1);
  Vector p{1.0, -2.0, 3.0};
  const Vector before = p;
  for (int i = 0; i < 5; ++i) s.update(p, Vector(3, 0.0));
  EXPECT_EQ(p, before);
}

TEST(Adam, SizeMismatchIsAContractError) {
  AdamState s(2, 0.1);
  Vector p{1.0, 2.0, 3.0};
  EXPECT_THROW(s.update(p, Vector(3, 0.0)), ContractError);
}

TEST(Adam, NetStepMatchesFlatUpdate) {
  Rng rng(1);
  const NetConfig c = net1(4, 2);
  NetParams p = init_params(c, rng);
  NetParams g = NetParams::zeros_like(p);
  for (auto t : g.tensors())
    for (double& v : t) v = rng.normal();
  Vector flat_p, flat_g;
  for (auto t : p.tensors()) flat_p.insert(flat_p.end(), t.begin(), t.end());
  for (auto t : g.tensors()) flat_g.insert(flat_g.end(), t.begin(), t.end());
  AdamState a(p.num_values(), 0.01), b(p.num_values(), 0.01);
  adam_step(p, g, a);
  b.update(flat_p, flat_g);
  Vector after;
  for (auto t : p.tensors()) after.insert(after.end(), t.begin(), t.end());
  EXPECT_EQ(after, flat_p);
}

TEST(TrainConfig, ValidationAndJson) {
  TrainConfig c;
  c.m_per_obs = 1;
  EXPECT_THROW(c.validate(), DomainError);
  c.loss = LossSpec::l2();
  EXPECT_NO_THROW(c.validate());
  c.lr = -1;
  EXPECT_THROW(c.validate(), DomainError);
  c.lr = 1e-2;
  c.lr_end = -1;
  EXPECT_THROW(c.validate(), DomainError);
  TrainConfig d;
  d.lr_end = 1e-4;
  d.loss = LossSpec::pinball(0.3);
  d.steps = 17;
  d.batch_size = 8;
  d.optimizer = OptimizerKind::GradientDescent;
  EXPECT_EQ(train_config_from_json(to_json(d)), d);
}

TEST(Train, ZeroStepsKeepsParameters) {
  Rng rng(2);
  const NetConfig c = net1(4, 2);
  const NetParams p = init_params(c, rng);
  TrainConfig t;
  t.steps = 0;
  const auto r = train(p, c, Matrix(5, 1, 1.0), Matrix(5, 1, 2.0), t, rng);
  EXPECT_EQ(r.params, p);
  EXPECT_TRUE(r.loss_trace.empty());
}

TEST(Train, DeterministicGivenSeed) {
  const NetConfig c = net1(8, 4);
  Matrix x(50, 1), y(50, 1);
  Rng data(3);
  for (std::size_t i = 0; i < 50; ++i) x(i, 0) = data.normal(), y(i, 0) = x(i, 0) + data.normal();
  TrainConfig t;
  t.steps = 30;
  auto run = [&](std::size_t batch) {
    Rng rng(4);
    TrainConfig tc = t;
    tc.batch_size = batch;
    return train(init_params(c, rng), c, x, y, tc, rng);
  };
  for (std::size_t batch : {0, 16}) {
    const auto a = run(batch), b = run(batch);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.loss_trace, b.loss_trace);
  }
}

TEST(Train, LrEndDecaysFromTheFirstStep) {
  const NetConfig c = net1(8, 4);
  Matrix x(20, 1), y(20, 1);
  Rng data(6);
  for (std::size_t i = 0; i < 20; ++i) x(i, 0) = data.normal(), y(i, 0) = data.normal();
  auto run = [&](std::size_t steps, double lr_end) {
    Rng rng(7);
    TrainConfig t;
    t.steps = steps;
    t.lr_end = lr_end;
    return train(init_params(c, rng), c, x, y, t, rng).params;
  };
  EXPECT_EQ(run(1, 1e-4), run(1, 0.0));
  EXPECT_EQ(run(5, 1e-2), run(5, 0.0));
  EXPECT_NE(run(5, 1e-4), run(5, 0.0));
}

TEST(Train, LinearRegressionWithL2) {
  const NetConfig c = net1(16, 0);
  Rng rng(5);
  Matrix x(200, 1), y(200, 1);
  for (std::size_t i = 0; i < 200; ++i) x(i, 0) = rng.uniform(-1, 1), y(i, 0) = 2.0 * x(i, 0);
  TrainConfig t;
  t.loss = LossSpec::l2();
  t.m_per_obs = 1;
  t.steps = 2000;
  const auto r = train(init_params(c, rng), c, x, y, t, rng);
  Matrix grid(41, 1);
  for (std::size_t i = 0; i < 41; ++i) grid(i, 0) = -1.0 + 0.05 * static_cast<double>(i);
  const Matrix pred = generate(r.params, c, grid, rng);
  double mse = 0.0;
  for (std::size_t i = 0; i < 41; ++i) mse += std::pow(pred(i, 0) - 2.0 * grid(i, 0), 2) / 41.0;
  EXPECT_LT(mse, 1e-3);
  for (double v : r.loss_trace) EXPECT_TRUE(std::isfinite(v));
}

TEST(Train, EnergyLossRecoversNoiseScale) {
  NetConfig c = net1(32, 8);
  Rng rng(6);
  Matrix x(1000, 1), y(1000, 1);
  for (std::size_t i = 0; i < 1000; ++i) x(i, 0) = rng.uniform(-1, 1), y(i, 0) = x(i, 0) + rng.normal();
  TrainConfig t;
  t.steps = 1500;
  const auto r = train(init_params(c, rng), c, x, y, t, rng);
  const Vector draws = generate(r.params, c, Matrix(2000, 1, 0.0), rng).col(0);
  EXPECT_GE(stddev(draws), 0.8);
  EXPECT_LE(stddev(draws), 1.2);
}

TEST(Train, DivergenceCarriesStep) {
  const NetConfig c = net1(4, 0);
  Rng rng(7);
  TrainConfig t;
  t.loss = LossSpec::l2();
  t.m_per_obs = 1;
  t.lr = 1e150;
  t.steps = 100;
  t.optimizer = OptimizerKind::GradientDescent;
  Matrix x = Matrix::from_rows({{1}, {2}}), y = Matrix::from_rows({{1e100}, {-1e100}});
  try {
    train(init_params(c, rng), c, x, y, t, rng);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_LT(e.step(), 100u);
  }
}

TEST(Train, RejectsBadData) {
  const NetConfig c = net1(4, 2);
  Rng rng(8);
  TrainConfig t;
  Matrix x(3, 1), y(3, 1);
  y(1, 0) = std::nan("");
  EXPECT_THROW(train(init_params(c, rng), c, x, y, t, rng), DomainError);
  EXPECT_THROW(train(init_params(c, rng), c, x, Matrix(2, 1), t, rng), ShapeError);
}

TEST(RepeatRows, ObservationMajor) {
  EXPECT_EQ(repeat_rows(Matrix::from_rows({{1}, {2}}), 2), Matrix::from_rows({{1}, {1}, {2}, {2}}));
}
