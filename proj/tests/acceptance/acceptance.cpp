// Acceptance suite: one PASS/FAIL line per criterion, one JSON report per criterion.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "engression/baselines.hpp"
#include "engression/engression.hpp"
#include "engression/evalx.hpp"
#include "engression/losses.hpp"
#include "engression/quadratic_fit.hpp"
#include "engression/simgen.hpp"
#include "engression/theory_oracle.hpp"
#include "gradcheck.hpp"

namespace {

using namespace engression;
using Json = nlohmann::ordered_json;

struct Context {
  std::uint64_t seed = 1;
  std::size_t seed_limit = 0;  // 0 runs every seed

  std::size_t seeds(std::size_t full) const { return seed_limit ? std::min(seed_limit, full) : full; }
};

struct Outcome {
  bool pass = false;
  std::string summary;
  Json report;
};

Rng stream(const Context& c, std::uint64_t criterion, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(c.seed).derive(criterion).derive(a).derive(b);
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

Json header(const Context& c, int id) {
  Json r;
  r["criterion"] = id;
  r["seed"] = c.seed;
  return r;
}

// Stored long-run unit keyed by "id".
Json& add_unit(Json& report, const std::string& id) {
  report["units"].push_back(Json{{"id", id}});
  return report["units"].back();
}

std::size_t count_if_true(const std::vector<bool>& v) { return static_cast<std::size_t>(std::count(v.begin(), v.end(), true)); }

bool strictly_decreasing(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

// Training used for every n = 10^4 simulation fit.
TrainConfig desk_train() {
  TrainConfig t;
  t.steps = 3000;
  t.lr = 1e-2;
  t.batch_size = 1000;
  return t;
}

// ---------------------------------------------------------------------------

Outcome criterion1(const Context& c) {
  const std::vector<std::pair<std::string, LossSpec>> losses = {
      {"energy", LossSpec::energy()}, {"gaussian", LossSpec::gaussian(1.0)}, {"laplace", LossSpec::laplace(0.7)},
      {"imq", LossSpec::imq(2.0)},    {"l1", LossSpec::l1()},                {"l2", LossSpec::l2()},
      {"pinball", LossSpec::pinball(0.3)}};
  Json report = header(c, 1);
  double worst = 0.0;
  std::size_t checked = 0, kinks = 0, cases = 0;
  for (std::size_t layers : {1, 2, 3})
    for (std::size_t width : {3, 16})
      for (std::size_t noise : {0, 8})
        for (const auto& [name, loss] : losses)
          for (std::size_t out : {1, 2}) {
            NetConfig net;
            net.in_dim = 2;
            net.out_dim = out;
            net.hidden_dim = width;
            net.num_layers = layers;
            net.noise_dim = noise;
            Rng rng = stream(c, 1, cases++);
            const auto problem = gradcheck::GradProblem::random(net, loss, 3, 3, rng);
            const gradcheck::GradCheck r = gradcheck::check_gradients(problem);
            worst = std::max(worst, r.max_rel_err);
            checked += r.checked;
            kinks += r.kinks;
            report["cases"].push_back({{"layers", layers}, {"width", width}, {"noise_dim", noise}, {"loss", name},
                                       {"out_dim", out}, {"max_rel_err", r.max_rel_err}, {"checked", r.checked},
                                       {"kinks", r.kinks}});
          }
  const double kink_fraction = static_cast<double>(kinks) / static_cast<double>(checked + kinks);
  const bool pass = worst < 1e-5 && kink_fraction < 0.01;
  report["max_rel_err"] = worst;
  report["checked"] = checked;
  report["kinks"] = kinks;
  report["pass"] = pass;
  return {pass, std::to_string(cases) + " nets, " + std::to_string(checked) + " entries, max rel err " + fmt(worst) +
                    ", kinks skipped " + std::to_string(kinks),
          report};
}

// ---------------------------------------------------------------------------

Outcome criterion2(const Context& c) {
  Json report = header(c, 2);
  bool pass = true;

  // Energy score of N(0,1) at z against the closed-form CRPS.
  constexpr std::size_t m = 100000, reps = 20;
  double worst_se = 0.0;
  std::size_t zi = 0;
  for (double z : {-2.0, -0.5, 0.0, 1.0, 2.5}) {
    Rng rng = stream(c, 2, 1, zi++);
    Vector es, crps;
    for (std::size_t r = 0; r <= reps; ++r) {
      Matrix s(m, 1);
      for (double& v : s.values()) v = rng.normal();
      es.push_back(energy_score_mc(s, std::span<const double>(&z, 1)));
      crps.push_back(crps_sample(s.values(), z));
    }
    const double target = crps_gaussian(0.0, 1.0, z);
    const double se = stddev(std::span<const double>(es).subspan(1));
    const double es_dev = std::abs(es[0] + target) / se;
    const double crps_dev = std::abs(crps[0] - target) / stddev(std::span<const double>(crps).subspan(1));
    worst_se = std::max({worst_se, es_dev, crps_dev});
    pass = pass && es_dev <= 3.0 && crps_dev <= 3.0;
    report["energy_score"].push_back({{"z", z}, {"estimate", es[0]}, {"minus_crps", -target}, {"se", se},
                                      {"deviation_se", es_dev}, {"crps_sample_deviation_se", crps_dev}});
  }

  // Energy kernel against the energy loss.
  bool bit_exact = true;
  for (std::size_t k : {1, 3}) {
    Rng rng = stream(c, 2, 2, k);
    const std::size_t n = 50, draws = 4;
    Matrix y(n, k), s(n * draws, k);
    for (double& v : y.values()) v = rng.normal();
    for (double& v : s.values()) v = rng.normal();
    const Kernel energy = LossSpec::energy().kernel();
    bit_exact = bit_exact && kernel_loss_batch(y, s, draws, energy) == energy_loss_batch(y, s, draws);
    const Matrix ga = kernel_loss_grad(y, s, draws, energy);
    const Matrix gb = energy_loss_grad(y, s, draws);
    bit_exact = bit_exact && std::equal(ga.values().begin(), ga.values().end(), gb.values().begin());
  }
  report["energy_kernel_bit_exact"] = bit_exact;
  pass = pass && bit_exact;

  // Propriety: the true law scores higher than each alternative.
  struct Alt {
    std::string name;
    double mu, sd;
  };
  const std::vector<Alt> alts = {{"shift_0.5", 0.5, 1.0}, {"scale_2", 0.0, 2.0}, {"scale_0.5", 0.0, 0.5}};
  constexpr std::size_t nobs = 20000, draws = 200;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t ai = 0;
  for (const Alt& alt : alts) {
    Rng rng = stream(c, 2, 3, ai++);
    Vector diff(nobs);
    Matrix p(draws, 1), q(draws, 1);
    for (std::size_t i = 0; i < nobs; ++i) {
      const double y = rng.normal();
      for (double& v : p.values()) v = rng.normal();
      for (double& v : q.values()) v = alt.mu + alt.sd * rng.normal();
      diff[i] = energy_score_mc(p, std::span<const double>(&y, 1)) - energy_score_mc(q, std::span<const double>(&y, 1));
    }
    const double margin = mean(diff) / (stddev(diff) / std::sqrt(static_cast<double>(nobs)));
    worst_margin = std::min(worst_margin, margin);
    pass = pass && margin > 3.0;
    report["propriety"].push_back({{"alternative", alt.name}, {"mean_gap", mean(diff)}, {"margin_sigma", margin}});
  }
  report["pass"] = pass;
  return {pass, "max deviation " + fmt(worst_se, 3) + " SE, kernel bit-exact " + (bit_exact ? "yes" : "no") +
                    ", min propriety margin " + fmt(worst_margin, 3) + " sigma",
          report};
}

// ---------------------------------------------------------------------------

// Uniform[-a, a] noise: E[(eta - a + delta)_+^ell] in closed form.
double uniform_tail_moment(double a, double delta, double ell) {
  const double top = std::pow(delta, ell + 1.0);
  const double bottom = delta <= 2.0 * a ? 0.0 : std::pow(delta - 2.0 * a, ell + 1.0);
  return (top - bottom) / ((ell + 1.0) * 2.0 * a);
}

Outcome criterion3(const Context& c) {
  Json report = header(c, 3);
  const double lip = 1.5, a = 2.0;
  const NoiseDist noise = NoiseDist::uniform(a);
  Vector grid;
  for (std::size_t i = 0; i < 50; ++i) grid.push_back(1e-2 * std::pow(1e3, static_cast<double>(i) / 49.0));

  double worst = 0.0;
  bool positive = true, infinite_zero = true, bounded = true;
  double median_max = 0.0, mean_max = 0.0;
  auto agree = [&worst](double got, double want) {
    worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
  };
  for (double d : grid) {
    const GainResult med = median_uncertainty_gain(lip, a, d);
    agree(med.uncertainty_engression, lip * std::max(d - a, 0.0));
    agree(med.gain, lip * std::min(d, a));
    const GainResult mn = mean_uncertainty_gain(lip, noise, d);
    const double u1 = lip * uniform_tail_moment(a, d, 1.0);
    agree(mn.uncertainty_engression, u1);
    agree(mn.gain, lip * d - u1);
    std::vector<double> gains{med.gain, mn.gain};
    for (double ell : {1.0, 2.0, 3.0}) {
      const GainResult g = dist_uncertainty_gain(lip, noise, d, ell);
      const double u = lip * std::pow(uniform_tail_moment(a, d, ell), 1.0 / ell);
      agree(g.uncertainty_engression, u);
      agree(g.gain, lip * d - u);
      gains.push_back(g.gain);
    }
    for (double g : gains) {
      positive = positive && g > 0.0;
      bounded = bounded && g <= lip * a * (1.0 + 1e-12);
    }
    infinite_zero = infinite_zero && dist_uncertainty_gain(lip, noise, d, kInfiniteOrder).gain == 0.0;
    median_max = std::max(median_max, med.gain);
    mean_max = std::max(mean_max, mn.gain);
  }
  const bool max_exact = median_max == lip * a && std::abs(mean_max - lip * a) <= 1e-8;
  const bool pass = worst <= 1e-8 && positive && bounded && max_exact && infinite_zero;
  report["max_rel_deviation"] = worst;
  report["gains_positive"] = positive;
  report["gains_at_most_l_eta"] = bounded;
  report["median_max_gain"] = median_max;
  report["mean_max_gain"] = mean_max;
  report["infinite_order_gain_zero"] = infinite_zero;
  report["pass"] = pass;
  return {pass, "max deviation " + fmt(worst, 3) + ", positive " + (positive ? "yes" : "no") + ", max gain " +
                    fmt(median_max, 17) + " (L*eta " + fmt(lip * a, 17) + "), order-inf zero " +
                    (infinite_zero ? "yes" : "no"),
          report};
}

// ---------------------------------------------------------------------------

Outcome criterion4(const Context& c) {
  Json report = header(c, 4);
  bool pass = true;
  std::string summary;
  std::size_t si = 0;
  for (const SimSetting& setting : {SimSetting::softplus(), SimSetting::cubic()}) {
    const double x_max = setting.x_max();
    const double band_hi = x_max + 0.9 * setting.eta_max();
    Matrix band(100, 1);
    for (std::size_t i = 0; i < 100; ++i) band(i, 0) = x_max + (band_hi - x_max) * (static_cast<double>(i) + 0.5) / 100.0;
    const Vector truth = Truth(setting).median(band.values());
    const std::size_t seeds = c.seeds(10);
    std::vector<bool> small, wins;
    for (std::size_t seed = 0; seed < seeds; ++seed) {
      Rng rng = stream(c, 4, si, seed);
      const SimData d = generate(setting, 10000, rng);
      const double ysd = stddev(d.y.col(0));
      const EngressionModel eng = EngressionModel::fit(d.x, d.y, desk_train(), NetConfig{}, rng);
      const Matrix eng_pred = eng.predict_median(band, rng);
      const BaselineModel nn = fit_nn_regression(d.x, d.y, LossSpec::l1(), NetConfig{}, desk_train(), rng);
      const Matrix nn_pred = nn.predict(band);
      const double eng_err = *region_losses_band(eng_pred.values(), truth, band, x_max, band_hi).l1.band.value / ysd;
      const double nn_err = *region_losses_band(nn_pred.values(), truth, band, x_max, band_hi).l1.band.value / ysd;
      small.push_back(eng_err < 0.15);
      wins.push_back(eng_err < nn_err);
      Json& u = add_unit(report, setting.name() + "/seed=" + std::to_string(seed));
      u["engression_band_l1"] = eng_err;
      u["nn_l1_band_l1"] = nn_err;
    }
    const bool ok = count_if_true(small) >= 8 && count_if_true(wins) >= 8;
    pass = pass && ok;
    report["settings"].push_back({{"setting", setting.name()}, {"band_hi", band_hi}, {"seeds_below_0.15", count_if_true(small)},
                                  {"seeds_beating_nn_l1", count_if_true(wins)}, {"pass", ok}});
    summary += (si ? "; " : "") + setting.name() + ": <0.15 in " + std::to_string(count_if_true(small)) + "/" +
               std::to_string(seeds) + ", beats NN-L1 in " + std::to_string(count_if_true(wins)) + "/" +
               std::to_string(seeds);
    ++si;
  }
  report["pass"] = pass;
  return {pass, summary, report};
}

// ---------------------------------------------------------------------------

Outcome criterion5(const Context& c) {
  Json report = header(c, 5);
  const Vector sds{0.5, 1.0, 2.0};
  // x = 0, 0.05, ..., 8; entries past `beyond` lie outside the support [0, 2].
  Matrix grid(161, 1);
  for (std::size_t i = 0; i < grid.rows(); ++i) grid(i, 0) = 0.05 * static_cast<double>(i);
  const std::size_t beyond = 41;
  const std::size_t seeds = c.seeds(10);
  std::vector<Vector> firsts(sds.size()), firsts_all(sds.size());
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    Rng data_rng = stream(c, 5, seed);
    const std::vector<SimData> sweep = noise_level_sweep(SimSetting::square(), sds, 10000, data_rng);
    for (std::size_t k = 0; k < sds.size(); ++k) {
      Rng rng = stream(c, 5, seed, k + 1);
      TrainConfig train = desk_train();
      train.lr_end = 1e-4;
      const EngressionModel eng = EngressionModel::fit(sweep[k].x, sweep[k].y, train, NetConfig{}, rng);
      const Matrix pred = eng.predict_median(grid, rng, 8000);
      const Vector truth = Truth(sweep[k].setting).median(grid.values());
      Vector err(grid.rows());
      for (std::size_t i = 0; i < err.size(); ++i) err[i] = std::abs(pred(i, 0) - truth[i]);
      const double first = first_exceedance(grid.values().subspan(beyond), std::span<const double>(err).subspan(beyond), 0.3);
      const double first_all = first_exceedance(grid.values(), err, 0.3);
      firsts[k].push_back(first);
      firsts_all[k].push_back(first_all);
      Json& u = add_unit(report, "sd=" + fmt(sds[k]) + "/seed=" + std::to_string(seed));
      u["first_exceedance"] = first;
      u["first_exceedance_from_support_start"] = first_all;
      u["max_error_in_support"] = *std::max_element(err.begin(), err.begin() + beyond);
    }
  }
  Vector medians;
  for (const Vector& f : firsts) medians.push_back(median(f));
  bool pass = true;
  for (std::size_t k = 1; k < medians.size(); ++k) pass = pass && medians[k] >= medians[k - 1];
  for (std::size_t k = 0; k < sds.size(); ++k)
    report["medians"].push_back({{"sd", sds[k]}, {"first_exceedance", medians[k]},
                                 {"first_exceedance_from_support_start", median(firsts_all[k])}});
  report["pass"] = pass;
  return {pass, "median first x > x_max with error > 0.3: " + fmt(medians[0]) + " (sd 0.5), " + fmt(medians[1]) +
                    " (sd 1), " + fmt(medians[2]) + " (sd 2)",
          report};
}

// ---------------------------------------------------------------------------

struct QuadraticRun {
  Vector ns;
  Vector err, b2, b1_gap;  // medians per n
};

QuadraticRun quadratic_runs(const Context& c, std::uint64_t key, const SimSetting& s, Json& report) {
  QuadraticRun out;
  for (std::size_t n : {500, 1000, 2000, 4000, 8000}) {
    Vector err, b2, b1;
    for (std::size_t seed = 0; seed < 20; ++seed) {
      Rng rng = stream(c, key, seed, n);
      const SimData d = generate(s, n, rng);
      const QuadraticPreAnmFit f = fit_quadratic_cramer(d.x, d.y);
      double e = 0.0;
      for (std::size_t k = 0; k < 3; ++k) e += (f.beta[k] - s.beta[k]) * (f.beta[k] - s.beta[k]);
      err.push_back(std::sqrt(e));
      b2.push_back(std::abs(f.beta[2]));
      b1.push_back(std::abs(f.beta[1] - (s.beta[1] + s.beta[2] * (s.x1 + s.x2))));
    }
    out.ns.push_back(static_cast<double>(n));
    out.err.push_back(median(err));
    out.b2.push_back(median(b2));
    out.b1_gap.push_back(median(b1));
    report["grid"].push_back({{"n", n}, {"median_beta_error", out.err.back()}, {"median_abs_beta2", out.b2.back()},
                              {"median_beta1_gap", out.b1_gap.back()}});
  }
  return out;
}

Outcome criterion6(const Context& c) {
  Json report = header(c, 6);
  const QuadraticRun r = quadratic_runs(c, 6, SimSetting::quadratic_two_point(), report);
  const double slope = rate_slope(r.ns, r.err);
  const bool monotone = strictly_decreasing(r.err);
  const bool pass = monotone && slope <= -0.15;
  report["rate_slope"] = slope;
  report["monotone"] = monotone;
  report["pass"] = pass;
  return {pass, "median |b-b*| " + fmt(r.err.front()) + " -> " + fmt(r.err.back()) + ", monotone " +
                    (monotone ? "yes" : "no") + ", slope " + fmt(slope, 3),
          report};
}

Outcome criterion7(const Context& c) {
  Json report = header(c, 7);
  const QuadraticRun r = quadratic_runs(c, 7, SimSetting::quadratic_post_anm(), report);
  const bool halved = r.b2.back() < 0.5 * r.b2.front();
  const bool monotone = strictly_decreasing(r.b1_gap);
  const bool pass = halved && monotone;
  report["beta2_halved"] = halved;
  report["beta1_gap_monotone"] = monotone;
  report["pass"] = pass;
  return {pass, "median |b2| " + fmt(r.b2.front()) + " -> " + fmt(r.b2.back()) + ", slope gap " + fmt(r.b1_gap.front()) +
                    " -> " + fmt(r.b1_gap.back()) + " monotone " + (monotone ? "yes" : "no"),
          report};
}

// ---------------------------------------------------------------------------

Outcome criterion8(const Context& c) {
  Json report = header(c, 8);
  const SimSetting s = SimSetting::quadratic_two_point();
  Rng data_rng = stream(c, 8);
  const SimData d = generate(s, 1000, data_rng);
  const double x_eval = s.x2 + 2.0;
  bool pass = true;
  std::string summary = "x=" + fmt(x_eval);
  std::size_t li = 0;
  for (const auto& [name, loss] : {std::pair{std::string("l2"), LossSpec::l2()}, std::pair{std::string("pinball_0.5"), LossSpec::pinball(0.5)}}) {
    Rng rng = stream(c, 8, ++li);
    const RegressionSpread sp = quadratic_regression_spread(d.x, d.y, loss, x_eval, 20, {}, rng);
    const bool ok = sp.out_support_range > 10.0 * sp.in_support_range;
    pass = pass && ok;
    report["losses"].push_back({{"loss", name}, {"in_support_range", sp.in_support_range},
                                {"out_support_range", sp.out_support_range}, {"pass", ok}});
    summary += "; " + name + " out/in range " + fmt(sp.out_support_range) + "/" + fmt(sp.in_support_range);
  }
  report["pass"] = pass;
  return {pass, summary, report};
}

// ---------------------------------------------------------------------------

Outcome criterion9(const Context& c) {
  Json report = header(c, 9);
  const SimSetting setting = SimSetting::log();
  const Truth truth(setting);
  const double x_max = setting.x_max();
  const double out_hi = x_max + 2.0 * setting.eta_max();
  const double alphas[2] = {0.025, 0.975};
  const std::size_t seeds = c.seeds(10);
  Vector eng_in, eng_out, lqr_in, lqr_out;
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    Rng rng = stream(c, 9, seed);
    const SimData d = generate(setting, 10000, rng);
    Matrix x_in(2000, 1), x_out(2000, 1);
    Vector y_in(2000), y_out(2000);
    for (std::size_t i = 0; i < 2000; ++i) {
      x_in(i, 0) = rng.uniform(setting.x_lo, x_max);
      y_in[i] = truth.draw(x_in(i, 0), rng);
      x_out(i, 0) = out_hi - (out_hi - x_max) * rng.uniform();  // (x_max, out_hi]
      y_out[i] = truth.draw(x_out(i, 0), rng);
    }
    const EngressionModel eng = EngressionModel::fit(d.x, d.y, desk_train(), NetConfig{}, rng);
    eng_in.push_back(coverage(eng.prediction_interval(x_in, rng, 0.95), y_in));
    eng_out.push_back(coverage(eng.prediction_interval(x_out, rng, 0.95), y_out));
    TrainConfig t;
    t.steps = 3000;
    const BaselineModel lqr = fit_linear_quantile(d.x, d.y, alphas, t);
    lqr_in.push_back(coverage(lqr.predict(x_in), y_in));
    lqr_out.push_back(coverage(lqr.predict(x_out), y_out));
    Json& u = add_unit(report, "seed=" + std::to_string(seed));
    u["engression_in"] = eng_in.back();
    u["engression_out"] = eng_out.back();
    u["lin_qr_in"] = lqr_in.back();
    u["lin_qr_out"] = lqr_out.back();
  }
  const double ei = median(eng_in), eo = median(eng_out), li = median(lqr_in), lo = median(lqr_out);
  const bool in_ok = std::abs(ei - 0.95) <= 0.03;
  const bool out_ok = eo >= 0.85;
  const bool lqr_ok = lo <= 0.6;
  const bool pass = in_ok && out_ok && lqr_ok;
  report["out_region"] = {x_max, out_hi};
  report["medians"] = {{"engression_in", ei}, {"engression_out", eo}, {"lin_qr_in", li}, {"lin_qr_out", lo}};
  report["engression_in_ok"] = in_ok;
  report["engression_out_ok"] = out_ok;
  report["lin_qr_out_ok"] = lqr_ok;
  report["pass"] = pass;
  return {pass, "engression (in, out) = (" + fmt(ei, 3) + ", " + fmt(eo, 3) + "), lin-QR (in, out) = (" + fmt(li, 3) +
                    ", " + fmt(lo, 3) + ")" + (lqr_ok ? "" : "; lin-QR out coverage above 0.6"),
          report};
}

// ---------------------------------------------------------------------------

Outcome criterion10(const Context& c) {
  Json report = header(c, 10);
  Rng rng = stream(c, 10);
  constexpr std::size_t n = 1000, p = 5;
  const Vector beta = sample_normal(rng, p);
  auto draw = [&](double shift, Matrix& x, Matrix& y) {
    x = Matrix(n, p);
    y = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        x(i, j) = shift + rng.normal();
        s += x(i, j) * beta[j];
      }
      y(i, 0) = s + rng.normal();
    }
  };
  Matrix x, y, x_test, y_test;
  draw(0.0, x, y);
  draw(1.0, x_test, y_test);
  const EngressionModel model = EngressionModel::fit(x, y, TrainConfig{}, NetConfig{}, rng);
  const Matrix pred = model.predict_mean(x_test, rng);
  double mse = 0.0;
  for (std::size_t i = 0; i < n; ++i) mse += (pred(i, 0) - y_test(i, 0)) * (pred(i, 0) - y_test(i, 0));
  mse /= static_cast<double>(n);
  const bool pass = mse >= 0.9 && mse <= 1.2;
  report["test_mse"] = mse;
  report["pass"] = pass;
  return {pass, "test MSE " + fmt(mse, 6) + " (target [0.9, 1.2])", report};
}

// ---------------------------------------------------------------------------

struct Entry {
  std::function<Outcome(const Context&)> run;
  double limit_seconds;
  bool seeded_units;  // long run made of independent per-seed units
};

const std::map<int, Entry>& registry() {
  static const std::map<int, Entry> r = {
      {1, {criterion1, 60, false}},   {2, {criterion2, 60, false}},   {3, {criterion3, 10, false}},
      {4, {criterion4, 1800, true}},  {5, {criterion5, 1800, true}},  {6, {criterion6, 1200, false}},
      {7, {criterion7, 1200, false}}, {8, {criterion8, 300, false}},  {9, {criterion9, 1200, true}},
      {10, {criterion10, 120, false}}};
  return r;
}

std::filesystem::path report_path(const std::filesystem::path& dir, int id) {
  char name[32];
  std::snprintf(name, sizeof name, "criterion_%02d.json", id);
  return dir / name;
}

std::string render(const Json& j) { return j.dump(2) + "\n"; }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Reruns criteria 1-10 and compares against the stored reports. Long runs are
// compared on their first seed unit unless `full` is set.
Outcome criterion11(const Context& c, const std::filesystem::path& dir, bool full) {
  Json report = header(c, 11);
  bool pass = true;
  std::vector<int> mismatched;
  for (const auto& [id, entry] : registry()) {
    Context rerun = c;
    const bool partial = entry.seeded_units && !full;
    if (partial) rerun.seed_limit = 1;
    const Json fresh = entry.run(rerun).report;

    std::string stored_text;
    const auto path = report_path(dir, id);
    if (std::filesystem::exists(path)) stored_text = read_file(path);
    Json stored = stored_text.empty() ? Json() : Json::parse(stored_text, nullptr, false);
    if (stored.is_discarded() || stored.is_null() || stored.value("seed", std::uint64_t{0}) != c.seed) {
      stored = entry.run(rerun).report;
      stored_text = render(stored);
    }

    bool same = true;
    std::size_t compared = 0;
    if (partial) {
      std::map<std::string, std::string> by_id;
      for (const Json& u : stored["units"]) by_id[u["id"].get<std::string>()] = u.dump();
      for (const Json& u : fresh["units"]) {
        const auto it = by_id.find(u["id"].get<std::string>());
        same = same && it != by_id.end() && it->second == u.dump();
        ++compared;
      }
    } else {
      same = render(fresh) == stored_text;
      compared = 1;
    }
    if (!same) mismatched.push_back(id);
    pass = pass && same;
    report["checks"].push_back({{"criterion", id}, {"scope", partial ? "first seed units" : "full report"},
                                {"compared", compared}, {"identical", same}});
  }
  report["pass"] = pass;
  std::string summary = pass ? "reruns of criteria 1-10 byte-identical" : "mismatch in criteria";
  for (int id : mismatched) summary += " " + std::to_string(id);
  return {pass, summary + (full ? "" : " (long runs checked on their first seed units)"), report};
}

void write_report(const std::filesystem::path& dir, int id, const Json& report) {
  std::filesystem::create_directories(dir);
  std::ofstream out(report_path(dir, id), std::ios::binary);
  out << render(report);
  if (!out) throw std::runtime_error("cannot write report for criterion " + std::to_string(id));
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Acceptance criteria runner"};
  std::vector<int> ids;
  Context ctx;
  std::string dir = "acceptance_reports";
  bool full = false;
  app.add_option("criteria", ids, "Criteria to run (default: all)")->check(CLI::Range(1, 11));
  app.add_option("--seed", ctx.seed, "Master seed");
  app.add_option("--report-dir", dir, "Directory for criterion_NN.json reports");
  app.add_option("--seeds", ctx.seed_limit, "Cap on seeds per long criterion (0: as specified)");
  app.add_flag("--full-determinism", full, "Criterion 11 reruns long criteria completely");
  CLI11_PARSE(app, argc, argv);
  if (ids.empty())
    for (int i = 1; i <= 11; ++i) ids.push_back(i);

  bool all_pass = true;
  for (int id : ids) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    double limit = 0.0;
    try {
      if (id == 11) {
        out = criterion11(ctx, dir, full);
      } else {
        const Entry& e = registry().at(id);
        limit = e.limit_seconds;
        out = e.run(ctx);
        write_report(dir, id, out.report);
      }
    } catch (const std::exception& ex) {
      out = {false, std::string("error: ") + ex.what(), {}};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = out.pass;
    std::string summary = out.summary;
    if (limit > 0.0 && secs >= limit) {
      pass = false;
      summary += "; runtime over " + fmt(limit) + " s";
    }
    all_pass = all_pass && pass;
    std::printf("criterion %d: %s %s (%.1f s)\n", id, pass ? "PASS" : "FAIL", summary.c_str(), secs);
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
