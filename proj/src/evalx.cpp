#include "engression/evalx.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "engression/errors.hpp"

namespace engression {

namespace {

struct Acc {
  double sum = 0.0;
  std::size_t count = 0;
  RegionValue finish() const {
    RegionValue v;
    v.count = count;
    if (count > 0) v.value = sum / static_cast<double>(count);
    return v;
  }
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t method_key(const std::string& m) { return fnv1a(m); }

const std::vector<std::string> kMethods{"engression", "nn_l1", "nn_l2", "lin_ols", "lin_qr"};

}  // namespace

RegionReport region_losses_band(std::span<const double> pred, std::span<const double> truth, const Matrix& x,
                                double x_max, double band_hi, std::size_t dim) {
  if (pred.size() != truth.size() || pred.size() != x.rows()) throw ShapeError("region_losses: length mismatch");
  if (dim >= x.cols()) throw ShapeError("region_losses: split dimension out of range");
  Acc in1, in2, band1, band2, out1, out2;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    const double a = std::abs(d);
    const double s = d * d;
    const double xv = x(i, dim);
    if (xv <= x_max) {
      in1.sum += a, in2.sum += s, ++in1.count, ++in2.count;
    } else {
      out1.sum += a, out2.sum += s, ++out1.count, ++out2.count;
      if (xv <= band_hi) band1.sum += a, band2.sum += s, ++band1.count, ++band2.count;
    }
  }
  return {{in1.finish(), band1.finish(), out1.finish()}, {in2.finish(), band2.finish(), out2.finish()}};
}

RegionReport region_losses(std::span<const double> pred, std::span<const double> truth, const Matrix& x, double x_max,
                           double eta_max, std::size_t dim) {
  return region_losses_band(pred, truth, x, x_max, x_max + eta_max, dim);
}

double coverage(const Matrix& intervals, std::span<const double> y) {
  if (intervals.cols() != 2 || intervals.rows() != y.size()) throw ShapeError("coverage: need rows x 2 intervals");
  if (y.empty()) throw DomainError("coverage: no observations");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (intervals(i, 0) <= y[i] && y[i] <= intervals(i, 1)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

double mean_crps(const Matrix& draws, std::size_t m, std::span<const double> y) {
  if (draws.cols() != 1 || m == 0 || draws.rows() != m * y.size()) throw ShapeError("mean_crps: draws must be (rows*m) x 1");
  if (y.empty()) throw DomainError("mean_crps: no observations");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total += crps_sample(draws.values().subspan(i * m, m), y[i]);
  return total / static_cast<double>(y.size());
}

double rate_slope(std::span<const double> ns, std::span<const double> errors) {
  if (ns.size() != errors.size()) throw ShapeError("rate_slope: length mismatch");
  if (ns.size() < 4) throw DomainError("rate_slope: need at least 4 sample sizes");
  Vector lx, ly;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(ns[i] > 0.0) || !(errors[i] > 0.0)) throw DomainError("rate_slope: sizes and errors must be positive");
    lx.push_back(std::log(ns[i]));
    ly.push_back(std::log(errors[i]));
  }
  const double mx = mean(lx);
  const double my = mean(ly);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(sxx > 0.0)) throw DomainError("rate_slope: sample sizes must not all be equal");
  return sxy / sxx;
}

double first_exceedance(std::span<const double> grid, std::span<const double> errors, double threshold) {
  if (grid.size() != errors.size() || grid.empty()) throw ShapeError("first_exceedance: length mismatch");
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (errors[i] > threshold) return grid[i];
  return grid.back();
}

nlohmann::json to_json(const HyperParams& h) {
  return {{"layers", h.layers}, {"hidden", h.hidden}, {"lr", h.lr}, {"steps", h.steps}};
}

HyperParams hyper_params_from_json(const nlohmann::json& j) {
  HyperParams h;
  for (const auto& [key, value] : j.items()) {
    if (key == "layers") h.layers = value.get<std::size_t>();
    else if (key == "hidden") h.hidden = value.get<std::size_t>();
    else if (key == "lr") h.lr = value.get<double>();
    else if (key == "steps") h.steps = value.get<std::size_t>();
    else throw FormatError("hyper-parameter grid: unknown key '" + key + "'");
  }
  return h;
}

std::vector<HyperParams> default_hyper_grid() {
  std::vector<HyperParams> grid;
  for (auto [layers, hidden] : {std::pair<std::size_t, std::size_t>{2, 100}, {3, 10}, {3, 100}})
    for (double lr : {1e-3, 1e-2})
      for (std::size_t steps : {500, 1000, 3000}) grid.push_back({layers, hidden, lr, steps});
  return grid;
}

void BenchmarkConfig::validate() const {
  setting.validate();
  if (methods.empty()) throw DomainError("benchmark: no methods");
  for (const auto& m : methods)
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end())
      throw DomainError("benchmark: unknown method '" + m + "'");
  if (grid.empty()) throw DomainError("benchmark: empty hyper-parameter grid");
  if (reps == 0 || n_train < 2 || n_test == 0) throw DomainError("benchmark: reps, n_train and n_test must be positive");
  if (cv && folds < 2) throw DomainError("benchmark: cross-validation needs at least 2 folds");
  if (nsample < 2) throw DomainError("benchmark: nsample must be at least 2");
}

std::size_t threads_from_env() {
  if (const char* v = std::getenv("ENGRESS_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end != v && n > 0) return static_cast<std::size_t>(n);
  }
  return 1;
}

// ---------------------------------------------------------------------------

namespace {

struct RepData {
  SimData train;
  Matrix x_test;
  Vector y_test;
  Vector true_median;
  Vector true_mean;
};

struct Predictions {
  Vector median;
  Vector mean;
  std::optional<Matrix> interval;
  std::optional<Matrix> draws;  // (rows * nsample) x 1
};

NetConfig net_for(const HyperParams& h, std::size_t noise_dim) {
  NetConfig net;
  net.num_layers = h.layers;
  net.hidden_dim = h.hidden;
  net.noise_dim = noise_dim;
  return net;
}

TrainConfig train_for(const HyperParams& h, const LossSpec& loss, std::uint64_t seed) {
  TrainConfig t;
  t.steps = h.steps;
  t.lr = h.lr;
  t.loss = loss;
  t.seed = seed;
  t.m_per_obs = loss.distributional() ? 2 : 1;
  return t;
}

Predictions summarize_draws(const Matrix& draws, std::size_t rows, std::size_t m, double level) {
  Predictions p;
  p.median.resize(rows);
  p.mean.resize(rows);
  p.interval = Matrix(rows, 2);
  Vector buf(m);
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(draws.values().begin() + static_cast<std::ptrdiff_t>(i * m), m, buf.begin());
    p.mean[i] = mean(buf);
    std::sort(buf.begin(), buf.end());
    p.median[i] = quantile_sorted(buf, 0.5);
    (*p.interval)(i, 0) = quantile_sorted(buf, (1.0 - level) / 2.0);
    (*p.interval)(i, 1) = quantile_sorted(buf, (1.0 + level) / 2.0);
  }
  p.draws = draws;
  return p;
}

Predictions fit_and_predict(const std::string& method, const HyperParams& h, const BenchmarkConfig& cfg,
                            const Matrix& x, const Matrix& y, const Matrix& x_eval, Rng& rng) {
  const std::uint64_t seed = rng.seed();
  if (method == "engression") {
    const EngressionModel model = EngressionModel::fit(x, y, train_for(h, LossSpec::energy(), seed),
                                                       net_for(h, cfg.noise_dim), rng);
    return summarize_draws(model.sample_batch(x_eval, cfg.nsample, rng), x_eval.rows(), cfg.nsample,
                           cfg.interval_level);
  }
  if (method == "nn_l1" || method == "nn_l2") {
    const LossSpec loss = method == "nn_l1" ? LossSpec::l1() : LossSpec::l2();
    const BaselineModel b = fit_nn_regression(x, y, loss, net_for(h, 0), train_for(h, loss, seed), rng);
    const Vector pred = b.predict(x_eval).col(0);
    return {pred, pred, std::nullopt, std::nullopt};
  }
  if (method == "lin_ols") {
    const Vector pred = fit_linear_ols(x, y).predict(x_eval).col(0);
    return {pred, pred, std::nullopt, std::nullopt};
  }
  const double alphas[3] = {(1.0 - cfg.interval_level) / 2.0, 0.5, (1.0 + cfg.interval_level) / 2.0};
  TrainConfig t = train_for(h, LossSpec::pinball(0.5), seed);
  const Matrix q = fit_linear_quantile(x, y, alphas, t).predict(x_eval);
  Predictions p;
  p.median = q.col(1);
  p.mean = p.median;
  Matrix iv(x_eval.rows(), 2);
  for (std::size_t i = 0; i < x_eval.rows(); ++i) {
    iv(i, 0) = q(i, 0);
    iv(i, 1) = q(i, 2);
  }
  p.interval = std::move(iv);
  return p;
}

// Held-out score used to pick hyper-parameters; lower is better.
double validation_score(const std::string& method, const Predictions& p, const Vector& y_val) {
  double total = 0.0;
  if (method == "engression") {
    const std::size_t m = p.draws->rows() / y_val.size();
    for (std::size_t i = 0; i < y_val.size(); ++i) {
      const Matrix d(m, 1, Vector(p.draws->values().begin() + static_cast<std::ptrdiff_t>(i * m),
                                  p.draws->values().begin() + static_cast<std::ptrdiff_t>((i + 1) * m)));
      const double z[1] = {y_val[i]};
      total -= energy_score_mc(d, z);
    }
  } else if (method == "nn_l2" || method == "lin_ols") {
    for (std::size_t i = 0; i < y_val.size(); ++i) total += (p.mean[i] - y_val[i]) * (p.mean[i] - y_val[i]);
  } else {
    for (std::size_t i = 0; i < y_val.size(); ++i) total += std::abs(p.median[i] - y_val[i]);
  }
  return total / static_cast<double>(y_val.size());
}

std::size_t select_by_cv(const std::string& method, const BenchmarkConfig& cfg, const SimData& train, Rng rng) {
  if (cfg.grid.size() == 1 || method == "lin_ols") return 0;
  const std::size_t n = train.x.rows();
  const auto order = permutation(rng, n);
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < cfg.grid.size(); ++h) {
    double score = 0.0;
    for (std::size_t f = 0; f < cfg.folds; ++f) {
      std::vector<std::size_t> tr, va;
      for (std::size_t i = 0; i < n; ++i) (i % cfg.folds == f ? va : tr).push_back(order[i]);
      if (tr.size() < 2 || va.empty()) continue;
      Rng fold_rng = rng.derive(h * 1000 + f);
      const Matrix xv = take_rows(train.x, va);
      const Predictions p = fit_and_predict(method, cfg.grid[h], cfg, take_rows(train.x, tr), take_rows(train.y, tr),
                                            xv, fold_rng);
      score += validation_score(method, p, take_rows(train.y, va).col(0));
    }
    if (score < best_score) {
      best_score = score;
      best = h;
    }
  }
  return best;
}

struct Task {
  std::string method;
  std::size_t rep;
  std::size_t hyper;
};

BenchmarkCell make_cell(const Task& task, const std::string& region) {
  BenchmarkCell c;
  c.method = task.method;
  c.rep = task.rep;
  c.hyper_index = task.hyper;
  c.region = region;
  return c;
}

std::vector<BenchmarkCell> evaluate(const Task& task, const BenchmarkConfig& cfg, const RepData& data,
                                    const Predictions& p) {
  const double x_max = cfg.setting.x_max();
  const double band_hi = x_max + cfg.setting.eta_max();
  const RegionReport rr = region_losses_band(p.median, data.true_median, data.x_test, x_max, band_hi);
  const RegionReport rm = region_losses_band(p.mean, data.true_mean, data.x_test, x_max, band_hi);
  std::vector<BenchmarkCell> cells;
  const char* names[3] = {"in", "band", "out"};
  for (int r = 0; r < 3; ++r) {
    BenchmarkCell c = make_cell(task, names[r]);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.x_test.rows(); ++i) {
      const double xv = data.x_test(i, 0);
      const bool in = r == 0 ? xv <= x_max : (r == 1 ? (xv > x_max && xv <= band_hi) : xv > x_max);
      if (in) idx.push_back(i);
    }
    c.points = idx.size();
    const RegionValue l1 = r == 0 ? rr.l1.in_support : (r == 1 ? rr.l1.band : rr.l1.out_support);
    const RegionValue l2 = r == 0 ? rm.l2.in_support : (r == 1 ? rm.l2.band : rm.l2.out_support);
    c.l1 = l1.value;
    c.l2 = l2.value;
    if (!idx.empty()) {
      Vector ys;
      for (std::size_t i : idx) ys.push_back(data.y_test[i]);
      if (p.interval) c.coverage = coverage(take_rows(*p.interval, idx), ys);
      if (p.draws) {
        const std::size_t m = p.draws->rows() / data.x_test.rows();
        double total = 0.0;
        for (std::size_t i : idx) total += crps_sample(p.draws->values().subspan(i * m, m), data.y_test[i]);
        c.crps = total / static_cast<double>(idx.size());
      }
    }
    cells.push_back(std::move(c));
  }
  return cells;
}

double quantile_of(Vector v, double a) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, a);
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string opt_csv(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << *v;
  return os.str();
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  const Rng master(cfg.seed);
  const double test_hi = cfg.test_x_hi > 0.0 ? cfg.test_x_hi : cfg.setting.x_max() + 2.0 * cfg.setting.eta_max();
  const double test_lo = cfg.setting.two_point() ? cfg.setting.x1 : cfg.setting.x_lo;
  const Truth truth(cfg.setting);

  std::vector<RepData> reps;
  for (std::size_t r = 0; r < cfg.reps; ++r) {
    Rng data_rng = master.derive(0x1000 + r);
    RepData d{generate(cfg.setting, cfg.n_train, data_rng), Matrix(cfg.n_test, 1), {}, {}, {}};
    for (std::size_t i = 0; i < cfg.n_test; ++i) {
      const double xv = data_rng.uniform(test_lo, test_hi);
      d.x_test(i, 0) = xv;
      d.y_test.push_back(truth.draw(xv, data_rng));
    }
    d.true_median = truth.median(d.x_test.col(0));
    d.true_mean = truth.mean(d.x_test.col(0));
    reps.push_back(std::move(d));
  }

  std::vector<Task> tasks;
  for (std::size_t r = 0; r < cfg.reps; ++r)
    for (const auto& m : cfg.methods) {
      if (cfg.cv || m == "lin_ols") {
        tasks.push_back({m, r, 0});
      } else {
        for (std::size_t h = 0; h < cfg.grid.size(); ++h) tasks.push_back({m, r, h});
      }
    }

  std::vector<std::vector<BenchmarkCell>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      Task task = tasks[t];
      try {
        const std::uint64_t key = method_key(task.method) ^ (task.rep * 0x9e3779b97f4a7c15ULL);
        if (cfg.cv) task.hyper = select_by_cv(task.method, cfg, reps[task.rep].train, master.derive(key ^ 0xc5));
        Rng rng = master.derive(key + task.hyper + 1);
        const RepData& d = reps[task.rep];
        const Predictions p =
            fit_and_predict(task.method, cfg.grid[task.hyper], cfg, d.train.x, d.train.y, d.x_test, rng);
        results[t] = evaluate(task, cfg, d, p);
      } catch (const NumericError& e) {
        for (const char* region : {"in", "band", "out"}) {
          BenchmarkCell c = make_cell(task, region);
          c.error = e.what();
          results[t].push_back(std::move(c));
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t nthreads = std::max<std::size_t>(1, std::min(cfg.threads ? cfg.threads : threads_from_env(), tasks.size()));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  BenchmarkReport report;
  report.setting = cfg.setting.name();
  report.grid = cfg.grid;
  for (auto& r : results)
    for (auto& c : r) report.cells.push_back(std::move(c));

  nlohmann::json fp = {{"setting", cfg.setting.name()}, {"methods", cfg.methods}, {"reps", cfg.reps},
                       {"n_train", cfg.n_train},        {"n_test", cfg.n_test},   {"test_x_hi", test_hi},
                       {"noise_dim", cfg.noise_dim},    {"nsample", cfg.nsample}, {"cv", cfg.cv},
                       {"folds", cfg.folds},            {"seed", cfg.seed}};
  for (const auto& h : cfg.grid) fp["grid"].push_back(to_json(h));
  std::ostringstream hex;
  hex << std::hex << fnv1a(fp.dump());
  report.fingerprint = hex.str();

  for (const auto& m : cfg.methods)
    for (const char* region : {"in", "band", "out"})
      for (const char* metric : {"l1", "l2", "crps", "coverage"}) {
        Vector vals;
        for (const auto& c : report.cells) {
          if (c.method != m || c.region != region) continue;
          const auto& v = std::string(metric) == "l1"     ? c.l1
                          : std::string(metric) == "l2"   ? c.l2
                          : std::string(metric) == "crps" ? c.crps
                                                          : c.coverage;
          if (v) vals.push_back(*v);
        }
        if (vals.empty()) continue;
        report.summary.push_back({m, region, metric, quantile_of(vals, 0.5),
                                  quantile_of(vals, 0.75) - quantile_of(vals, 0.25), vals.size()});
      }
  return report;
}

nlohmann::json BenchmarkReport::to_json() const {
  nlohmann::json j;
  j["setting"] = setting;
  j["fingerprint"] = fingerprint;
  j["grid"] = nlohmann::json::array();
  for (const auto& h : grid) j["grid"].push_back(engression::to_json(h));
  j["cells"] = nlohmann::json::array();
  for (const auto& c : cells) {
    j["cells"].push_back({{"method", c.method},
                          {"rep", c.rep},
                          {"hyper", c.hyper_index},
                          {"region", c.region},
                          {"points", c.points},
                          {"l1", opt_json(c.l1)},
                          {"l2", opt_json(c.l2)},
                          {"crps", opt_json(c.crps)},
                          {"coverage", opt_json(c.coverage)},
                          {"error", c.error ? nlohmann::json(*c.error) : nlohmann::json(nullptr)}});
  }
  j["summary"] = nlohmann::json::array();
  for (const auto& s : summary)
    j["summary"].push_back({{"method", s.method},
                            {"region", s.region},
                            {"metric", s.metric},
                            {"median", s.median},
                            {"iqr", s.iqr},
                            {"count", s.count}});
  return j;
}

std::string BenchmarkReport::to_csv() const {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << "method,rep,hyper,region,points,l1,l2,crps,coverage,error\n";
  for (const auto& c : cells) {
    std::string err = c.error.value_or("");
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << c.method << ',' << c.rep << ',' << c.hyper_index << ',' << c.region << ',' << c.points << ','
       << opt_csv(c.l1) << ',' << opt_csv(c.l2) << ',' << opt_csv(c.crps) << ',' << opt_csv(c.coverage) << ','
       << err << '\n';
  }
  return os.str();
}

}  // namespace engression
