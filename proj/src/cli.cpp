#include "engression/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "engression/baselines.hpp"
#include "engression/csv.hpp"
#include "engression/engression.hpp"
#include "engression/errors.hpp"
#include "engression/evalx.hpp"
#include "engression/simgen.hpp"
#include "engression/theory_oracle.hpp"

namespace engression {

namespace {

// Thrown for bad flag combinations detected after parsing.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

double parse_number(const std::string& s, const std::string& what) {
  const CsvTable t = parse_csv("v\n" + s + "\n");
  if (t.data.rows() != 1) throw UsageError(what + ": not a number: '" + s + "'");
  return t.data(0, 0);
}

Vector parse_numbers(const std::string& s, const std::string& what) {
  Vector out;
  for (const auto& item : split_list(s)) out.push_back(parse_number(item, what));
  if (out.empty()) throw UsageError(what + ": empty list");
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << text;
}

// Column indices named in `spec` (header names or 0-based indices).
std::vector<std::size_t> resolve_columns(const CsvTable& t, const std::string& spec) {
  std::vector<std::size_t> idx;
  for (const auto& item : split_list(spec)) {
    auto it = std::find(t.header.begin(), t.header.end(), item);
    if (it != t.header.end()) {
      idx.push_back(static_cast<std::size_t>(it - t.header.begin()));
      continue;
    }
    const bool digits = std::all_of(item.begin(), item.end(), [](char c) { return c >= '0' && c <= '9'; });
    if (!digits || std::stoul(item) >= t.header.size()) throw UsageError("unknown column '" + item + "'");
    idx.push_back(std::stoul(item));
  }
  if (idx.empty()) throw UsageError("no columns selected");
  return idx;
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& drop) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i)
    if (std::find(drop.begin(), drop.end(), i) == drop.end()) keep.push_back(i);
  return keep;
}

// Columns whose header starts with 'y' are responses by convention.
std::vector<std::size_t> default_targets(const CsvTable& t) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (!t.header[i].empty() && t.header[i][0] == 'y') idx.push_back(i);
  if (idx.empty() && !t.header.empty()) idx.push_back(t.header.size() - 1);
  return idx;
}

std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
  std::vector<std::string> h;
  for (std::size_t i = 0; i < n; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string setting;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<double> noise_sd;
  std::optional<double> split_q;
  std::string keep = "smaller";
};

void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  SimSetting s = SimSetting::by_name(a.setting);
  if (a.noise_sd) {
    if (s.two_point()) throw UsageError("--noise-sd applies to the Gaussian-noise settings only");
    s.noise_sd = *a.noise_sd;
  }
  if (a.keep != "smaller" && a.keep != "larger") throw UsageError("--keep must be smaller or larger");
  Rng rng(a.seed);
  const SimData d = generate(s, a.n, rng);
  std::vector<std::string> header = numbered("x", d.x.cols());
  header.push_back("y0");
  if (!a.split_q) {
    write_csv(a.out, header, hconcat(d.x, d.y));
    out << "wrote " << d.x.rows() << " rows to " << a.out << '\n';
    return;
  }
  const Split sp = split_at_quantile(d.x, d.y, *a.split_q, a.keep == "smaller" ? Keep::Smaller : Keep::Larger);
  std::filesystem::create_directories(a.out);
  const auto dir = std::filesystem::path(a.out);
  write_csv((dir / "train.csv").string(), header, hconcat(sp.x_train, sp.y_train));
  write_csv((dir / "test.csv").string(), header, hconcat(sp.x_test, sp.y_test));
  out << "threshold," << format_double(sp.threshold) << '\n'
      << "train_rows," << sp.x_train.rows() << '\n'
      << "test_rows," << sp.x_test.rows() << '\n';
}

// ---------------------------------------------------------------------------
// fit

struct RunConfig {
  NetConfig net;
  TrainConfig train;
};

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("run config: expected a JSON object");
  RunConfig rc;
  for (const auto& [key, v] : j.items()) {
    if (key == "layers") rc.net.num_layers = v.get<std::size_t>();
    else if (key == "hidden") rc.net.hidden_dim = v.get<std::size_t>();
    else if (key == "noise_dim") rc.net.noise_dim = v.get<std::size_t>();
    else if (key == "skip") rc.net.skip = v.get<bool>();
    else if (key == "linear_term") rc.net.linear_term = v.get<bool>();
    else if (key == "steps") rc.train.steps = v.get<std::size_t>();
    else if (key == "lr") rc.train.lr = v.get<double>();
    else if (key == "lr_end") rc.train.lr_end = v.get<double>();
    else if (key == "batch_size") rc.train.batch_size = v.get<std::size_t>();
    else if (key == "m_per_obs") rc.train.m_per_obs = v.get<std::size_t>();
    else if (key == "loss") rc.train.loss = LossSpec::parse(v.get<std::string>());
    else if (key == "seed") rc.train.seed = v.get<std::uint64_t>();
    else if (key == "optimizer") {
      const auto s = v.get<std::string>();
      if (s == "adam") rc.train.optimizer = OptimizerKind::Adam;
      else if (s == "gd") rc.train.optimizer = OptimizerKind::GradientDescent;
      else throw FormatError("run config: optimizer must be adam or gd");
    } else {
      throw FormatError("run config: unknown key '" + key + "'");
    }
  }
  return rc;
}

struct FitArgs {
  std::string data;
  std::string target_cols;
  std::string method = "auto";
  std::optional<std::string> loss;
  std::optional<std::size_t> layers, hidden, noise_dim, steps, m_per_obs, batch_size;
  std::optional<double> lr;
  std::optional<double> lr_end;
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string quantiles = "0.025,0.5,0.975";
  std::string out_model;
};

void cmd_fit(const FitArgs& a, std::ostream& out) {
  const CsvTable t = read_csv(a.data);
  const auto ycols = a.target_cols.empty() ? default_targets(t) : resolve_columns(t, a.target_cols);
  const auto xcols = complement(t.header.size(), ycols);
  if (xcols.empty()) throw UsageError("no covariate columns left after removing targets");
  const Matrix x = take_cols(t.data, xcols);
  const Matrix y = take_cols(t.data, ycols);

  RunConfig rc;
  if (!a.config.empty()) {
    try {
      rc = run_config_from_json(nlohmann::json::parse(read_file(a.config)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("run config: ") + e.what());
    }
  }
  if (a.loss) rc.train.loss = LossSpec::parse(*a.loss);
  if (a.layers) rc.net.num_layers = *a.layers;
  if (a.hidden) rc.net.hidden_dim = *a.hidden;
  if (a.noise_dim) rc.net.noise_dim = *a.noise_dim;
  if (a.steps) rc.train.steps = *a.steps;
  if (a.m_per_obs) rc.train.m_per_obs = *a.m_per_obs;
  if (a.batch_size) rc.train.batch_size = *a.batch_size;
  if (a.lr) rc.train.lr = *a.lr;
  if (a.lr_end) rc.train.lr_end = *a.lr_end;
  if (a.seed) rc.train.seed = *a.seed;
  Rng rng(rc.train.seed);

  std::string payload;
  double final_loss = 0.0;
  const bool point_loss = rc.train.loss.kind == LossKind::L1 || rc.train.loss.kind == LossKind::L2;
  if (a.method == "lin_ols") {
    const BaselineModel b = fit_linear_ols(x, y);
    const Matrix p = b.predict(x);
    for (std::size_t i = 0; i < p.size(); ++i) final_loss += std::pow(p.values()[i] - y.values()[i], 2);
    final_loss /= static_cast<double>(p.size());
    payload = b.save();
  } else if (a.method == "lin_qr") {
    const Vector alphas = parse_numbers(a.quantiles, "--quantiles");
    const BaselineModel b = fit_linear_quantile(x, y, alphas, rc.train);
    const Matrix p = b.predict(x);
    for (std::size_t c = 0; c < alphas.size(); ++c) final_loss += pinball_loss(y.col(0), p.col(c), alphas[c]);
    final_loss /= static_cast<double>(alphas.size());
    payload = b.save();
  } else if (a.method == "auto" || a.method == "engression") {
    if (a.method == "auto" && rc.net.noise_dim == 0 && point_loss) {
      if (!a.m_per_obs) rc.train.m_per_obs = 1;
      const BaselineModel b = fit_nn_regression(x, y, rc.train.loss, rc.net, rc.train, rng);
      final_loss = b.net->loss_trace().back();
      payload = b.save();
    } else {
      const EngressionModel m = EngressionModel::fit(x, y, rc.train, rc.net, rng);
      if (m.degenerate_column_warning()) std::cerr << "warning: a column has zero variance\n";
      final_loss = m.loss_trace().back();
      payload = m.save();
    }
  } else {
    throw UsageError("--method must be auto, engression, lin_ols or lin_qr");
  }
  write_file(a.out_model, payload);
  out << "final_loss," << format_double(final_loss) << '\n';
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model;
  std::string data;
  std::string type = "mean";
  std::string quantiles = "0.1,0.5,0.9";
  std::string x_cols;
  std::size_t nsample = kDefaultSamples;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::string out;
};

std::vector<std::string> quantile_header(std::span<const double> alphas) {
  std::vector<std::string> h;
  for (double a : alphas) h.push_back("q_" + format_double(a));
  return h;
}

void cmd_predict(const PredictArgs& a, std::ostream& out) {
  const std::string payload = read_file(a.model);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  const std::string kind = doc.is_object() && doc.contains("kind") ? doc["kind"].get<std::string>() : "";

  const CsvTable t = read_csv(a.data);
  const auto xcols = a.x_cols.empty() ? complement(t.header.size(), default_targets(t)) : resolve_columns(t, a.x_cols);
  const Matrix x = take_cols(t.data, xcols);
  Rng rng(a.seed);

  Matrix result;
  std::vector<std::string> header;
  if (kind == kEngressionKind) {
    const EngressionModel m = EngressionModel::load(payload);
    if (x.cols() != m.in_dim())
      throw ShapeError("model expects " + std::to_string(m.in_dim()) + " covariates, data has " +
                       std::to_string(x.cols()));
    const std::size_t k = m.out_dim();
    if (a.type == "mean") {
      result = m.predict_mean(x, rng, a.nsample);
      header = numbered("y", k);
    } else if (a.type == "median") {
      result = m.predict_median(x, rng, a.nsample);
      header = numbered("y", k);
    } else if (a.type == "quantile") {
      const Vector alphas = parse_numbers(a.quantiles, "--quantiles");
      result = m.predict_quantile(x, alphas, rng, a.nsample);
      header = quantile_header(alphas);
    } else if (a.type == "interval") {
      result = m.prediction_interval(x, rng, a.level, a.nsample);
      header = {"lower", "upper"};
    } else if (a.type == "sample") {
      const Matrix draws = m.sample_batch(x, a.nsample, rng);
      result = Matrix(x.rows(), a.nsample * k);
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t s = 0; s < a.nsample; ++s)
          for (std::size_t c = 0; c < k; ++c) result(i, s * k + c) = draws(i * a.nsample + s, c);
      if (k == 1) {
        header = numbered("s", a.nsample);
      } else {
        for (std::size_t s = 0; s < a.nsample; ++s)
          for (std::size_t c = 0; c < k; ++c) header.push_back("s" + std::to_string(s) + "_y" + std::to_string(c));
      }
    } else {
      throw UsageError("--type must be mean, median, quantile, sample or interval");
    }
  } else {
    const BaselineModel b = BaselineModel::load(payload);
    if (b.kind == BaselineKind::LinearQr) {
      if (a.type != "quantile") throw UnsupportedError("linear quantile models only answer --type quantile");
      result = b.predict(x);
      header = quantile_header(b.alphas);
    } else {
      if (a.type != "mean" && a.type != "median")
        throw UnsupportedError("point-prediction models only answer --type mean or median");
      result = b.predict(x);
      header = numbered("y", result.cols());
    }
  }
  write_csv(a.out, header, result);
  out << "wrote " << result.rows() << " rows to " << a.out << '\n';
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string pred;
  std::string truth;
  std::string metrics = "l1,l2";
  std::string pred_col;
  std::string truth_col = "y0";
  std::string x_col = "x0";
  std::string regions;  // "x_max,eta_max"
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const CsvTable p = read_csv(a.pred);
  const CsvTable t = read_csv(a.truth);
  if (p.data.rows() != t.data.rows())
    throw ShapeError("prediction and truth files have different row counts");
  const Vector y = t.data.col(t.column(a.truth_col));
  const std::size_t n = y.size();

  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  groups.emplace_back("all", all);
  if (!a.regions.empty()) {
    const Vector r = parse_numbers(a.regions, "--regions");
    if (r.size() != 2) throw UsageError("--regions takes x_max,eta_max");
    const Vector xv = t.data.col(t.column(a.x_col));
    std::vector<std::size_t> in, band, outside;
    for (std::size_t i = 0; i < n; ++i) {
      if (xv[i] <= r[0]) {
        in.push_back(i);
      } else {
        outside.push_back(i);
        if (xv[i] <= r[0] + r[1]) band.push_back(i);
      }
    }
    groups.emplace_back("in", in);
    groups.emplace_back("band", band);
    groups.emplace_back("out", outside);
  }

  std::vector<std::size_t> samples;
  for (std::size_t c = 0; c < p.header.size(); ++c)
    if (p.header[c].size() > 1 && p.header[c][0] == 's' && std::isdigit(static_cast<unsigned char>(p.header[c][1])))
      samples.push_back(c);

  out << "region,metric,value,count\n";
  for (const auto& metric : split_list(a.metrics)) {
    if (metric != "l1" && metric != "l2" && metric != "crps" && metric != "coverage")
      throw UsageError("unknown metric '" + metric + "'");
    for (const auto& [name, idx] : groups) {
      out << name << ',' << metric << ',';
      if (idx.empty()) {
        out << ",0\n";
        continue;
      }
      double v = 0.0;
      if (metric == "l1" || metric == "l2") {
        const std::size_t c = a.pred_col.empty() ? 0 : p.column(a.pred_col);
        for (std::size_t i : idx) {
          const double d = p.data(i, c) - y[i];
          v += metric == "l1" ? std::abs(d) : d * d;
        }
        v /= static_cast<double>(idx.size());
      } else if (metric == "crps") {
        if (samples.empty()) throw UsageError("crps needs sample columns s0, s1, ...");
        Vector draws(samples.size());
        for (std::size_t i : idx) {
          for (std::size_t s = 0; s < samples.size(); ++s) draws[s] = p.data(i, samples[s]);
          v += crps_sample(draws, y[i]);
        }
        v /= static_cast<double>(idx.size());
      } else {
        const std::size_t lo = p.column("lower");
        const std::size_t hi = p.column("upper");
        Matrix iv(idx.size(), 2);
        Vector ys;
        for (std::size_t r = 0; r < idx.size(); ++r) {
          iv(r, 0) = p.data(idx[r], lo);
          iv(r, 1) = p.data(idx[r], hi);
          ys.push_back(y[idx[r]]);
        }
        v = coverage(iv, ys);
      }
      out << format_double(v) << ',' << idx.size() << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkArgs {
  std::string setting;
  std::string methods = "engression";
  std::size_t reps = 1;
  std::string grid = "default";
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  std::size_t noise_dim = 100;
  std::size_t nsample = kDefaultSamples;
  bool cv = false;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  std::string out_report;
  std::string out_csv;
};

void cmd_benchmark(const BenchmarkArgs& a, std::ostream& out) {
  BenchmarkConfig cfg;
  cfg.setting = SimSetting::by_name(a.setting);
  cfg.methods = split_list(a.methods);
  if (a.grid == "default") {
    cfg.grid = default_hyper_grid();
  } else if (a.grid == "single") {
    cfg.grid = {HyperParams{}};
  } else {
    try {
      const auto j = nlohmann::json::parse(read_file(a.grid));
      if (!j.is_array()) throw FormatError("grid file: expected a JSON array");
      cfg.grid.clear();
      for (const auto& h : j) cfg.grid.push_back(hyper_params_from_json(h));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("grid file: ") + e.what());
    }
  }
  cfg.reps = a.reps;
  cfg.n_train = a.n_train;
  cfg.n_test = a.n_test;
  cfg.noise_dim = a.noise_dim;
  cfg.nsample = a.nsample;
  cfg.cv = a.cv;
  cfg.folds = a.folds;
  cfg.seed = a.seed;
  const BenchmarkReport report = run_benchmark(cfg);
  write_file(a.out_report, report.to_json().dump(2) + "\n");
  if (!a.out_csv.empty()) write_file(a.out_csv, report.to_csv());
  out << "method,region,metric,median,iqr,count\n";
  for (const auto& s : report.summary)
    out << s.method << ',' << s.region << ',' << s.metric << ',' << format_double(s.median) << ','
        << format_double(s.iqr) << ',' << s.count << '\n';
}

// ---------------------------------------------------------------------------
// oracle

struct OracleArgs {
  std::string what;
  double lipschitz = 1.0;
  double eta_max = 1.0;
  std::string family = "median";
  std::string noise = "uniform";
  double sd = 1.0;
  std::string delta = "1";
  double ell = 1.0;
  std::string beta = "1,1,0.5";
  std::string x = "0";
  std::optional<double> alpha;
  double n = 1000;
  double confidence = 0.05;
  double support = 1.0;
  double cramer = 0.0;
  double density = 1.0;
};

NoiseDist oracle_noise(const OracleArgs& a) {
  if (a.noise == "uniform") return NoiseDist::uniform(a.eta_max);
  if (a.noise == "truncated_gaussian") return NoiseDist::truncated_gaussian(a.sd, a.eta_max);
  throw UsageError("--noise must be uniform or truncated_gaussian");
}

void cmd_oracle(const OracleArgs& a, std::ostream& out) {
  if (a.what == "gains") {
    out << "delta,u_engression,u_baseline,gain\n";
    for (double d : parse_numbers(a.delta, "--delta")) {
      GainResult g;
      if (a.family == "median") g = median_uncertainty_gain(a.lipschitz, a.eta_max, d);
      else if (a.family == "mean") g = mean_uncertainty_gain(a.lipschitz, oracle_noise(a), d);
      else if (a.family == "dist") g = dist_uncertainty_gain(a.lipschitz, oracle_noise(a), d, a.ell);
      else throw UsageError("--family must be median, mean or dist");
      out << format_double(d) << ',' << format_double(g.uncertainty_engression) << ','
          << format_double(g.uncertainty_baseline) << ',' << format_double(g.gain) << '\n';
    }
  } else if (a.what == "quadratic") {
    const Vector b = parse_numbers(a.beta, "--beta");
    if (b.size() != 3) throw UsageError("--beta takes three coefficients");
    out << "x,mean,median" << (a.alpha ? ",quantile" : "") << '\n';
    for (double x : parse_numbers(a.x, "--x")) {
      const QuadraticTruth q = quadratic_truth({b[0], b[1], b[2]}, oracle_noise(a), x, a.alpha);
      out << format_double(x) << ',' << format_double(q.mean) << ',' << format_double(q.median);
      if (q.quantile) out << ',' << format_double(*q.quantile);
      out << '\n';
    }
  } else if (a.what == "bounds") {
    const double dkw = dkw_cramer_bound(a.support, a.confidence, a.n);
    out << "cramer_bound,quantile_gap\n"
        << format_double(dkw) << ',' << format_double(quantile_gap_bound(a.cramer > 0.0 ? a.cramer : dkw, a.density))
        << '\n';
  } else {
    throw UsageError("oracle takes gains, quadratic or bounds");
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Engression: distributional regression that extrapolates", "engress"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Draw a synthetic data set");
  simulate->add_option("--setting", sim.setting, "softplus|square|cubic|log|quadratic|quadratic_postanm|prepost")
      ->required();
  simulate->add_option("--n", sim.n, "Number of rows")->required();
  simulate->add_option("--seed", sim.seed);
  simulate->add_option("--out", sim.out, "Output CSV, or a directory when splitting")->required();
  simulate->add_option("--noise-sd", sim.noise_sd);
  simulate->add_option("--split-q", sim.split_q, "Split at this quantile of x0")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--keep", sim.keep, "Side used for training: smaller|larger");

  FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "Fit a model to a CSV");
  fitc->add_option("--data", fit.data)->required();
  fitc->add_option("--target-cols", fit.target_cols, "Response columns (names or indices); default y*");
  fitc->add_option("--method", fit.method, "auto|engression|lin_ols|lin_qr");
  fitc->add_option("--loss", fit.loss, "energy|gaussian[:s]|laplace[:s]|imq[:c]|l1|l2|pinball:<a>");
  fitc->add_option("--layers", fit.layers);
  fitc->add_option("--hidden", fit.hidden);
  fitc->add_option("--noise-dim", fit.noise_dim);
  fitc->add_option("--lr", fit.lr);
  fitc->add_option("--lr-end", fit.lr_end, "Decay the learning rate geometrically to this value");
  fitc->add_option("--steps", fit.steps);
  fitc->add_option("--m-per-obs", fit.m_per_obs);
  fitc->add_option("--batch-size", fit.batch_size);
  fitc->add_option("--seed", fit.seed);
  fitc->add_option("--config", fit.config, "JSON run config; flags override it");
  fitc->add_option("--quantiles", fit.quantiles, "Levels for lin_qr");
  fitc->add_option("--out-model", fit.out_model)->required();

  PredictArgs pred;
  auto* predict = app.add_subcommand("predict", "Predict from a saved model");
  predict->add_option("--model", pred.model)->required();
  predict->add_option("--data", pred.data)->required();
  predict->add_option("--type", pred.type, "mean|median|quantile|sample|interval");
  predict->add_option("--quantiles", pred.quantiles);
  predict->add_option("--x-cols", pred.x_cols, "Covariate columns; default all but y*");
  predict->add_option("--nsample", pred.nsample);
  predict->add_option("--level", pred.level);
  predict->add_option("--seed", pred.seed);
  predict->add_option("--out", pred.out)->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score predictions against observed responses");
  eval->add_option("--pred", ev.pred)->required();
  eval->add_option("--truth", ev.truth)->required();
  eval->add_option("--metrics", ev.metrics, "Comma list of l1,l2,crps,coverage");
  eval->add_option("--pred-col", ev.pred_col, "Point-prediction column; default the first");
  eval->add_option("--truth-col", ev.truth_col);
  eval->add_option("--x-col", ev.x_col);
  eval->add_option("--regions", ev.regions, "x_max,eta_max: also report in/band/out regions");

  BenchmarkArgs bm;
  auto* bench = app.add_subcommand("benchmark", "Seed-replicated simulation benchmark");
  bench->add_option("--setting", bm.setting)->required();
  bench->add_option("--methods", bm.methods, "Comma list of engression,nn_l1,nn_l2,lin_ols,lin_qr");
  bench->add_option("--reps", bm.reps);
  bench->add_option("--grid", bm.grid, "default|single|<json file>");
  bench->add_option("--n-train", bm.n_train);
  bench->add_option("--n-test", bm.n_test);
  bench->add_option("--noise-dim", bm.noise_dim);
  bench->add_option("--nsample", bm.nsample);
  bench->add_flag("--cv", bm.cv, "Select hyper-parameters by k-fold cross-validation");
  bench->add_option("--folds", bm.folds);
  bench->add_option("--seed", bm.seed);
  bench->add_option("--out-report", bm.out_report, "JSON report")->required();
  bench->add_option("--out-csv", bm.out_csv, "Per-cell CSV");

  OracleArgs orc;
  auto* oracle = app.add_subcommand("oracle", "Closed-form extrapolation oracles");
  oracle->add_option("what", orc.what, "gains|quadratic|bounds")->required();
  oracle->add_option("--L", orc.lipschitz, "Lipschitz constant");
  oracle->add_option("--eta-max", orc.eta_max);
  oracle->add_option("--family", orc.family, "median|mean|dist");
  oracle->add_option("--noise", orc.noise, "uniform|truncated_gaussian");
  oracle->add_option("--sd", orc.sd);
  oracle->add_option("--delta", orc.delta, "Distance(s) beyond the support, comma list");
  oracle->add_option("--ell", orc.ell, "Wasserstein order; inf for the sup case");
  oracle->add_option("--beta", orc.beta);
  oracle->add_option("--x", orc.x);
  oracle->add_option("--alpha", orc.alpha);
  oracle->add_option("--n", orc.n);
  oracle->add_option("--confidence", orc.confidence);
  oracle->add_option("--support", orc.support);
  oracle->add_option("--cramer", orc.cramer);
  oracle->add_option("--density", orc.density);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "engress: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) cmd_simulate(sim, out);
    else if (fitc->parsed()) cmd_fit(fit, out);
    else if (predict->parsed()) cmd_predict(pred, out);
    else if (eval->parsed()) cmd_eval(ev, out);
    else if (bench->parsed()) cmd_benchmark(bm, out);
    else cmd_oracle(orc, out);
  } catch (const NumericError& e) {
    err << "engress: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "engress: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace engression
