#include "condvar/app/run_forecast.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "condvar/conditional.hpp"
#include "condvar/error.hpp"
#include "condvar/sim_lab.hpp"

namespace condvar::app {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return ec == std::errc() ? std::string(buf.data(), ptr) : std::string("nan");
}

std::string quantile_label(double q) {
  const int pct = static_cast<int>(std::lround(q * 100.0));
  return (pct < 10 ? "q0" : "q") + std::to_string(pct);
}

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ParseError, "config key '" + key + "' has the wrong type");
  }
}

PriorKind parse_prior(const std::string& s) {
  if (s == "acp") return PriorKind::Acp;
  if (s == "niw" || s == "gibbs") return PriorKind::Niw;
  throw Error(ErrorCode::ParseError, "unknown prior '" + s + "' (use acp or niw)");
}

std::vector<SeriesSpec> parse_series(const json& arr) {
  require(arr.is_array(), ErrorCode::ParseError, "config key 'series' must be an array");
  std::vector<SeriesSpec> out;
  for (const auto& item : arr) {
    SeriesSpec s;
    if (item.is_string()) {
      s.name = s.mnemonic = item.get<std::string>();
    } else {
      require(item.is_object() && item.contains("mnemonic"), ErrorCode::ParseError,
              "each series needs a 'mnemonic'");
      s.mnemonic = get_as<std::string>(item["mnemonic"], "series.mnemonic");
      s.name = item.contains("name") ? get_as<std::string>(item["name"], "series.name") : s.mnemonic;
      if (item.contains("transform")) s.transform = parse_transform(get_as<std::string>(item["transform"], "series.transform"));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void apply_json(RunConfig& cfg, const json& obj) {
  require(obj.is_object(), ErrorCode::ParseError, "config must be a JSON object");
  for (const auto& [key, v] : obj.items()) {
    if (key == "series") cfg.series = parse_series(v);
    else if (key == "sample_start") cfg.sample_start = Quarter::parse(get_as<std::string>(v, key));
    else if (key == "sample_end") cfg.sample_end = Quarter::parse(get_as<std::string>(v, key));
    else if (key == "lags") cfg.lags = get_as<Index>(v, key);
    else if (key == "prior") cfg.prior = parse_prior(get_as<std::string>(v, key));
    else if (key == "kappa1") cfg.kappa1 = get_as<double>(v, key);
    else if (key == "kappa2") cfg.kappa2 = get_as<double>(v, key);
    else if (key == "optimize_shrinkage") cfg.optimize_shrinkage = get_as<bool>(v, key);
    else if (key == "symmetric_shrinkage") cfg.symmetric_shrinkage = get_as<bool>(v, key);
    else if (key == "draws") cfg.draws = get_as<Index>(v, key);
    else if (key == "burn_in") cfg.burn_in = get_as<Index>(v, key);
    else if (key == "draws_per_param") cfg.draws_per_param = get_as<Index>(v, key);
    else if (key == "seed") cfg.seed = get_as<std::uint64_t>(v, key);
    else if (key == "horizon") cfg.horizon = get_as<int>(v, key);
    else if (key == "threads") cfg.threads = get_as<int>(v, key);
    else if (key == "quantiles") cfg.quantiles = get_as<std::vector<double>>(v, key);
    else if (key == "raw_draws") cfg.raw_draws = get_as<bool>(v, key);
    else if (key == "irf") {
      require(v.is_object() && v.contains("variable"), ErrorCode::ParseError, "'irf' needs a 'variable'");
      ImpulseRequest irf;
      irf.variable = get_as<std::string>(v["variable"], "irf.variable");
      if (v.contains("size")) irf.size = get_as<double>(v["size"], "irf.size");
      if (v.contains("horizon")) irf.horizon = get_as<int>(v["horizon"], "irf.horizon");
      cfg.impulse = irf;
    } else {
      throw Error(ErrorCode::ParseError, "unknown config key '" + key + "'");
    }
  }
}

std::filesystem::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::InvalidArgument, "cannot create output directory '" + dir + "'");
  return std::filesystem::path(dir);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::InvalidArgument, "cannot write '" + path.string() + "'");
  return out;
}

// Per-parameter-draw average of the rows belonging to each draw.
Eigen::MatrixXd mean_per_param(const ForecastDraws& d, Index n_params) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_params, d.draws.cols());
  Eigen::VectorXd count = Eigen::VectorXd::Zero(n_params);
  for (Index r = 0; r < d.size(); ++r) {
    const Index k = d.param_index[static_cast<std::size_t>(r)];
    out.row(k) += d.draws.row(r);
    count(k) += 1.0;
  }
  for (Index k = 0; k < n_params; ++k) out.row(k) /= std::max(count(k), 1.0);
  return out;
}

Eigen::MatrixXd history_of(const Dataset& data, Index p) {
  require(data.values.rows() >= p, ErrorCode::InsufficientData, "fewer observations than lags");
  return data.values.bottomRows(p);
}

json reduced_mean_json(const PosteriorDraws& post) {
  const ReducedParams& first = post.reduced.front();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(first.n());
  std::vector<Eigen::MatrixXd> lags(first.lags.size(), Eigen::MatrixXd::Zero(first.n(), first.n()));
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(first.n(), first.n());
  for (const auto& r : post.reduced) {
    b += r.b;
    sigma += r.sigma;
    for (std::size_t j = 0; j < lags.size(); ++j) lags[j] += r.lags[j];
  }
  const double scale = 1.0 / static_cast<double>(post.reduced.size());
  auto rows = [](const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      out.push_back(row);
    }
    return out;
  };
  json lag_arr = json::array();
  for (const auto& l : lags) lag_arr.push_back(rows(l * scale));
  json b_arr = json::array();
  for (Index i = 0; i < b.size(); ++i) b_arr.push_back(b(i) * scale);
  return json{{"intercept", b_arr}, {"lags", lag_arr}, {"sigma", rows(sigma * scale)}};
}

void write_text(const std::filesystem::path& path, const std::string& text, RunSummary& summary) {
  auto out = open_out(path);
  out << text;
  summary.files.push_back(path.filename().string());
}

}  // namespace

void RunConfig::validate() const {
  require(!series.empty(), ErrorCode::InvalidArgument, "no series configured");
  require(lags >= 1, ErrorCode::InvalidArgument, "lags must be >= 1");
  require(draws >= 1, ErrorCode::InvalidArgument, "draws must be >= 1");
  require(burn_in >= 0, ErrorCode::InvalidArgument, "burn_in must be >= 0");
  require(draws_per_param >= 1, ErrorCode::InvalidArgument, "draws_per_param must be >= 1");
  require(horizon >= 1, ErrorCode::InvalidArgument, "horizon must be >= 1");
  require(threads >= 1, ErrorCode::InvalidArgument, "threads must be >= 1");
  require(kappa1 > 0.0 && kappa2 > 0.0, ErrorCode::InvalidArgument, "shrinkage must be positive");
  require(!quantiles.empty(), ErrorCode::InvalidArgument, "no quantiles requested");
  for (std::size_t i = 0; i < quantiles.size(); ++i) {
    require(quantiles[i] >= 0.0 && quantiles[i] <= 1.0, ErrorCode::InvalidArgument, "quantiles must lie in [0, 1]");
    require(i == 0 || quantiles[i] > quantiles[i - 1], ErrorCode::InvalidArgument, "quantiles must be increasing");
  }
  if (sample_start && sample_end) {
    require(*sample_start < *sample_end, ErrorCode::InvalidArgument, "sample_start must precede sample_end");
  }
  if (impulse) {
    require(impulse->horizon >= 1, ErrorCode::InvalidArgument, "irf horizon must be >= 1");
  }
}

RunConfig parse_config_json(const std::string& text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  apply_json(cfg, obj);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::InvalidArgument, "cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_json(buf.str());
}

void apply_settings(RunConfig& cfg, const std::map<std::string, std::string>& settings) {
  json obj = json::object();
  for (const auto& [key, value] : settings) {
    // numbers and booleans parse as JSON; anything else is a bare string
    json v = json::parse(value, nullptr, false);
    obj[key] = v.is_discarded() ? json(value) : v;
  }
  apply_json(cfg, obj);
}

EstimationResult estimate(const Dataset& data, const RunConfig& cfg) {
  EstimationResult out;
  if (cfg.prior == PriorKind::Niw) {
    const NiwPrior prior = NiwPrior::uninformative(data.n(), cfg.lags);
    out.posterior = gibbs_niw(data.values, cfg.lags, prior, cfg.draws, cfg.burn_in, cfg.seed);
    return out;
  }
  AcpPrior prior = AcpPrior::from_data(data.values, cfg.lags, cfg.kappa1, cfg.kappa2);
  if (cfg.optimize_shrinkage) {
    const ShrinkageOptimum opt = cfg.symmetric_shrinkage ? optimize_shrinkage_symmetric(data.values, cfg.lags, prior)
                                                         : optimize_shrinkage(data.values, cfg.lags, prior);
    prior.kappa1 = opt.kappa1;
    prior.kappa2 = opt.kappa2;
    out.shrinkage = opt;
  }
  const AcpPosterior post = acp_posterior(data.values, cfg.lags, prior);
  out.log_ml = post.log_ml();
  out.posterior = acp_draw_params(post, cfg.draws, cfg.seed);
  return out;
}

double sample_quantile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorCode::InvalidArgument, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  // equal neighbours return the stored value bit for bit
  if (frac == 0.0 || values[lo] == values[hi]) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

void write_quantile_table(std::ostream& out, const Eigen::MatrixXd& draws, const std::vector<std::string>& names,
                          const std::vector<Quarter>& dates, const std::vector<double>& quantiles) {
  const auto n = static_cast<Index>(names.size());
  require(draws.cols() == n * static_cast<Index>(dates.size()), ErrorCode::DimensionMismatch,
          "draw width does not match variables x dates");
  out << "variable,date";
  for (double q : quantiles) out << ',' << quantile_label(q);
  out << '\n';
  std::vector<double> column(static_cast<std::size_t>(draws.rows()));
  for (Index var = 0; var < n; ++var) {
    for (std::size_t step = 0; step < dates.size(); ++step) {
      const Index c = static_cast<Index>(step) * n + var;
      for (Index r = 0; r < draws.rows(); ++r) column[static_cast<std::size_t>(r)] = draws(r, c);
      out << names[static_cast<std::size_t>(var)] << ',' << dates[step].str();
      for (double q : quantiles) out << ',' << fmt(sample_quantile(column, q));
      out << '\n';
    }
  }
}

void write_difference_table(std::ostream& out, const Eigen::MatrixXd& per_param, const std::vector<std::string>& names,
                            const std::vector<Quarter>& dates, const std::vector<double>& quantiles) {
  const auto n = static_cast<Index>(names.size());
  require(per_param.cols() == n * static_cast<Index>(dates.size()), ErrorCode::DimensionMismatch,
          "difference width does not match variables x dates");
  out << "variable,date,mean";
  for (double q : quantiles) out << ',' << quantile_label(q);
  out << '\n';
  std::vector<double> column(static_cast<std::size_t>(per_param.rows()));
  for (Index var = 0; var < n; ++var) {
    for (std::size_t step = 0; step < dates.size(); ++step) {
      const Index c = static_cast<Index>(step) * n + var;
      for (Index r = 0; r < per_param.rows(); ++r) column[static_cast<std::size_t>(r)] = per_param(r, c);
      out << names[static_cast<std::size_t>(var)] << ',' << dates[step].str() << ',' << fmt(per_param.col(c).mean());
      for (double q : quantiles) out << ',' << fmt(sample_quantile(column, q));
      out << '\n';
    }
  }
}

RunSummary run_estimate(const RunConfig& cfg, const std::string& data_path, const std::string& output_dir) {
  cfg.validate();
  const Dataset data = ingest(data_path, cfg.series, cfg.sample_start, cfg.sample_end);
  const EstimationResult est = estimate(data, cfg);
  const auto dir = prepare_dir(output_dir);

  json report{{"prior", cfg.prior == PriorKind::Acp ? "acp" : "niw"},
              {"variables", data.names},
              {"sample_start", data.dates.front().str()},
              {"sample_end", data.dates.back().str()},
              {"observations", data.values.rows()},
              {"lags", cfg.lags},
              {"draws", est.posterior.size()},
              {"seed", cfg.seed},
              {"posterior_mean", reduced_mean_json(est.posterior)}};
  if (cfg.prior == PriorKind::Niw) report["burn_in"] = cfg.burn_in;
  if (est.log_ml) report["log_marginal_likelihood"] = *est.log_ml;
  if (est.shrinkage) {
    report["kappa1"] = est.shrinkage->kappa1;
    report["kappa2"] = est.shrinkage->kappa2;
  } else if (cfg.prior == PriorKind::Acp) {
    report["kappa1"] = cfg.kappa1;
    report["kappa2"] = cfg.kappa2;
  }
  RunSummary summary;
  write_text(dir / "estimate.json", report.dump(2) + "\n", summary);
  return summary;
}

RunSummary run_forecast(const RunConfig& cfg, const std::string& data_path,
                        const std::optional<std::string>& scenario_path, const std::string& output_dir) {
  cfg.validate();
  const ScenarioFile scenario = scenario_path ? parse_scenario(*scenario_path) : ScenarioFile{};

  const Dataset data = ingest(data_path, cfg.series, cfg.sample_start, cfg.sample_end);
  const Quarter forecast_start = data.dates.back().plus(1);
  const int horizon = scenario.horizon > 0 ? scenario.horizon : cfg.horizon;
  const ConstraintSet constraints = to_constraints(scenario, data.names, forecast_start, horizon);
  std::optional<Index> impulse_var;
  if (cfg.impulse) {
    impulse_var = data.column(cfg.impulse->variable);
    require(impulse_var.has_value(), ErrorCode::UnknownVariable, "unknown irf variable '" + cfg.impulse->variable + "'");
  }

  const EstimationResult est = estimate(data, cfg);
  const std::vector<SvarParams>& params = est.posterior.draws;
  const Eigen::MatrixXd history = history_of(data, cfg.lags);
  const auto dir = prepare_dir(output_dir);
  std::vector<Quarter> dates;
  for (int k = 0; k < horizon; ++k) dates.push_back(forecast_start.plus(k));

  RunSummary summary;
  const ForecastDraws uncond = forecast_over_draws(params, history, ConstraintSet{}, horizon, cfg.draws_per_param,
                                                   derive_seed(cfg.seed, 1), cfg.threads);
  {
    auto out = open_out(dir / "unconditional_quantiles.csv");
    write_quantile_table(out, uncond.draws, data.names, dates, cfg.quantiles);
    summary.files.push_back("unconditional_quantiles.csv");
  }

  const bool conditional = !constraints.empty();
  std::optional<ForecastDraws> cond;
  if (conditional) {
    cond = forecast_over_draws(params, history, constraints, horizon, cfg.draws_per_param, derive_seed(cfg.seed, 2),
                               cfg.threads);
    summary.violations = count_violations(*cond, constraints);
    {
      auto out = open_out(dir / "conditional_quantiles.csv");
      write_quantile_table(out, cond->draws, data.names, dates, cfg.quantiles);
      summary.files.push_back("conditional_quantiles.csv");
    }
    // conditional mean per parameter draw minus that draw's unconditional mean
    Eigen::MatrixXd diff = mean_per_param(*cond, static_cast<Index>(params.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
      const SystemSolver solver(build_forecast_system(params[k], history, horizon));
      diff.row(static_cast<Index>(k)) -= solver.mean().transpose();
    }
    auto out = open_out(dir / "difference.csv");
    write_difference_table(out, diff, data.names, dates, cfg.quantiles);
    summary.files.push_back("difference.csv");
  }

  if (cfg.raw_draws) {
    const ForecastDraws& d = cond ? *cond : uncond;
    auto out = open_out(dir / "draws.csv");
    out << "draw,param";
    for (const auto& q : dates) {
      for (const auto& name : data.names) out << ',' << name << '@' << q.str();
    }
    out << '\n';
    for (Index r = 0; r < d.size(); ++r) {
      out << r << ',' << d.param_index[static_cast<std::size_t>(r)];
      for (Index c = 0; c < d.draws.cols(); ++c) out << ',' << fmt(d.draws(r, c));
      out << '\n';
    }
    summary.files.push_back("draws.csv");
  }

  if (cfg.impulse) {
    // exact conditional mean under a one-step equality, per parameter draw
    const int irf_h = cfg.impulse->horizon;
    const Index n = data.n();
    Eigen::MatrixXd diff(static_cast<Index>(params.size()), n * irf_h);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const ForecastSystem f = build_forecast_system(params[k], history, irf_h);
      const SystemSolver solver(f);
      GaussianRestrictions g;
      g.matrix = Eigen::MatrixXd::Zero(1, f.size());
      g.matrix(0, f.coord(*impulse_var, 0)) = 1.0;
      g.mean = Eigen::VectorXd::Constant(1, solver.mean()(f.coord(*impulse_var, 0)) + cfg.impulse->size);
      g.cov = Eigen::MatrixXd::Zero(1, 1);
      const ConditionalMoments m = conditional_moments_linear(f, g);
      diff.row(static_cast<Index>(k)) = (m.mu_y - solver.mean()).transpose();
    }
    std::vector<Quarter> irf_dates;
    for (int k = 0; k < irf_h; ++k) irf_dates.push_back(forecast_start.plus(k));
    auto out = open_out(dir / "irf.csv");
    write_difference_table(out, diff, data.names, irf_dates, cfg.quantiles);
    summary.files.push_back("irf.csv");
  }

  json report{{"prior", cfg.prior == PriorKind::Acp ? "acp" : "niw"},
              {"variables", data.names},
              {"forecast_start", forecast_start.str()},
              {"horizon", horizon},
              {"parameter_draws", params.size()},
              {"draws_per_param", cfg.draws_per_param},
              {"seed", cfg.seed},
              {"conditional", conditional},
              {"violations", summary.violations}};
  if (est.log_ml) report["log_marginal_likelihood"] = *est.log_ml;
  if (est.shrinkage) {
    report["kappa1"] = est.shrinkage->kappa1;
    report["kappa2"] = est.shrinkage->kappa2;
  }
  summary.files.push_back("summary.json");
  report["files"] = summary.files;
  auto out = open_out(dir / "summary.json");
  out << report.dump(2) << '\n';
  return summary;
}

RunSummary run_bench(Index n_draws, std::uint64_t seed, bool baselines, const std::string& output_dir,
                     const std::string& which) {
  require(which == "all" || which == "equality" || which == "inequality", ErrorCode::InvalidArgument,
          "bench suite must be all, equality or inequality");
  BenchOptions opts;
  opts.n_draws = n_draws;
  opts.seed = seed;
  opts.baselines = baselines;
  const auto dir = prepare_dir(output_dir);
  RunSummary summary;
  auto run = [&](const std::vector<BenchConfig>& suite, const std::string& file) {
    const std::vector<BenchResult> results = run_benchmark(suite, opts);
    for (const auto& r : results) summary.violations += r.violations;
    auto out = open_out(dir / file);
    write_bench_table(out, results);
    summary.files.push_back(file);
  };
  if (which != "inequality") run(equality_suite(), "bench_equality.csv");
  if (which != "equality") run(inequality_suite(), "bench_inequality.csv");
  return summary;
}

}  // namespace condvar::app
