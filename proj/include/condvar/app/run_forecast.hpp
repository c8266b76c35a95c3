#pragma once

// Orchestration behind the command-line tool: configuration, estimation,
// forecasting and table output.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "condvar/app/ingest.hpp"
#include "condvar/app/scenario.hpp"
#include "condvar/estimation.hpp"

namespace condvar::app {

enum class PriorKind { Acp, Niw };

struct ImpulseRequest {
  std::string variable;
  double size = 1.0;  // added to the one-step-ahead mean of `variable`
  int horizon = 12;
};

struct RunConfig {
  std::vector<SeriesSpec> series = default_macro_panel();
  std::optional<Quarter> sample_start;
  std::optional<Quarter> sample_end;
  Index lags = 4;
  PriorKind prior = PriorKind::Acp;
  double kappa1 = 0.083;
  double kappa2 = 0.0024;
  bool optimize_shrinkage = false;
  bool symmetric_shrinkage = false;
  Index draws = 1000;          // retained parameter draws
  Index burn_in = 1000;        // Gibbs only
  Index draws_per_param = 1;   // forecast draws per parameter draw
  std::uint64_t seed = 1;
  int horizon = 12;            // used when the scenario does not fix one
  int threads = 1;
  std::vector<double> quantiles{0.05, 0.16, 0.50, 0.84, 0.95};
  bool raw_draws = false;
  std::optional<ImpulseRequest> impulse;

  void validate() const;
};

/// Reads a JSON configuration; absent keys keep their defaults.
RunConfig load_config(const std::string& path);
RunConfig parse_config_json(const std::string& text);

/// Applies `key = value` overrides (scenario [settings] block).
void apply_settings(RunConfig& cfg, const std::map<std::string, std::string>& settings);

struct EstimationResult {
  PosteriorDraws posterior;
  std::optional<ShrinkageOptimum> shrinkage;
  std::optional<double> log_ml;
};

EstimationResult estimate(const Dataset& data, const RunConfig& cfg);

/// Type-7 sample quantile of the values (copied and sorted).
double sample_quantile(std::vector<double> values, double q);

/// variable,date,q05,...; one row per (variable, forecast date).
void write_quantile_table(std::ostream& out, const Eigen::MatrixXd& draws, const std::vector<std::string>& names,
                          const std::vector<Quarter>& dates, const std::vector<double>& quantiles);

/// variable,date,mean,q05,...; rows are per-parameter-draw differences.
void write_difference_table(std::ostream& out, const Eigen::MatrixXd& per_param, const std::vector<std::string>& names,
                            const std::vector<Quarter>& dates, const std::vector<double>& quantiles);

struct RunSummary {
  std::vector<std::string> files;
  Index violations = 0;
};

/// `estimate` subcommand: writes estimate.json.
RunSummary run_estimate(const RunConfig& cfg, const std::string& data_path, const std::string& output_dir);

/// `forecast` subcommand: quantile tables, differences and optional extras.
/// The scenario's [settings] are not applied here; merge them into `cfg` first.
RunSummary run_forecast(const RunConfig& cfg, const std::string& data_path, const std::optional<std::string>& scenario_path,
                        const std::string& output_dir);

/// `bench` subcommand: equality and inequality timing tables.
RunSummary run_bench(Index n_draws, std::uint64_t seed, bool baselines, const std::string& output_dir,
                     const std::string& which);

}  // namespace condvar::app
