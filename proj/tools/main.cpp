// condvar: estimate a Bayesian VAR, produce conditional forecasts, time samplers.

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "condvar/app/run_forecast.hpp"
#include "condvar/error.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

int report_error(std::string_view code, const std::string& message, int exit_code) {
  const nlohmann::json record{{"error", code}, {"message", message}, {"exit_code", exit_code}};
  std::cerr << record.dump() << '\n';
  return exit_code;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<condvar::Index> draws;
  std::optional<condvar::Index> burn_in;
  std::optional<int> threads;
  std::optional<std::string> irf;

  void apply(condvar::app::RunConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (draws) cfg.draws = *draws;
    if (burn_in) cfg.burn_in = *burn_in;
    if (threads) cfg.threads = *threads;
    if (irf) cfg.impulse = condvar::app::ImpulseRequest{*irf, 1.0, cfg.impulse ? cfg.impulse->horizon : 12};
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian VAR conditional forecasting"};
  app.require_subcommand(1);

  std::string config_path;
  std::string data_path;
  std::string scenario_path;
  std::string output_dir = "out";
  Overrides ov;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", ov.seed, "random seed");
    sub->add_option("--draws", ov.draws, "parameter draws (forecast) or draws per cell (bench)");
    sub->add_option("--output-dir", output_dir, "directory for output files");
  };

  CLI::App* est = app.add_subcommand("estimate", "estimate the VAR and write estimate.json");
  add_common(est);
  est->add_option("--data", data_path, "FRED-QD style CSV")->required();
  est->add_option("--burn-in", ov.burn_in, "Gibbs burn-in");

  CLI::App* fc = app.add_subcommand("forecast", "unconditional and conditional forecasts");
  add_common(fc);
  fc->add_option("--data", data_path, "FRED-QD style CSV")->required();
  fc->add_option("--scenario", scenario_path, "scenario file")->check(CLI::ExistingFile);
  fc->add_option("--burn-in", ov.burn_in, "Gibbs burn-in");
  fc->add_option("--threads", ov.threads, "worker threads over parameter draws");
  fc->add_option("--irf", ov.irf, "variable raised by one unit at the first forecast step");

  std::string suite = "all";
  bool no_baselines = false;
  CLI::App* bench = app.add_subcommand("bench", "sampler timing tables");
  add_common(bench);
  bench->add_option("--suite", suite, "all, equality or inequality");
  bench->add_flag("--no-baselines", no_baselines, "time only the precision sampler");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("UsageError", e.what(), kExitValidation);
  }

  try {
    condvar::app::RunConfig cfg = config_path.empty() ? condvar::app::RunConfig{} : condvar::app::load_config(config_path);
    condvar::app::RunSummary summary;
    if (*est) {
      ov.apply(cfg);
      summary = condvar::app::run_estimate(cfg, data_path, output_dir);
    } else if (*fc) {
      // scenario settings sit between the config file and the flags
      ov.apply(cfg);
      std::optional<std::string> scenario;
      if (!scenario_path.empty()) {
        scenario = scenario_path;
        condvar::app::ScenarioFile s = condvar::app::parse_scenario(scenario_path);
        condvar::app::apply_settings(cfg, s.settings);
        ov.apply(cfg);
      }
      summary = condvar::app::run_forecast(cfg, data_path, scenario, output_dir);
    } else {
      summary = condvar::app::run_bench(ov.draws.value_or(1000), ov.seed.value_or(2024), !no_baselines, output_dir, suite);
    }
    for (const auto& f : summary.files) std::cout << output_dir << '/' << f << '\n';
    if (summary.violations > 0) std::cout << "constraint violations: " << summary.violations << '\n';
    return 0;
  } catch (const condvar::Error& e) {
    return report_error(condvar::to_string(e.code()), e.detail(),
                        condvar::is_validation_error(e.code()) ? kExitValidation : kExitNumerical);
  } catch (const std::exception& e) {
    return report_error("InternalError", e.what(), kExitNumerical);
  }
}
