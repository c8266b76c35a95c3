#pragma once

// Scenario files: constraint grids keyed by variable name and quarter.
//
//   # comment
//   start = 2020Q1
//   horizon = 13
//   [equality]
//   UNRATE 2020Q1 3.60
//   [inequality]
//   CPI 2020Q1 1.69 2.71
//   [shock]
//   GDPC1 2020Q1 0.5 0.25        # mean and variance of that structural shock
//   [nondriving]
//   GS10                          # every date of the horizon
//   UNRATE 2020Q2                 # a single date
//   [settings]
//   draws = 500
//
// `horizon` defaults to the last quarter referenced anywhere in the file.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "condvar/app/ingest.hpp"
#include "condvar/conditional.hpp"

namespace condvar::app {

struct EqualityRow {
  std::string variable;
  Quarter date;
  double value = 0.0;
};

struct InequalityRow {
  std::string variable;
  Quarter date;
  double lower = 0.0;
  double upper = 0.0;
};

struct ShockRow {
  std::string variable;
  Quarter date;
  double mean = 0.0;
  double variance = 0.0;
};

struct NondrivingRow {
  std::string variable;
  std::optional<Quarter> date;  // empty: the whole horizon
};

struct ScenarioFile {
  std::optional<Quarter> start;
  int horizon = 0;  // 0 when the file has no rows and no explicit horizon
  std::vector<EqualityRow> equality;
  std::vector<InequalityRow> inequality;
  std::vector<ShockRow> shocks;
  std::vector<NondrivingRow> nondriving;
  std::map<std::string, std::string> settings;

  [[nodiscard]] bool empty() const {
    return equality.empty() && inequality.empty() && shocks.empty() && nondriving.empty();
  }
  [[nodiscard]] std::vector<Quarter> dates() const;
};

ScenarioFile parse_scenario_text(std::string_view text);
ScenarioFile parse_scenario(const std::string& path);

/// Canonical text form; parsing it yields the same scenario.
std::string format_scenario(const ScenarioFile& s);

/// Maps (variable, date) cells to stacked coordinates step * n + variable.
/// `forecast_start` is the first forecast quarter; the scenario's own start,
/// if given, must agree with it.
ConstraintSet to_constraints(const ScenarioFile& s, const std::vector<std::string>& variables,
                             const Quarter& forecast_start, int horizon);

}  // namespace condvar::app
