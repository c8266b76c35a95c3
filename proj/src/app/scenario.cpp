#include "condvar/app/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "condvar/error.hpp"

namespace condvar::app {

namespace {

enum class Section { Top, Equality, Inequality, Shock, Nondriving, Settings };

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t j = s.find_first_of(" \t", i);
    const std::size_t end = j == std::string_view::npos ? s.size() : j;
    if (end > i) out.push_back(s.substr(i, end - i));
    i = end;
  }
  return out;
}

[[noreturn]] void fail(int line_no, const std::string& msg) {
  throw Error(ErrorCode::ParseError, "scenario line " + std::to_string(line_no) + ": " + msg);
}

double number(std::string_view tok, int line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) fail(line_no, "not a number: '" + std::string(tok) + "'");
  return v;
}

Quarter date(std::string_view tok, int line_no) {
  const auto q = Quarter::try_parse(tok);
  if (!q) fail(line_no, "not a quarter: '" + std::string(tok) + "'");
  return *q;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Variable names may contain spaces ("S&P 500"); the trailing tokens are
/// the date and numbers, everything before them is the name.
std::string join_name(const std::vector<std::string_view>& toks, std::size_t count) {
  std::string name;
  for (std::size_t k = 0; k < count; ++k) {
    if (k) name += ' ';
    name += toks[k];
  }
  return name;
}

}  // namespace

std::vector<Quarter> ScenarioFile::dates() const {
  std::vector<Quarter> out;
  if (!start) return out;
  for (int k = 0; k < horizon; ++k) out.push_back(start->plus(k));
  return out;
}

ScenarioFile parse_scenario_text(std::string_view text) {
  ScenarioFile s;
  std::optional<int> explicit_horizon;
  Section section = Section::Top;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  std::vector<Quarter> seen_dates;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      const std::string_view name = trim(line.substr(1, line.size() - 2));
      if (name == "equality") section = Section::Equality;
      else if (name == "inequality") section = Section::Inequality;
      else if (name == "shock") section = Section::Shock;
      else if (name == "nondriving") section = Section::Nondriving;
      else if (name == "settings") section = Section::Settings;
      else fail(line_no, "unknown section [" + std::string(name) + "]");
      continue;
    }

    if (section == Section::Top || section == Section::Settings) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) fail(line_no, "expected key = value");
      const std::string key(trim(line.substr(0, eq)));
      const std::string value(trim(line.substr(eq + 1)));
      if (key.empty()) fail(line_no, "empty key");
      if (section == Section::Settings) {
        s.settings[key] = value;
      } else if (key == "start") {
        s.start = date(value, line_no);
      } else if (key == "horizon") {
        const double h = number(value, line_no);
        if (h < 1 || h != static_cast<int>(h)) fail(line_no, "horizon must be a positive integer");
        explicit_horizon = static_cast<int>(h);
      } else {
        fail(line_no, "unknown key '" + key + "'");
      }
      continue;
    }

    const auto toks = tokens(line);
    switch (section) {
      case Section::Equality: {
        if (toks.size() < 3) fail(line_no, "expected: VARIABLE DATE VALUE");
        const std::size_t k = toks.size() - 2;
        s.equality.push_back({join_name(toks, k), date(toks[k], line_no), number(toks[k + 1], line_no)});
        seen_dates.push_back(s.equality.back().date);
        break;
      }
      case Section::Inequality: {
        if (toks.size() < 4) fail(line_no, "expected: VARIABLE DATE LOWER UPPER");
        const std::size_t k = toks.size() - 3;
        InequalityRow row{join_name(toks, k), date(toks[k], line_no), number(toks[k + 1], line_no),
                          number(toks[k + 2], line_no)};
        require(row.lower < row.upper, ErrorCode::InvalidArgument,
                "scenario line " + std::to_string(line_no) + ": lower bound must be below the upper bound");
        s.inequality.push_back(std::move(row));
        seen_dates.push_back(s.inequality.back().date);
        break;
      }
      case Section::Shock: {
        if (toks.size() < 4) fail(line_no, "expected: VARIABLE DATE MEAN VARIANCE");
        const std::size_t k = toks.size() - 3;
        ShockRow row{join_name(toks, k), date(toks[k], line_no), number(toks[k + 1], line_no),
                     number(toks[k + 2], line_no)};
        require(row.variance >= 0.0, ErrorCode::InvalidArgument,
                "scenario line " + std::to_string(line_no) + ": shock variance must be >= 0");
        s.shocks.push_back(std::move(row));
        seen_dates.push_back(s.shocks.back().date);
        break;
      }
      case Section::Nondriving: {
        const auto last = Quarter::try_parse(toks.back());
        if (last && toks.size() >= 2) {
          s.nondriving.push_back({join_name(toks, toks.size() - 1), last});
          seen_dates.push_back(*last);
        } else {
          s.nondriving.push_back({join_name(toks, toks.size()), std::nullopt});
        }
        break;
      }
      default:
        break;
    }
  }

  if (!seen_dates.empty()) {
    const Quarter first = *std::min_element(seen_dates.begin(), seen_dates.end());
    const Quarter last = *std::max_element(seen_dates.begin(), seen_dates.end());
    if (!s.start) s.start = first;
    require(first >= *s.start, ErrorCode::DateOutsideHorizon,
            "date " + first.str() + " precedes the scenario start " + s.start->str());
    const int span = last.index() - s.start->index() + 1;
    if (explicit_horizon) {
      require(span <= *explicit_horizon, ErrorCode::DateOutsideHorizon,
              "date " + last.str() + " lies beyond the scenario horizon");
    }
    s.horizon = explicit_horizon.value_or(span);
  } else {
    s.horizon = explicit_horizon.value_or(0);
  }

  // one constraint per (variable, date) cell
  std::set<std::pair<std::string, int>> eq_cells;
  for (const auto& r : s.equality) {
    require(eq_cells.insert({r.variable, r.date.index()}).second, ErrorCode::ParseError,
            "duplicate equality for " + r.variable + " at " + r.date.str());
  }
  std::set<std::pair<std::string, int>> ineq_cells;
  for (const auto& r : s.inequality) {
    require(ineq_cells.insert({r.variable, r.date.index()}).second, ErrorCode::ParseError,
            "duplicate inequality for " + r.variable + " at " + r.date.str());
    require(!eq_cells.contains({r.variable, r.date.index()}), ErrorCode::OverlapEqualityInequality,
            r.variable + " at " + r.date.str() + " has both an equality and an inequality");
  }
  return s;
}

ScenarioFile parse_scenario(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::InvalidArgument, "cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

std::string format_scenario(const ScenarioFile& s) {
  std::ostringstream out;
  if (s.start) out << "start = " << s.start->str() << '\n';
  if (s.horizon > 0) out << "horizon = " << s.horizon << '\n';
  if (!s.equality.empty()) {
    out << "[equality]\n";
    for (const auto& r : s.equality) out << r.variable << ' ' << r.date.str() << ' ' << fmt(r.value) << '\n';
  }
  if (!s.inequality.empty()) {
    out << "[inequality]\n";
    for (const auto& r : s.inequality) {
      out << r.variable << ' ' << r.date.str() << ' ' << fmt(r.lower) << ' ' << fmt(r.upper) << '\n';
    }
  }
  if (!s.shocks.empty()) {
    out << "[shock]\n";
    for (const auto& r : s.shocks) {
      out << r.variable << ' ' << r.date.str() << ' ' << fmt(r.mean) << ' ' << fmt(r.variance) << '\n';
    }
  }
  if (!s.nondriving.empty()) {
    out << "[nondriving]\n";
    for (const auto& r : s.nondriving) {
      out << r.variable;
      if (r.date) out << ' ' << r.date->str();
      out << '\n';
    }
  }
  if (!s.settings.empty()) {
    out << "[settings]\n";
    for (const auto& [k, v] : s.settings) out << k << " = " << v << '\n';
  }
  return out.str();
}

ConstraintSet to_constraints(const ScenarioFile& s, const std::vector<std::string>& variables,
                             const Quarter& forecast_start, int horizon) {
  require(horizon >= 1, ErrorCode::InvalidArgument, "forecast horizon must be >= 1");
  if (s.start && !s.empty()) {
    require(*s.start == forecast_start, ErrorCode::DateOutsideHorizon,
            "scenario starts at " + s.start->str() + " but forecasts start at " + forecast_start.str());
  }
  const Index n = static_cast<Index>(variables.size());
  const Index nh = n * horizon;
  auto var_index = [&](const std::string& name) -> Index {
    const auto it = std::find(variables.begin(), variables.end(), name);
    require(it != variables.end(), ErrorCode::UnknownVariable, "unknown variable '" + name + "'");
    return static_cast<Index>(it - variables.begin());
  };
  auto step_of = [&](const Quarter& q) -> Index {
    const int step = q.index() - forecast_start.index();
    require(step >= 0 && step < horizon, ErrorCode::DateOutsideHorizon,
            "date " + q.str() + " outside the forecast horizon " + forecast_start.str() + ".." +
                forecast_start.plus(horizon - 1).str());
    return step;
  };

  ConstraintSet cs;
  if (!s.equality.empty()) {
    std::vector<Index> coords;
    Eigen::VectorXd values(static_cast<Index>(s.equality.size()));
    for (std::size_t k = 0; k < s.equality.size(); ++k) {
      const auto& r = s.equality[k];
      coords.push_back(step_of(r.date) * n + var_index(r.variable));
      values(static_cast<Index>(k)) = r.value;
    }
    cs.equality = EqualityConstraints{SelectionMatrix(nh, std::move(coords)), values};
  }
  if (!s.inequality.empty()) {
    std::vector<Index> coords;
    const Index m = static_cast<Index>(s.inequality.size());
    Eigen::VectorXd lo(m);
    Eigen::VectorXd hi(m);
    for (Index k = 0; k < m; ++k) {
      const auto& r = s.inequality[static_cast<std::size_t>(k)];
      coords.push_back(step_of(r.date) * n + var_index(r.variable));
      lo(k) = r.lower;
      hi(k) = r.upper;
    }
    cs.inequality = InequalityConstraints{SelectionMatrix(nh, std::move(coords)), lo, hi};
  }
  if (!s.shocks.empty()) {
    const Index m = static_cast<Index>(s.shocks.size());
    ShockRestrictions sh;
    sh.matrix = Eigen::MatrixXd::Zero(m, nh);
    sh.mean.resize(m);
    sh.cov = Eigen::MatrixXd::Zero(m, m);
    for (Index k = 0; k < m; ++k) {
      const auto& r = s.shocks[static_cast<std::size_t>(k)];
      sh.matrix(k, step_of(r.date) * n + var_index(r.variable)) = 1.0;
      sh.mean(k) = r.mean;
      sh.cov(k, k) = r.variance;
    }
    cs.shocks = std::move(sh);
  }
  if (!s.nondriving.empty()) {
    std::vector<Index> coords;
    for (const auto& r : s.nondriving) {
      const Index var = var_index(r.variable);
      if (r.date) {
        coords.push_back(step_of(*r.date) * n + var);
      } else {
        for (Index step = 0; step < horizon; ++step) coords.push_back(step * n + var);
      }
    }
    cs.scenario_nondriving = SelectionMatrix(nh, std::move(coords));
  }
  cs.validate(nh);
  return cs;
}

}  // namespace condvar::app
