#include "condvar/app/ingest.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "condvar/error.hpp"

namespace condvar::app {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

std::optional<int> to_int(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<Quarter> from_year_month(std::optional<int> year, std::optional<int> month) {
  if (!year || !month || *month < 1 || *month > 12) return std::nullopt;
  return Quarter{*year, (*month - 1) / 3 + 1};
}

// Splits one CSV line; quoted fields may contain commas.
std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(std::string(trim(cur)));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(std::string(trim(cur)));
  return out;
}

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "." || cell == "#N/A";
}

}  // namespace

std::optional<Quarter> Quarter::try_parse(std::string_view text) {
  text = trim(text);
  if (const auto qpos = text.find_first_of("Qq"); qpos != std::string_view::npos) {
    const auto year = to_int(text.substr(0, qpos));
    const auto q = to_int(text.substr(qpos + 1));
    if (!year || !q || *q < 1 || *q > 4) return std::nullopt;
    return Quarter{*year, *q};
  }
  if (const auto dash = text.find('-'); dash != std::string_view::npos) {
    const auto rest = text.substr(dash + 1);
    const auto dash2 = rest.find('-');
    if (dash2 == std::string_view::npos) return std::nullopt;
    if (!to_int(rest.substr(dash2 + 1))) return std::nullopt;
    return from_year_month(to_int(text.substr(0, dash)), to_int(rest.substr(0, dash2)));
  }
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const auto rest = text.substr(slash + 1);
    const auto slash2 = rest.find('/');
    if (slash2 == std::string_view::npos) return std::nullopt;
    if (!to_int(rest.substr(0, slash2))) return std::nullopt;
    return from_year_month(to_int(rest.substr(slash2 + 1)), to_int(text.substr(0, slash)));
  }
  return std::nullopt;
}

Quarter Quarter::parse(std::string_view text) {
  const auto q = try_parse(text);
  require(q.has_value(), ErrorCode::ParseError, "not a date: '" + std::string(text) + "'");
  return *q;
}

Quarter Quarter::from_index(int idx) {
  const int year = idx >= 0 ? idx / 4 : -((-idx + 3) / 4);
  return Quarter{year, idx - year * 4 + 1};
}

std::string Quarter::str() const { return std::to_string(year) + "Q" + std::to_string(q); }

Transform parse_transform(std::string_view text) {
  if (text == "level") return Transform::Level;
  if (text == "log" || text == "100ln" || text == "log100") return Transform::Log100;
  throw Error(ErrorCode::ParseError, "unknown transformation '" + std::string(text) + "' (use level or log)");
}

std::string to_string(Transform t) { return t == Transform::Level ? "level" : "log"; }

std::vector<SeriesSpec> default_macro_panel() {
  const auto log = Transform::Log100;
  const auto lvl = Transform::Level;
  const std::pair<const char*, Transform> rows[] = {
      {"GDPC1", log},    {"PCECC96", log},  {"PRFIx", log},          {"PNFIx", log},
      {"EXPGSC1", log},  {"IMPGSC1", log},  {"GCEC1", log},          {"B823RA3Q086SBEA", log},
      {"GDPCTPI", log},  {"PPIACO", log},   {"PCEPILFE", log},       {"CPIAUCSL", log},
      {"CPILFESL", log}, {"RCPHBS", log},   {"PAYEMS", log},         {"UNRATE", lvl},
      {"INDPRO", log},   {"CUMFNS", log},   {"HOUST", log},          {"DPIC96", log},
      {"UMCSENTx", lvl}, {"GS1", lvl},      {"GS10", lvl},           {"AAA", lvl},
      {"BAA", lvl},      {"TWEXAFEGSMTHx", log}, {"S&P 500", log},   {"VIXCLSx", lvl},
      {"PCECTPI", log},  {"OILPRICEx", log}, {"FEDFUNDS", lvl},
  };
  std::vector<SeriesSpec> out;
  for (const auto& [mnemonic, t] : rows) out.push_back({mnemonic, mnemonic, t});
  return out;
}

std::optional<Eigen::Index> Dataset::column(std::string_view name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return static_cast<Eigen::Index>(j);
  }
  return std::nullopt;
}

Dataset ingest_text(std::string_view csv_text, const std::vector<SeriesSpec>& specs, std::optional<Quarter> first,
                    std::optional<Quarter> last) {
  require(!specs.empty(), ErrorCode::InvalidArgument, "no series requested");
  std::istringstream in{std::string(csv_text)};
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::ParseError, "empty CSV file");
  const std::vector<std::string> header = split_csv(line);

  std::vector<std::size_t> cols;
  for (const auto& s : specs) {
    require(!s.mnemonic.empty(), ErrorCode::InvalidArgument, "series '" + s.name + "' has no mnemonic");
    std::size_t found = header.size();
    for (std::size_t j = 1; j < header.size(); ++j) {
      if (header[j] == s.mnemonic) found = j;
    }
    require(found < header.size(), ErrorCode::MissingColumn, "column '" + s.mnemonic + "' not found");
    cols.push_back(found);
  }

  Dataset d;
  for (const auto& s : specs) d.names.push_back(s.name);
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    // metadata rows such as "factors" or "transform" carry no date
    const auto date = Quarter::try_parse(cells.front());
    if (!date) continue;
    if ((first && *date < *first) || (last && *date > *last)) continue;
    if (!d.dates.empty()) {
      require(date->index() == d.dates.back().index() + 1, ErrorCode::ParseError,
              "line " + std::to_string(line_no) + ": dates must be consecutive ascending quarters");
    }
    std::vector<double> row;
    for (std::size_t k = 0; k < specs.size(); ++k) {
      const std::string_view cell = cols[k] < cells.size() ? std::string_view(cells[cols[k]]) : std::string_view();
      const std::string where = "row " + date->str() + " (line " + std::to_string(line_no) + "), column '" +
                                specs[k].mnemonic + "'";
      require(!is_missing(cell), ErrorCode::MissingValue, "missing value at " + where);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      require(ec == std::errc() && ptr == cell.data() + cell.size(), ErrorCode::ParseError,
              "not a number at " + where + ": '" + std::string(cell) + "'");
      if (specs[k].transform == Transform::Log100) {
        require(v > 0.0, ErrorCode::NonPositiveForLog, "non-positive value for log transform at " + where);
        v = 100.0 * std::log(v);
      }
      row.push_back(v);
    }
    d.dates.push_back(*date);
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::InsufficientData, "no data rows in the requested date range");
  if (first) {
    require(d.dates.front() == *first, ErrorCode::MissingValue, "data start after " + first->str());
  }
  if (last) {
    require(d.dates.back() == *last, ErrorCode::MissingValue, "data end before " + last->str());
  }
  d.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(specs.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < specs.size(); ++j) d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return d;
}

Dataset ingest(const std::string& csv_path, const std::vector<SeriesSpec>& specs, std::optional<Quarter> first,
               std::optional<Quarter> last) {
  std::ifstream in(csv_path);
  require(in.good(), ErrorCode::InvalidArgument, "cannot open data file '" + csv_path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return ingest_text(buf.str(), specs, first, last);
}

}  // namespace condvar::app
