#pragma once

// Quarterly data ingestion from FRED-QD style CSV files.

#include <Eigen/Dense>

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace condvar::app {

struct Quarter {
  int year = 2000;
  int q = 1;  // 1..4

  /// Accepts 2020Q1, 2020-01-01 and 1/1/2020; months map to their quarter.
  static Quarter parse(std::string_view text);
  static std::optional<Quarter> try_parse(std::string_view text);

  [[nodiscard]] int index() const { return year * 4 + (q - 1); }
  [[nodiscard]] static Quarter from_index(int idx);
  [[nodiscard]] Quarter plus(int quarters) const { return from_index(index() + quarters); }
  [[nodiscard]] std::string str() const;

  friend auto operator<=>(const Quarter& a, const Quarter& b) { return a.index() <=> b.index(); }
  friend bool operator==(const Quarter& a, const Quarter& b) { return a.index() == b.index(); }
};

enum class Transform { Level, Log100 };

Transform parse_transform(std::string_view text);
std::string to_string(Transform t);

struct SeriesSpec {
  std::string name;      // label used in scenarios and outputs
  std::string mnemonic;  // CSV column
  Transform transform = Transform::Level;
};

/// The 31-series macro-financial panel with its transformation schedule.
std::vector<SeriesSpec> default_macro_panel();

struct Dataset {
  Eigen::MatrixXd values;  // rows are quarters, ascending
  std::vector<std::string> names;
  std::vector<Quarter> dates;

  [[nodiscard]] Eigen::Index n() const { return static_cast<Eigen::Index>(names.size()); }
  [[nodiscard]] std::optional<Eigen::Index> column(std::string_view name) const;
};

/// Reads the CSV, keeps rows whose first cell is a date inside [first, last]
/// and applies the per-series transformation. Rows must be consecutive quarters.
Dataset ingest(const std::string& csv_path, const std::vector<SeriesSpec>& specs,
               std::optional<Quarter> first = std::nullopt, std::optional<Quarter> last = std::nullopt);

Dataset ingest_text(std::string_view csv_text, const std::vector<SeriesSpec>& specs,
                    std::optional<Quarter> first = std::nullopt, std::optional<Quarter> last = std::nullopt);

}  // namespace condvar::app
