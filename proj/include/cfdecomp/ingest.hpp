#pragma once

#include "cfdecomp/basis.hpp"
#include "cfdecomp/model.hpp"
#include "cfdecomp/text.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cfdecomp {

/// Column mapping of a microdata CSV file.
struct CsvSchema {
  std::string year_column = "year";
  std::string earnings_column = "earnings";
  std::string hours_column = "hours";
  std::optional<std::string> weekly_hours_column;
  std::optional<std::string> weeks_column;
  std::optional<std::string> weight_column;
  std::vector<std::string> x_columns;
  std::vector<std::string> z_columns;
  /// Keep only rows whose `group_column` equals `group_value`.
  std::optional<std::string> group_column;
  std::optional<double> group_value;
};

/// Raw observations keyed by year, in file order within each year.
using YearObservations = std::map<int, std::vector<Observation>>;

/// Parses CSV text. Throws Error(MissingColumn) for absent mandatory columns
/// and Error(InvalidInput) with "row N:" diagnostics for bad cells or
/// observations violating their invariants. A wage column, if any, is ignored;
/// wages are always earnings / hours.
YearObservations read_csv(std::istream& in, const CsvSchema& schema);
YearObservations read_csv_file(const std::string& path, const CsvSchema& schema);

/// ingest: one YearSample per distinct year.
std::vector<YearSample> ingest(std::istream& in, const CsvSchema& schema,
                               const BasisSpec& basis,
                               std::optional<double> trimming_cap = std::nullopt);

/// Writes observations in the schema's column order. Output of write_csv
/// reads back to identical observations and re-serializes to identical bytes.
void write_csv(std::ostream& out, const YearObservations& data, const CsvSchema& schema);

}  // namespace cfdecomp
