#include "cfdecomp/ingest.hpp"

#include "cfdecomp/error.hpp"
#include "cfdecomp/text.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace cfdecomp {

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
  if (begin < end && *begin == '+') ++begin;
  if (begin == end) return false;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

namespace {

std::size_t require_column(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorKind::MissingColumn, "missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::optional<std::size_t> optional_column(const std::vector<std::string>& header,
                                           const std::optional<std::string>& name) {
  if (!name) return std::nullopt;
  return require_column(header, *name);
}

}  // namespace

YearObservations read_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::InvalidInput, "empty CSV input");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);

  const auto year_col = require_column(header, schema.year_column);
  const auto earn_col = require_column(header, schema.earnings_column);
  const auto hours_col = require_column(header, schema.hours_column);
  const auto weekly_col = optional_column(header, schema.weekly_hours_column);
  const auto weeks_col = optional_column(header, schema.weeks_column);
  const auto weight_col = optional_column(header, schema.weight_column);
  const auto group_col = optional_column(header, schema.group_column);
  std::vector<std::size_t> x_cols, z_cols;
  for (const auto& c : schema.x_columns) x_cols.push_back(require_column(header, c));
  for (const auto& c : schema.z_columns) z_cols.push_back(require_column(header, c));

  YearObservations data;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    auto cell = [&](std::size_t col, const std::string& name) {
      if (col >= fields.size())
        throw Error(ErrorKind::InvalidInput, "row " + std::to_string(row) + ": missing cell '" + name + "'");
      double value = 0.0;
      if (!parse_double(fields[col], value) || !std::isfinite(value))
        throw Error(ErrorKind::InvalidInput, "row " + std::to_string(row) + ": non-numeric cell '" + name +
                                                 "' = '" + fields[col] + "'");
      return value;
    };
    if (group_col && schema.group_value && cell(*group_col, *schema.group_column) != *schema.group_value)
      continue;
    const double year = cell(year_col, schema.year_column);
    if (year != std::floor(year))
      throw Error(ErrorKind::InvalidInput, "row " + std::to_string(row) + ": year is not an integer");
    const double earnings = cell(earn_col, schema.earnings_column);
    const double hours = cell(hours_col, schema.hours_column);
    if (earnings < 0.0) throw Error(ErrorKind::InvalidInput, "row " + std::to_string(row) + ": negative earnings");
    if (hours < 0.0) throw Error(ErrorKind::InvalidInput, "row " + std::to_string(row) + ": negative hours");
    std::vector<double> x, z;
    for (std::size_t k = 0; k < x_cols.size(); ++k) x.push_back(cell(x_cols[k], schema.x_columns[k]));
    for (std::size_t k = 0; k < z_cols.size(); ++k) z.push_back(cell(z_cols[k], schema.z_columns[k]));
    std::optional<double> weekly, weeks;
    if (weekly_col) weekly = cell(*weekly_col, *schema.weekly_hours_column);
    if (weeks_col) weeks = cell(*weeks_col, *schema.weeks_column);
    const double weight = weight_col ? cell(*weight_col, *schema.weight_column) : 1.0;
    try {
      data[static_cast<int>(year)].push_back(
          make_observation(earnings, hours, std::move(x), std::move(z), weight, weekly, weeks));
    } catch (const Error& e) {
      throw Error(e.kind(), "row " + std::to_string(row) + ": " + e.what());
    }
  }
  return data;
}

YearObservations read_csv_file(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return read_csv(in, schema);
}

std::vector<YearSample> ingest(std::istream& in, const CsvSchema& schema, const BasisSpec& basis,
                               std::optional<double> trimming_cap) {
  auto data = read_csv(in, schema);
  std::vector<YearSample> samples;
  for (auto& [year, obs] : data) samples.push_back(make_year_sample(year, std::move(obs), basis, trimming_cap));
  return samples;
}

void write_csv(std::ostream& out, const YearObservations& data, const CsvSchema& schema) {
  out << schema.year_column << ',' << schema.earnings_column << ',' << schema.hours_column;
  if (schema.weekly_hours_column) out << ',' << *schema.weekly_hours_column;
  if (schema.weeks_column) out << ',' << *schema.weeks_column;
  for (const auto& c : schema.x_columns) out << ',' << c;
  for (const auto& c : schema.z_columns) out << ',' << c;
  if (schema.weight_column) out << ',' << *schema.weight_column;
  out << '\n';
  for (const auto& [year, obs] : data) {
    for (const auto& o : obs) {
      out << year << ',' << format_double(o.earnings) << ',' << format_double(o.hours);
      if (schema.weekly_hours_column) out << ',' << format_double(o.weekly_hours.value_or(0.0));
      if (schema.weeks_column) out << ',' << format_double(o.weeks.value_or(0.0));
      for (double v : o.x) out << ',' << format_double(v);
      for (double v : o.z) out << ',' << format_double(v);
      if (schema.weight_column) out << ',' << format_double(o.weight);
      out << '\n';
    }
  }
}

}  // namespace cfdecomp
