#pragma once

#include <string>
#include <vector>

namespace cfdecomp {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Parses a whole field as a double; false on any trailing text.
bool parse_double(const std::string& text, double& out);

/// Splits one CSV record; handles double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace cfdecomp
