#pragma once

// Numeric CSV with a header row. '.' decimal point, no locale dependence.

#include <iosfwd>
#include <string>
#include <vector>

#include "engression/nd_core.hpp"

namespace engression {

struct CsvTable {
  std::vector<std::string> header;
  Matrix data;

  /// Index of the named column; FormatError when absent.
  std::size_t column(const std::string& name) const;
};

/// Parse errors name the 1-based line and the column header.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

/// Shortest round-trip representation of each value.
void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& data);
void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& data);

std::string format_double(double v);

}  // namespace engression
