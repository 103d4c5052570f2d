#include "engression/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "engression/errors.hpp"

namespace engression {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw FormatError("csv: no column named '" + name + "'");
}

CsvTable parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  CsvTable table;
  if (!std::getline(in, line)) throw FormatError("csv: missing header row");
  for (auto& h : split_line(line)) table.header.push_back(trim(h));
  const std::size_t cols = table.header.size();
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != cols)
      throw FormatError("csv: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                        " fields, expected " + std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string cell = trim(cells[c]);
      double v = 0.0;
      const char* first = cell.data();
      const char* last = first + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (cell.empty() || ec != std::errc() || ptr != last)
        throw FormatError("csv: line " + std::to_string(line_no) + ", column '" + table.header[c] +
                          "': not a number: '" + cell + "'");
      values.push_back(v);
    }
    ++rows;
  }
  table.data = Matrix(rows, cols, std::move(values));
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("csv: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& data) {
  if (header.size() != data.cols()) throw ShapeError("csv: header width differs from data");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < data.cols(); ++c) out << (c ? "," : "") << format_double(data(r, c));
    out << '\n';
  }
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("csv: cannot write '" + path + "'");
  write_csv(out, header, data);
  if (!out) throw FormatError("csv: write failed for '" + path + "'");
}

}  // namespace engression
