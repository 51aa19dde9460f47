#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "gflow/error.hpp"

namespace gflow::experiments {

/// Shortest round-trip decimal form; identical bytes on every run. Non-finite values become
/// "nan", "inf" and "-inf".
inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, r.ptr};
}

using Cell = std::variant<double, std::int64_t, std::string>;

inline std::string quote_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// RFC-4180-style table: header row, comma separators, LF line endings, '.' decimal point.
class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<Cell> row) {
    if (row.size() != header_.size()) throw std::invalid_argument("csv row width does not match the header");
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return rows_.size(); }

  std::string str() const {
    std::string out;
    write_line(out, header_);
    std::vector<std::string> fields;
    for (const auto& row : rows_) {
      fields.clear();
      for (const auto& c : row) {
        if (const auto* d = std::get_if<double>(&c)) fields.push_back(format_real(*d));
        else if (const auto* i = std::get_if<std::int64_t>(&c)) fields.push_back(std::to_string(*i));
        else fields.push_back(std::get<std::string>(c));
      }
      write_line(out, fields);
    }
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << str();
    if (!os) throw std::runtime_error("failed writing " + path);
  }

private:
  static void write_line(std::string& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += quote_field(fields[i]);
    }
    out += '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

/// Numeric columns read back from CSV text (header plus rows).
struct NumericColumns {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return columns[i];
    throw std::out_of_range("csv has no column '" + name + "'");
  }
  bool has(const std::string& name) const {
    for (const auto& n : names)
      if (n == name) return true;
    return false;
  }
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline double parse_real_field(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw std::invalid_argument("non-numeric csv field '" + s + "'");
  return v;
}

inline NumericColumns parse_numeric_csv(std::string_view text) {
  NumericColumns out;
  std::istringstream is{std::string(text)};
  std::string line;
  if (!std::getline(is, line)) return out;
  out.names = split_csv_line(line);
  out.columns.assign(out.names.size(), {});
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != out.names.size()) throw std::invalid_argument("csv row width does not match the header");
    for (std::size_t i = 0; i < fields.size(); ++i) out.columns[i].push_back(parse_real_field(fields[i]));
  }
  return out;
}

} // namespace gflow::experiments
