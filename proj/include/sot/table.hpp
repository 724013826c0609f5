#ifndef SOT_TABLE_HPP
#define SOT_TABLE_HPP

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace sot {

/// Shortest decimal text that reads back to the same double; "inf", "-inf"
/// and "nan" for the special values.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  // Counts and flags stay in plain integer form ("400000", not "4e+05").
  if (x == std::trunc(x) && std::abs(x) < 1e15) {
    const auto res = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(x));
    return {buf, res.ptr};
  }
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  if (res.ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
  return {buf, res.ptr};
}

/// RFC 4180 field: quoted when it holds a comma, quote, CR or LF.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

/// Numeric table with named columns, written as RFC 4180 CSV (CRLF line
/// ends, header row first).
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) {
      throw std::invalid_argument("Table: row has " + std::to_string(row.size()) +
                                  " cells, expected " + std::to_string(columns.size()));
    }
    rows.push_back(std::move(row));
  }

  void write_csv(std::ostream& os) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      os << (c ? "," : "") << csv_field(columns[c]);
    }
    os << "\r\n";
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_number(row[c]);
      os << "\r\n";
    }
  }

  void write_csv(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_csv(os);
    if (!os) throw std::runtime_error("failed writing " + path);
  }
};

}  // namespace sot

#endif  // SOT_TABLE_HPP
