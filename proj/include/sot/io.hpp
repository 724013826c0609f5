#ifndef SOT_IO_HPP
#define SOT_IO_HPP

// Text formats used by the command-line tool.
//
// Marginal file: one weight per line, optionally followed by a support
// coordinate; fields separated by whitespace or a comma; '#' starts a
// comment. Cost file: dense CSV, "inf" marks a blocked entry.

#include <sot/core.hpp>
#include <sot/table.hpp>

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace sot {

/// Input file that could not be parsed; what() names the file and line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Whole-token double parse; accepts "inf", "+inf" and "-inf" in any case.
inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return x;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const auto b = line.find_first_not_of(" \t,", pos);
    if (b == std::string_view::npos) break;
    auto e = line.find_first_of(" \t,", b);
    if (e == std::string_view::npos) e = line.size();
    out.push_back(line.substr(b, e - b));
    pos = e;
  }
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open");
  return in;
}

}  // namespace detail

/// Parses a real given on the command line or in a file; "inf" allowed.
inline double parse_real(const std::string& text, const std::string& what) {
  const auto x = detail::parse_double(text);
  if (!x) throw std::invalid_argument(what + ": '" + text + "' is not a number");
  return *x;
}

inline Marginal parse_marginal(std::istream& in, const std::string& name) {
  std::vector<double> w;
  std::vector<double> x;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = line;
    if (lineno == 1 && body.substr(0, 3) == "\xEF\xBB\xBF") body.remove_prefix(3);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    const auto fields = detail::split_fields(body);
    if (fields.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno) + ": ";
    if (fields.size() > 2) throw ParseError(where + "expected 'weight [coordinate]'");
    const auto weight = detail::parse_double(fields[0]);
    if (!weight || !std::isfinite(*weight) || *weight < 0.0) {
      throw ParseError(where + "weight must be a nonnegative finite number");
    }
    w.push_back(*weight);
    if (fields.size() == 2) {
      const auto coord = detail::parse_double(fields[1]);
      if (!coord || !std::isfinite(*coord)) throw ParseError(where + "coordinate is not a finite number");
      x.push_back(*coord);
    }
    if (!x.empty() && x.size() != w.size()) {
      throw ParseError(where + "either every line or no line carries a coordinate");
    }
  }
  if (w.empty()) throw ParseError(name + ": no weights");
  Vector weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  if (x.empty()) return Marginal(std::move(weights));
  Matrix support = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
  return Marginal(std::move(weights), std::move(support));
}

inline Marginal read_marginal(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_marginal(in, path);
}

inline CostMatrix parse_cost_csv(std::istream& in, const std::string& name) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (true) {
      const auto comma = body.find(',', pos);
      const auto field = body.substr(pos, comma == std::string_view::npos ? body.npos : comma - pos);
      const auto c = detail::parse_double(field);
      if (!c || std::isnan(*c) || *c == -kInf) {
        throw ParseError(name + ":" + std::to_string(lineno) + ": bad cost entry '" +
                         std::string(detail::trim(field)) + "'");
      }
      row.push_back(*c);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(name + ":" + std::to_string(lineno) + ": row has " +
                       std::to_string(row.size()) + " entries, expected " +
                       std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(name + ": empty cost matrix");
  Matrix c(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  try {
    return CostMatrix(std::move(c));
  } catch (const std::invalid_argument& e) {
    throw ParseError(name + ": " + e.what());
  }
}

inline CostMatrix read_cost_csv(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_cost_csv(in, path);
}

/// Dense CSV without header, shortest round-trip formatting, LF line ends.
inline void write_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_number(m(i, j));
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing " + path);
}

}  // namespace sot

#endif  // SOT_IO_HPP
