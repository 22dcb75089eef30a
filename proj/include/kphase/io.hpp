#pragma once

// Counts files and CSV tables.
//
// Counts: one nonnegative base-10 integer per line; blank lines and lines
// starting with '#' are ignored. CSV: optional leading '#' comment block,
// one header row, comma-separated rows; reals use 17 significant digits.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kphase/errors.hpp"
#include "kphase/estimation.hpp"

namespace kphase {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Round-trip-exact decimal representation of a double.
inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline CountRecord parse_counts(std::istream& in) {
  CountRecord record;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (text.front() == '-') throw ParseError("negative count '" + std::string(text) + "'", lineno);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw ParseError("not a nonnegative integer: '" + std::string(text) + "'", lineno);
    record.counts.push_back(value);
  }
  if (record.counts.empty()) throw ParseError("counts file contains no data", lineno);
  return record;
}

inline CountRecord load_counts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open counts file '" + path + "'", 0);
  return parse_counts(in);
}

/// Writes comment lines (each prefixed with "# ") followed by one count per line.
inline void write_counts(std::ostream& out, const CountRecord& record,
                         const std::vector<std::string>& comments = {}) {
  for (const auto& c : comments) out << "# " << c << '\n';
  for (auto n : record.counts) out << n << '\n';
}

struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::out_of_range("no CSV column named '" + std::string(name) + "'");
  }

  double number(std::size_t row, std::string_view name) const {
    const std::string& cell = rows.at(row).at(column(name));
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) throw ParseError("not a number: '" + cell + "'", row + 1);
    return v;
  }
};

inline void write_csv(std::ostream& out, const CsvTable& table) {
  for (const auto& c : table.comments) out << "# " << c << '\n';
  auto write_row = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  write_row(table.header);
  for (const auto& r : table.rows) write_row(r);
}

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header && !line.empty() && line.front() == '#') {
      std::string_view body(line);
      body.remove_prefix(1);
      if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      table.comments.emplace_back(body);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
    } else {
      if (cells.size() != table.header.size()) throw ParseError("CSV row width differs from header", lineno);
      table.rows.push_back(std::move(cells));
    }
  }
  if (!have_header) throw ParseError("CSV has no header row", lineno);
  return table;
}

}  // namespace kphase
