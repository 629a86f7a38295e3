#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "agrostress/error.hpp"

namespace agrostress::csv {

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) fail(ErrorKind::io, "cannot format number");
  return std::string(buf, end);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one line on commas. Double-quoted fields may contain commas.
inline std::vector<std::string> split_line(std::string_view line) {
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
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.emplace_back(trim(cur));
  return out;
}

struct Table {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based line in the file, header is line 1
  std::unordered_map<std::string, std::size_t> column_index;

  std::size_t column(const std::string& name) const {
    auto it = column_index.find(name);
    if (it == column_index.end()) fail(ErrorKind::schema, source + ": missing column '" + name + "'");
    return it->second;
  }

  bool has_column(const std::string& name) const { return column_index.count(name) != 0; }

  void require(const std::vector<std::string>& names) const {
    for (const auto& n : names) column(n);
  }

  std::string where(std::size_t row) const { return source + " line " + std::to_string(line_numbers[row]); }

  const std::string& cell(std::size_t row, std::size_t col) const { return rows[row][col]; }

  double number(std::size_t row, std::size_t col) const {
    const std::string& s = rows[row][col];
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
      fail(ErrorKind::validation, where(row) + ": column '" + header[col] + "' is not a number: '" + s + "'");
    return v;
  }

  long integer(std::size_t row, std::size_t col) const {
    const std::string& s = rows[row][col];
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
      fail(ErrorKind::validation, where(row) + ": column '" + header[col] + "' is not an integer: '" + s + "'");
    return v;
  }
};

inline Table parse(std::istream& in, const std::string& source) {
  Table t;
  t.source = source;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (!have_header) {
      if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      t.header = split_line(line);
      for (std::size_t i = 0; i < t.header.size(); ++i) t.column_index.emplace(t.header[i], i);
      have_header = true;
      continue;
    }
    auto fields = split_line(line);
    if (fields.size() != t.header.size())
      fail(ErrorKind::schema, source + " line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (!have_header) fail(ErrorKind::schema, source + ": missing header row");
  return t;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  return parse(in, path);
}

// Minimal row writer; fields are never quoted because ids are validated to be comma free.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  Writer& field(std::string_view s) {
    sep();
    out_ << s;
    return *this;
  }
  Writer& field(double v) {
    sep();
    out_ << format_double(v);
    return *this;
  }
  Writer& field(long long v) {
    sep();
    out_ << v;
    return *this;
  }
  Writer& field(int v) { return field(static_cast<long long>(v)); }
  Writer& field(std::size_t v) { return field(static_cast<long long>(v)); }
  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace agrostress::csv
