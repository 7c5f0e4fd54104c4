#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "quakesr/core/errors.hpp"

namespace quakesr::io {

namespace fs = std::filesystem;

/// Shortest text that parses back to the same double. Non-finite values are written as
/// "nan", "inf" and "-inf".
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

inline double parse_double(std::string_view s, std::string_view where) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw InputError(std::string(where) + ": '" + std::string(s) + "' is not a number");
  return v;
}

inline std::int64_t parse_int(std::string_view s, std::string_view where) {
  std::int64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw InputError(std::string(where) + ": '" + std::string(s) + "' is not an integer");
  return v;
}

/// Comma-separated rows; fields never contain commas, quotes or newlines.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t column(std::string_view name, std::string_view where) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw InputError(std::string(where) + ": missing column '" + std::string(name) + "'");
  }
};

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

inline Table read_table(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw InputError(path.string() + ": empty file, expected a header row");
  Table t;
  t.header = split_line(lines[0]);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto row = split_line(lines[i]);
    if (row.size() != t.header.size())
      throw InputError(path.string() + ": line " + std::to_string(i + 1) + " has " + std::to_string(row.size()) +
                       " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void check_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") != std::string_view::npos)
    throw InputError("value '" + std::string(s) + "' cannot be written to CSV");
}

/// Writes through a temporary file and renames, so readers never see a partial file.
inline void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(tmp.string() + ": cannot open for writing");
    out << text;
    if (!out) throw Error(tmp.string() + ": write failed");
  }
  fs::rename(tmp, path);
}

inline void write_table(const fs::path& path, const Table& t) {
  std::ostringstream os;
  auto put = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      check_field(row[i]);
      if (i) os << ',';
      os << row[i];
    }
    os << '\n';
  };
  put(t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw Error(path.string() + ": row width differs from header");
    put(r);
  }
  write_text_atomic(path, os.str());
}

/// Grid layer stored as a headerless rows x cols matrix.
inline void write_matrix(const fs::path& path, int rows, int cols, const std::vector<double>& values) {
  if (values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw Error(path.string() + ": matrix size does not match its shape");
  std::ostringstream os;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c) os << ',';
      os << format_double(values[static_cast<std::size_t>(r * cols + c)]);
    }
    os << '\n';
  }
  write_text_atomic(path, os.str());
}

inline std::vector<double> read_matrix(const fs::path& path, int rows, int cols) {
  const auto lines = read_lines(path);
  if (lines.size() != static_cast<std::size_t>(rows))
    throw InputError(path.string() + ": expected " + std::to_string(rows) + " rows, found " +
                     std::to_string(lines.size()));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto fields = split_line(lines[r]);
    if (fields.size() != static_cast<std::size_t>(cols))
      throw InputError(path.string() + ": row " + std::to_string(r + 1) + " has " + std::to_string(fields.size()) +
                       " columns, expected " + std::to_string(cols));
    for (const auto& f : fields) out.push_back(parse_double(f, path.string()));
  }
  return out;
}

}  // namespace quakesr::io
