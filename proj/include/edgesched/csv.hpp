#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "edgesched/error.hpp"

namespace edgesched::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source file
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    std::string_view field = line.substr(start, pos == std::string_view::npos ? pos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    out.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Reads a comma-separated file with a header line. Blank lines are skipped.
inline Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  Table table;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      table.header = split(line);
      have_header = true;
      continue;
    }
    table.rows.push_back(Row{lineno, split(line)});
  }
  if (!have_header) throw ParseError(path.string() + ": missing header");
  return table;
}

inline void expect_header(const Table& t, const std::filesystem::path& path,
                          std::size_t required, const std::vector<std::string>& names) {
  bool ok = t.header.size() >= required && t.header.size() <= names.size();
  for (std::size_t i = 0; ok && i < t.header.size(); ++i) ok = t.header[i] == names[i];
  if (!ok) {
    std::string want;
    for (std::size_t i = 0; i < names.size(); ++i) want += (i ? "," : "") + names[i];
    throw ParseError(path.string() + ":1: unexpected header (want " + want + ")");
  }
}

inline std::string where(const std::filesystem::path& path, const Row& row) {
  return path.string() + ":" + std::to_string(row.line);
}

template <typename T>
T parse_number(std::string_view text, const std::string& context) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(context + ": invalid number '" + std::string(text) + "'");
  }
  return value;
}

// Shortest text that reads back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << fields), ...);
    out_ << '\n';
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace edgesched::csv
