#pragma once

// CSV and JSON artifacts. Numbers are written with 17 significant digits so
// that reading a file back reproduces the doubles exactly.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "subdiff/error.hpp"
#include "subdiff/grid.hpp"

namespace subdiff::cli {

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Reads a CSV file whose first line is a header and whose other lines are
/// numbers. Errors name the file and line.
inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (t.header.empty() && t.rows.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size())
      fail("expected " + std::to_string(t.header.size()) + " columns, found " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      const auto first = c.find_first_not_of(' ');
      const auto last = c.find_last_not_of(' ');
      if (first == std::string::npos) fail("empty cell");
      double v = 0.0;
      const char* b = c.data() + first;
      const char* e = c.data() + last + 1;
      const auto [ptr, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || ptr != e) fail("not a number: '" + c + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ConfigError(path.string() + ":1: empty file");
  return t;
}

class CsvWriter {
public:
  explicit CsvWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write " + path.string());
  }

  void header(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) out_ << (i ? "," : "") << names[i];
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) throw IoError("error while writing " + path_.string());
  }

private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Time-major field: header "t" then the space nodes, one row per time node.
inline void write_field_csv(const std::filesystem::path& path, const TimeGrid& tg, const SpaceGrid& sg,
                            const Matrix& u) {
  CsvWriter w(path);
  std::vector<std::string> head{"t"};
  for (std::size_t i = 0; i < sg.size(); ++i) head.push_back(format_number(sg.node(i)));
  w.header(head);
  std::vector<double> row(sg.size() + 1);
  for (std::size_t n = 0; n < tg.size(); ++n) {
    row[0] = tg.node(n);
    for (std::size_t i = 0; i < sg.size(); ++i) row[i + 1] = u(n, i);
    w.row(row);
  }
  w.close();
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  out.close();
  if (!out) throw IoError("error while writing " + path.string());
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

} // namespace subdiff::cli
