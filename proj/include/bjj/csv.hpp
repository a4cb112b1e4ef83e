#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bjj/error.hpp"

namespace bjj {

// CSV output with fixed "%.10g" formatting so that identical runs produce
// byte-identical files.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& columns)
      : columns_(columns) {}

  void add_row(const std::vector<double>& row) {
    require(row.size() == columns_.size(), "csv: row width mismatch");
    rows_.push_back(row);
  }

  std::string str() const {
    std::string out;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      out += columns_[c];
      out += (c + 1 < columns_.size()) ? ',' : '\n';
    }
    char buf[40];
    for (const auto& row : rows_) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.10g", row[c]);
        out += buf;
        out += (c + 1 < row.size()) ? ',' : '\n';
      }
    }
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "csv: cannot open " + path + " for writing");
    f << str();
  }

  std::size_t row_count() const { return rows_.size(); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw InvalidInput("csv: missing column " + name);
  }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    require(row.size() == t.columns.size(), "csv: ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "csv: cannot open " + path);
  return read_csv(f);
}

}  // namespace bjj
