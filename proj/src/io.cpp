#include "clgm/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "clgm/errors.hpp"

#ifndef CLGM_DEFAULT_DATA_DIR
#define CLGM_DEFAULT_DATA_DIR "data"
#endif

namespace clgm {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '"')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '"')) ++i;
  return s.substr(i);
}

}  // namespace

Eigen::Index CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return static_cast<Eigen::Index>(k);
  throw IoError("csv: no column named '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path.string() + "' is empty");
  for (auto& h : split(line)) table.header.push_back(trim(h));
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (cells.size() != table.header.size())
      throw IoError("'" + path.string() + "': row has " + std::to_string(cells.size()) +
                    " cells, expected " + std::to_string(table.header.size()));
    std::vector<double> row;
    for (auto& c : cells) {
      const std::string t = trim(c);
      if (t.empty() || t == "NA") {
        row.push_back(std::nan(""));
        continue;
      }
      try {
        row.push_back(std::stod(t));
      } catch (const std::exception&) {
        throw IoError("'" + path.string() + "': non-numeric cell '" + t + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  return table;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (std::size_t k = 0; k < table.header.size(); ++k) out << (k ? "," : "") << table.header[k];
  out << '\n';
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index k = 0; k < table.values.cols(); ++k)
      out << (k ? "," : "") << format_double(table.values(i, k));
    out << '\n';
  }
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("CLGM_DATA_DIR"); env && *env) return env;
  return CLGM_DEFAULT_DATA_DIR;
}

}  // namespace clgm
