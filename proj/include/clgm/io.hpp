#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace clgm {

/// Numeric CSV with a header row. Empty cells read as NaN.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;  // rows x columns

  Eigen::Index column(const std::string& name) const;
  Eigen::VectorXd col(const std::string& name) const { return values.col(column(name)); }
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Shortest round-tripping decimal representation ("" for NaN).
std::string format_double(double v);

/// Bundled dataset directory: $CLGM_DATA_DIR if set, else the build-time default.
std::filesystem::path data_dir();

}  // namespace clgm
