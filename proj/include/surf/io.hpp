#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace surf {

/// Delimited text table: first line is the header. The delimiter is a tab
/// when the header contains one (or the file ends in .tsv), otherwise a
/// comma.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(const std::string& path);

/// Numeric matrix from a headered CSV/TSV without an id column.
Eigen::MatrixXd load_numeric_csv(const std::string& path);

/// Parses a numeric cell; throws InputError naming the row and column on
/// failure.
double parse_cell(const std::string& text, int row, const std::string& column);

}  // namespace surf
