#include "surf/io.hpp"

#include <fstream>
#include <sstream>

#include "surf/types.hpp"

namespace surf {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, delim)) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

}  // namespace

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw InputError("empty file: " + path);

  char delim = ',';
  if (line.find('\t') != std::string::npos ||
      (path.size() > 4 && path.substr(path.size() - 4) == ".tsv")) {
    delim = '\t';
  }

  Table table;
  table.header = split_line(line, delim);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line, delim);
    if (cells.size() != table.header.size())
      throw InputError(path + ": row " +
                       std::to_string(table.rows.size() + 2) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

double parse_cell(const std::string& text, int row, const std::string& column) {
  try {
    std::size_t consumed = 0;
    const double value = std::stod(text, &consumed);
    while (consumed < text.size() &&
           (text[consumed] == ' ' || text[consumed] == '\t'))
      ++consumed;
    if (consumed != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw InputError("non-numeric cell '" + text + "' at row " +
                     std::to_string(row) + ", column '" + column + "'");
  }
}

Eigen::MatrixXd load_numeric_csv(const std::string& path) {
  const Table table = read_table(path);
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto p = static_cast<Eigen::Index>(table.header.size());
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      X(i, j) = parse_cell(table.rows[static_cast<std::size_t>(i)]
                                     [static_cast<std::size_t>(j)],
                           static_cast<int>(i) + 2,
                           table.header[static_cast<std::size_t>(j)]);
    }
  }
  return X;
}

}  // namespace surf
