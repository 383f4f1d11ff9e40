#include "surf/dataset.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "surf/io.hpp"

namespace surf {

namespace {

std::map<std::string, std::string> read_taxonomy_tsv(const std::string& path) {
  const Table table = read_table(path);
  std::size_t id_col = 0, lineage_col = 1;
  std::map<std::string, std::string> lineages;
  if (table.header.size() < 2)
    throw InputError("taxonomy file needs otu_id and lineage columns: " + path);

  // A header row of "otu_id lineage" names the columns; otherwise the first
  // data row already starts at the header line's position + 1 and the header
  // itself is treated as column labels only when they match.
  const bool labeled = table.header[0] == "otu_id" || table.header[0] == "otu";
  if (!labeled) {
    // Headerless file: the header line is actually data.
    lineages[table.header[id_col]] = table.header[lineage_col];
  }
  for (const auto& row : table.rows) {
    if (!lineages.emplace(row[id_col], row[lineage_col]).second)
      throw InputError("duplicate OTU id in taxonomy: " + row[id_col]);
  }
  return lineages;
}

}  // namespace

Dataset load_dataset(const std::string& table_path, const LoadOptions& options) {
  const Table table = read_table(table_path);
  if (table.header.size() < 2)
    throw InputError("table needs a sample id column and at least one more column");

  Dataset data;
  data.spec.family = options.family;

  // First column holds sample ids.
  std::vector<std::string> predictor_names;
  int response_index = -1;
  for (std::size_t j = 1; j < table.header.size(); ++j) {
    if (table.header[j] == options.response_name) {
      if (response_index >= 0)
        throw InputError("duplicate response column: " + options.response_name);
      response_index = static_cast<int>(j);
    } else {
      predictor_names.push_back(table.header[j]);
    }
  }
  if (response_index < 0)
    throw InputError("response column '" + options.response_name +
                     "' not found in " + table_path);
  {
    std::set<std::string> unique(predictor_names.begin(), predictor_names.end());
    if (unique.size() != predictor_names.size())
      throw InputError("column names are not unique in " + table_path);
  }

  const int n = static_cast<int>(table.rows.size());
  const int p = static_cast<int>(predictor_names.size());
  if (n < 1) throw InputError("no data rows in " + table_path);

  data.column_names = predictor_names;
  data.X.resize(n, p);
  data.y.resize(n);
  data.sample_ids.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    data.sample_ids.push_back(row[0]);
    int out_j = 0;
    for (std::size_t j = 1; j < table.header.size(); ++j) {
      const double value =
          parse_cell(row[j], i + 2, table.header[j]);
      if (static_cast<int>(j) == response_index) {
        data.y(i) = value;
      } else {
        data.X(i, out_j++) = value;
      }
    }
  }

  // Split predictors into OTU columns and passthrough covariates.
  std::set<std::string> passthrough(options.passthrough.begin(),
                                    options.passthrough.end());
  for (const auto& name : options.passthrough) {
    if (std::find(predictor_names.begin(), predictor_names.end(), name) ==
        predictor_names.end())
      throw InputError("passthrough column '" + name + "' not found");
  }
  for (int j = 0; j < p; ++j) {
    if (passthrough.count(data.column_names[static_cast<std::size_t>(j)])) {
      data.passthrough_columns.push_back(j);
    } else {
      data.otu_columns.push_back(j);
    }
  }

  if (options.normalize_proportions) {
    for (int i = 0; i < n; ++i) {
      double row_sum = 0.0;
      for (int j : data.otu_columns) row_sum += data.X(i, j);
      if (row_sum <= 0.0)
        throw InputError("cannot normalize: sample '" + data.sample_ids
                         [static_cast<std::size_t>(i)] + "' has no counts");
      for (int j : data.otu_columns) data.X(i, j) /= row_sum;
    }
    data.normalized = true;
  }

  if (!options.taxonomy_path.empty()) {
    auto lineages = read_taxonomy_tsv(options.taxonomy_path);
    std::set<std::string> otu_names;
    for (int j : data.otu_columns)
      otu_names.insert(data.column_names[static_cast<std::size_t>(j)]);
    for (const auto& [id, lineage] : lineages) {
      if (!otu_names.count(id))
        throw InputError("taxonomy covers unknown OTU '" + id + "'");
    }
    std::vector<std::string> ordered_lineages, ordered_ids;
    for (int j : data.otu_columns) {
      const auto& name = data.column_names[static_cast<std::size_t>(j)];
      const auto it = lineages.find(name);
      if (it == lineages.end())
        throw InputError("OTU column '" + name + "' has no taxonomy lineage");
      ordered_ids.push_back(name);
      ordered_lineages.push_back(it->second);
    }
    data.taxonomy = parse_taxonomy(ordered_lineages, &ordered_ids);
  }

  // Column centering; aggregation later commutes with it.
  for (int j = 0; j < p; ++j) {
    data.X.col(j).array() -= data.X.col(j).mean();
  }
  return data;
}

}  // namespace surf
