#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "surf/tree.hpp"
#include "surf/types.hpp"

namespace surf {

/// Loaded modeling table: predictors, response, and optionally the taxonomy
/// over the OTU (non-passthrough) columns. Predictor columns are centered by
/// the loader; normalization to row proportions is opt-in.
struct Dataset {
  Eigen::MatrixXd X;  // n x p, centered
  std::vector<std::string> column_names;
  Eigen::VectorXd y;
  GlmSpec spec;
  std::vector<std::string> sample_ids;
  std::optional<TaxonomyTree> taxonomy;  // leaves = otu_columns, in order
  std::vector<int> otu_columns;          // aggregation candidates
  std::vector<int> passthrough_columns;  // never aggregated
  bool normalized = false;

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }
};

struct LoadOptions {
  std::string response_name;
  Family family = Family::binomial;
  bool normalize_proportions = false;
  std::vector<std::string> passthrough;  // column names kept out of the tree
  std::string taxonomy_path;             // optional TSV: otu_id <tab> lineage
};

/// Reads a CSV/TSV whose first row is a header and first column a sample id.
/// The response column is removed from the predictors; remaining columns are
/// parsed as numbers. With normalization, OTU columns are divided by their
/// per-row sum before centering.
Dataset load_dataset(const std::string& table_path, const LoadOptions& options);

}  // namespace surf
