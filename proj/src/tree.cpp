#include "surf/tree.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace surf {

namespace {

const char* kStandardRanks[] = {"kingdom", "phylum", "class",  "order",
                                "family",  "genus",  "species"};

std::vector<std::string> split_lineage(const std::string& lineage) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : lineage) {
    if (c == ';') {
      parts.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  parts.push_back(current);
  // Trim surrounding whitespace per segment.
  for (auto& part : parts) {
    const auto begin = part.find_first_not_of(" \t\r");
    const auto end = part.find_last_not_of(" \t\r");
    part = begin == std::string::npos ? std::string()
                                      : part.substr(begin, end - begin + 1);
  }
  return parts;
}

// Lower median of a small value set: order statistic at index
// floor((m-1)/2) of the sorted values.
double lower_median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

bool columns_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double tol = 1e-12 * std::max(std::abs(a(i)), std::abs(b(i)));
    if (std::abs(a(i) - b(i)) > tol) return false;
  }
  return true;
}

}  // namespace

std::vector<int> TaxonomyTree::leaf_columns_under(int node) const {
  std::vector<int> out;
  std::vector<int> stack = {node};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    const auto& nd = nodes[static_cast<std::size_t>(v)];
    if (nd.is_leaf()) {
      out.push_back(nd.leaf_column);
    } else {
      for (int c : nd.children) stack.push_back(c);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> TaxonomyTree::node_labels() const {
  std::vector<std::string> labels(nodes.size());
  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& nd = nodes[i];
    std::string label;
    if (nd.is_leaf()) {
      label = nd.name;
    } else if (nd.parent < 0) {
      label = "root";
    } else if (nd.name.empty()) {
      label = nd.rank + ":unnamed" + std::to_string(i);
    } else {
      label = nd.rank + ":" + nd.name;
    }
    auto [it, inserted] = seen.emplace(label, 1);
    if (!inserted) {
      label += "#" + std::to_string(++it->second);
    }
    labels[i] = label;
  }
  return labels;
}

TaxonomyTree parse_taxonomy(const std::vector<std::string>& lineages,
                            const std::vector<std::string>* otu_ids) {
  if (lineages.empty()) throw InputError("parse_taxonomy: no lineages");
  TaxonomyTree tree;

  std::vector<std::vector<std::string>> parsed;
  parsed.reserve(lineages.size());
  for (const auto& l : lineages) parsed.push_back(split_lineage(l));

  const std::size_t depth = parsed.front().size();
  std::string offenders;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (parsed[i].size() != depth) {
      if (!offenders.empty()) offenders += ", ";
      offenders += otu_ids != nullptr ? (*otu_ids)[i]
                                      : "otu" + std::to_string(i + 1);
    }
  }
  if (!offenders.empty())
    throw InputError("parse_taxonomy: inconsistent rank counts for OTUs: " +
                     offenders);

  for (std::size_t r = 0; r < depth; ++r) {
    tree.levels.push_back(r < 7 ? kStandardRanks[r]
                                : "level" + std::to_string(r + 1));
  }

  TaxonomyNode root;
  root.rank = "root";
  tree.nodes.push_back(root);

  for (std::size_t i = 0; i < parsed.size(); ++i) {
    int current = 0;
    for (std::size_t r = 0; r < depth; ++r) {
      const std::string& name = parsed[i][r];
      int next = -1;
      for (int c : tree.nodes[static_cast<std::size_t>(current)].children) {
        const auto& child = tree.nodes[static_cast<std::size_t>(c)];
        if (!child.is_leaf() && child.name == name) {
          next = c;
          break;
        }
      }
      if (next < 0) {
        TaxonomyNode node;
        node.name = name;
        node.rank = tree.levels[r];
        node.level = static_cast<int>(r);
        node.parent = current;
        next = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(node);
        tree.nodes[static_cast<std::size_t>(current)].children.push_back(next);
      }
      current = next;
    }
    TaxonomyNode leaf;
    leaf.name = otu_ids != nullptr ? (*otu_ids)[i] : "otu" + std::to_string(i + 1);
    leaf.rank = "otu";
    leaf.level = static_cast<int>(depth);
    leaf.parent = current;
    leaf.leaf_column = static_cast<int>(i);
    const int leaf_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(leaf);
    tree.nodes[static_cast<std::size_t>(current)].children.push_back(leaf_id);
    tree.leaves.push_back(leaf_id);
    tree.otu_ids.push_back(leaf.name);
  }
  return tree;
}

ClusteringMatrix clustering_matrix(const TaxonomyTree& tree,
                                   const std::string& level) {
  const auto it = std::find(tree.levels.begin(), tree.levels.end(), level);
  if (it == tree.levels.end())
    throw InputError("clustering_matrix: unknown level: " + level);
  const int level_index = static_cast<int>(it - tree.levels.begin());

  ClusteringMatrix cm;
  cm.level = level;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& nd = tree.nodes[i];
    if (!nd.is_leaf() && nd.level == level_index)
      cm.cluster_nodes.push_back(static_cast<int>(i));
  }
  const int p = tree.leaf_count();
  const int m = static_cast<int>(cm.cluster_nodes.size());
  cm.entries = Eigen::MatrixXd::Zero(p, m);
  for (int j = 0; j < m; ++j) {
    for (int col : tree.leaf_columns_under(cm.cluster_nodes[static_cast<std::size_t>(j)]))
      cm.entries(col, j) = 1.0;
  }
  return cm;
}

std::vector<int> augmentation_order(const TaxonomyTree& tree) {
  std::vector<int> order(tree.leaves.begin(), tree.leaves.end());
  const int depth = static_cast<int>(tree.levels.size());
  for (int level = depth - 1; level >= 0; --level) {
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& nd = tree.nodes[i];
      if (!nd.is_leaf() && nd.level == level) order.push_back(static_cast<int>(i));
    }
  }
  order.push_back(0);  // root
  return order;
}

AugmentedDesign build_augmented_design(const Eigen::MatrixXd& X,
                                       const TaxonomyTree& tree) {
  const int p = static_cast<int>(X.cols());
  if (p != tree.leaf_count())
    throw InputError("build_augmented_design: design has " +
                     std::to_string(p) + " columns but tree has " +
                     std::to_string(tree.leaf_count()) + " leaves");

  const auto order = augmentation_order(tree);
  const auto labels = tree.node_labels();
  const int n = static_cast<int>(X.rows());

  std::vector<Eigen::VectorXd> retained;
  AugmentedDesign out;
  for (int node : order) {
    const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
    Eigen::VectorXd col;
    if (nd.is_leaf()) {
      col = X.col(nd.leaf_column);
    } else {
      col = Eigen::VectorXd::Zero(n);
      for (int leaf_col : tree.leaf_columns_under(node)) col += X.col(leaf_col);
    }
    int duplicate = -1;
    if (!nd.is_leaf()) {
      const double sum = col.sum();
      for (std::size_t c = 0; c < retained.size(); ++c) {
        if (std::abs(retained[c].sum() - sum) >
            1e-9 * std::max(1.0, std::abs(sum)))
          continue;
        if (columns_equal(retained[c], col)) {
          duplicate = static_cast<int>(c);
          break;
        }
      }
    }
    if (duplicate >= 0) {
      out.dropped_nodes.push_back(node);
      out.duplicate_of.push_back(duplicate);
    } else {
      retained.push_back(std::move(col));
      out.column_node.push_back(node);
      out.column_label.push_back(labels[static_cast<std::size_t>(node)]);
    }
  }

  out.matrix.resize(n, static_cast<Eigen::Index>(retained.size()));
  for (std::size_t c = 0; c < retained.size(); ++c)
    out.matrix.col(static_cast<Eigen::Index>(c)) = retained[c];
  return out;
}

AugmentedCoefficients parsimonious_representation(const Eigen::VectorXd& beta,
                                                  const TaxonomyTree& tree) {
  if (beta.size() != tree.leaf_count())
    throw InputError("parsimonious_representation: beta size mismatch");
  if (!beta.allFinite())
    throw InputError("parsimonious_representation: beta must be finite");

  const auto order = augmentation_order(tree);
  std::vector<double> cumulative(tree.nodes.size(), 0.0);

  // Bottom-up pass; the augmentation order already lists children before
  // parents.
  for (int node : order) {
    const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
    if (nd.is_leaf()) {
      cumulative[static_cast<std::size_t>(node)] = beta(nd.leaf_column);
    } else {
      std::vector<double> values = {0.0};
      for (int c : nd.children)
        values.push_back(cumulative[static_cast<std::size_t>(c)]);
      cumulative[static_cast<std::size_t>(node)] = lower_median(values);
    }
  }

  AugmentedCoefficients out;
  out.node_order = order;
  out.alpha.resize(static_cast<Eigen::Index>(order.size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& nd = tree.nodes[static_cast<std::size_t>(order[i])];
    const double parent_value =
        nd.parent < 0 ? 0.0 : cumulative[static_cast<std::size_t>(nd.parent)];
    out.alpha(static_cast<Eigen::Index>(i)) =
        cumulative[static_cast<std::size_t>(order[i])] - parent_value;
  }

  // Cumulative branch sums at the leaves must reproduce beta exactly.
  out.implied_beta.resize(tree.leaf_count());
  for (int leaf_id : tree.leaves) {
    double sum = 0.0;
    for (int v = leaf_id; v >= 0; v = tree.nodes[static_cast<std::size_t>(v)].parent) {
      const double parent_value =
          tree.nodes[static_cast<std::size_t>(v)].parent < 0
              ? 0.0
              : cumulative[static_cast<std::size_t>(
                    tree.nodes[static_cast<std::size_t>(v)].parent)];
      sum += cumulative[static_cast<std::size_t>(v)] - parent_value;
    }
    out.implied_beta(tree.nodes[static_cast<std::size_t>(leaf_id)].leaf_column) = sum;
  }
  return out;
}

double penalty(const AugmentedCoefficients& coefficients) {
  return coefficients.alpha.lpNorm<1>();
}

LeafReport map_selection_to_leaves(const AugmentedDesign& design,
                                   const std::vector<int>& selected_columns,
                                   const Eigen::VectorXd& selected_coefficients,
                                   const TaxonomyTree& tree) {
  if (static_cast<Eigen::Index>(selected_columns.size()) !=
      selected_coefficients.size())
    throw InputError("map_selection_to_leaves: coefficient count mismatch");

  LeafReport report;
  report.leaf_coefficient = Eigen::VectorXd::Zero(tree.leaf_count());
  const auto labels = tree.node_labels();

  for (std::size_t s = 0; s < selected_columns.size(); ++s) {
    const int col = selected_columns[s];
    if (col < 0 || col >= static_cast<int>(design.column_node.size()))
      throw InputError("map_selection_to_leaves: column index out of range");
    const int node = design.column_node[static_cast<std::size_t>(col)];
    const double coef = selected_coefficients(static_cast<Eigen::Index>(s));
    const auto leaf_cols = tree.leaf_columns_under(node);
    for (int lc : leaf_cols) report.leaf_coefficient(lc) += coef;
    if (!tree.nodes[static_cast<std::size_t>(node)].is_leaf()) {
      std::ostringstream note;
      note << labels[static_cast<std::size_t>(node)] << " groups {";
      for (std::size_t i = 0; i < leaf_cols.size(); ++i) {
        if (i > 0) note << ", ";
        note << tree.otu_ids[static_cast<std::size_t>(leaf_cols[i])];
      }
      note << "} with a shared coefficient contribution of " << coef;
      report.constraints.push_back(note.str());
    }
  }
  return report;
}

}  // namespace surf
