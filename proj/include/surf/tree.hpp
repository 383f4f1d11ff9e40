#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "surf/types.hpp"

namespace surf {

struct TaxonomyNode {
  std::string name;   // empty for pass-through nodes created by empty ranks
  std::string rank;   // level label; "root" for the synthetic root
  int parent = -1;    // node id; -1 only for the root
  int level = -1;     // 0-based level index; -1 for the root
  std::vector<int> children;
  int leaf_column = -1;  // OTU column index for leaves, -1 for internal nodes
  bool is_leaf() const { return leaf_column >= 0; }
};

/// Taxonomic tree over OTU columns. Node 0 is a synthetic root; every OTU is
/// a leaf hanging under its last-rank node, so all leaves share the same
/// depth. Identical lineage prefixes share nodes (empty segments included).
struct TaxonomyTree {
  std::vector<TaxonomyNode> nodes;
  std::vector<std::string> levels;      // rank labels, highest level first
  std::vector<int> leaves;              // leaf node ids in OTU column order
  std::vector<std::string> otu_ids;     // one per leaf

  int leaf_count() const { return static_cast<int>(leaves.size()); }
  /// Leaf column indices under a node, ascending.
  std::vector<int> leaf_columns_under(int node) const;
  /// Unique display label per node (taxon name, disambiguated on collision).
  std::vector<std::string> node_labels() const;
};

/// Parses one semicolon-delimited lineage per OTU. All lineages must have the
/// same number of ranks; empty segments create unnamed pass-through nodes.
/// OTU ids default to "otu1".. when not supplied.
TaxonomyTree parse_taxonomy(const std::vector<std::string>& lineages,
                            const std::vector<std::string>* otu_ids = nullptr);

/// Binary membership matrix at one level: entries(i, j) = 1 iff OTU i belongs
/// to cluster j at that level. Each row has exactly one 1.
struct ClusteringMatrix {
  std::string level;
  Eigen::MatrixXd entries;        // p x m
  std::vector<int> cluster_nodes; // node id per cluster column
};

ClusteringMatrix clustering_matrix(const TaxonomyTree& tree,
                                   const std::string& level);

/// Node ids in the canonical augmentation order: leaves in OTU column order,
/// then internal nodes bottom-up (deepest level first, creation order within
/// a level), root last.
std::vector<int> augmentation_order(const TaxonomyTree& tree);

/// Design matrix augmented with one aggregate column per internal node whose
/// row-wise leaf sum differs from every already-retained column. Duplicates
/// keep the copy closest to the leaves.
struct AugmentedDesign {
  Eigen::MatrixXd matrix;              // n x q
  std::vector<int> column_node;        // node id per retained column
  std::vector<std::string> column_label;
  std::vector<int> dropped_nodes;      // internal nodes removed as duplicates
  std::vector<int> duplicate_of;       // retained column each dropped node equals
};

AugmentedDesign build_augmented_design(const Eigen::MatrixXd& X,
                                       const TaxonomyTree& tree);

/// Minimal-L1 coefficients on the expanded node set reproducing a leaf-scale
/// coefficient vector. Computed bottom-up: each internal node's cumulative
/// value is the median of {0} union its children's cumulative values (lower
/// median on even sets); a node's own coefficient is its cumulative value
/// minus its parent's.
struct AugmentedCoefficients {
  std::vector<int> node_order;   // augmentation_order of the tree
  Eigen::VectorXd alpha;         // per node, in node_order
  Eigen::VectorXd implied_beta;  // per leaf, cumulative sums down the tree
};

AugmentedCoefficients parsimonious_representation(const Eigen::VectorXd& beta,
                                                  const TaxonomyTree& tree);

/// L1 penalty of an expanded coefficient vector (per unit lambda).
double penalty(const AugmentedCoefficients& coefficients);

/// Leaf-scale view of a selection over augmented columns: each leaf's
/// effective coefficient is the sum of the coefficients of its selected
/// ancestors and of itself, plus a readable equal-coefficient constraint
/// note per selected internal node.
struct LeafReport {
  Eigen::VectorXd leaf_coefficient;  // per OTU column
  std::vector<std::string> constraints;
};

LeafReport map_selection_to_leaves(const AugmentedDesign& design,
                                   const std::vector<int>& selected_columns,
                                   const Eigen::VectorXd& selected_coefficients,
                                   const TaxonomyTree& tree);

}  // namespace surf
