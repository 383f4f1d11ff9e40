#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "surf/lasso.hpp"
#include "surf/rng.hpp"
#include "surf/types.hpp"

namespace surf {

struct RankingConfig {
  int B = 250;               // subsample count
  double fraction = 0.9;     // subsample proportion
  bool stratified = true;    // stratify by class (binomial only)
  LambdaRule lambda_rule = LambdaRule::one_se;
  std::uint64_t seed = 0;
  int cv_folds = 5;
  int threads = 1;
  LassoOptions lasso;
};

/// Rank-ordered column indices with the number of subsamples in which
/// cross-validated LASSO selected each column.
struct VariableRanking {
  std::vector<int> order;      // permutation of columns, best first
  std::vector<int> frequency;  // per column, over completed subsamples
  int completed = 0;
  int skipped = 0;
};

/// Draws round(fraction * n) indices without replacement, or with strata the
/// per-class counts round(fraction * class size). A class whose allocation
/// rounds to zero is an error. Output is sorted and deterministic given the
/// generator state.
std::vector<int> subsample_indices(int n, double fraction,
                                   const std::vector<int>* strata, Rng& rng);

/// Frequency ranking over B stratified subsamples: each subsample runs
/// cross-validated LASSO and the active set at the chosen lambda increments
/// the counts. Ties are broken by the deviance reduction of each tied column
/// when added to the GLM on all higher-ranked columns (resolved ties
/// included), then by ascending column index. Subsamples with degenerate
/// responses are skipped; more than 10% skipped is an error.
VariableRanking rank_variables(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, const GlmSpec& spec,
                               const RankingConfig& config);

}  // namespace surf
