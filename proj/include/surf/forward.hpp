#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "surf/glm.hpp"
#include "surf/ranking.hpp"
#include "surf/types.hpp"

namespace surf {

struct ForwardConfig {
  double alpha = 0.05;  // significance level
  int n_perm = 200;     // permutations per step
  int max_steps = 0;    // 0 resolves to min(n/2, 50)
  std::uint64_t seed = 0;
  int threads = 1;
};

struct SelectionStep {
  int variable = -1;
  double llr = 0.0;             // observed log-likelihood ratio D
  double critical_value = 0.0;  // empirical 1-alpha quantile of the null
  double p_value = 1.0;         // (1 + #{null >= D}) / (n_perm + 1)
  std::vector<double> null_stats;
};

struct SelectionResult {
  std::vector<SelectionStep> steps;
  std::vector<double> terminal_null_stats;  // final step's null distribution
  GlmFit final_model;                       // fit on exactly the selected set
  std::vector<int> selected;                // step variables, in order
  bool hit_max_steps = false;
  // Best unselected candidate at termination. Extra diagnostic, not part of
  // the selection rule.
  int terminal_best_candidate = -1;
  double terminal_p_value = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<int, int>> failed_fits;  // (step, variable) scored 0
};

/// Conservative empirical upper quantile: the order statistic at 1-based
/// index ceil(level * m) of the sorted values.
double quantile_upper(std::vector<double> values, double level);

/// Null distribution of the maximum log-likelihood ratio over candidates.
/// Each draw applies one shared row permutation to every candidate column
/// (selected columns and the response stay fixed), then records the largest
/// LLR of current-model-plus-candidate against the current model. The
/// optional `permutations` hook overrides the random draws in tests.
std::vector<double> null_max_llr(
    const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GlmSpec& spec,
    const std::vector<int>& selected, const std::vector<int>& candidates,
    int n_perm, std::uint64_t seed, int threads = 1,
    const std::vector<std::vector<int>>* permutations = nullptr);

/// Sequential permutation-calibrated forward selection over the ranked
/// candidate list. At each step the critical value is the empirical 1-alpha
/// quantile of null_max_llr with fresh permutations; the first candidate in
/// ranking order whose LLR exceeds it enters the model. Stops when no
/// candidate exceeds the critical value or max_steps is reached.
SelectionResult forward_select(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, const GlmSpec& spec,
                               const VariableRanking& ranking,
                               const ForwardConfig& config);

}  // namespace surf
