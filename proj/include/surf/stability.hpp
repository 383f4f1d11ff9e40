#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "surf/lasso.hpp"
#include "surf/types.hpp"

namespace surf {

struct StabilityConfig {
  double cutoff = 0.9;     // threshold selection probability, in (0.5, 1]
  double ewv_bound = 1.0;  // bound on the expected number of false selections
  int B = 100;             // subsample count
  double fraction = 0.5;   // subsample proportion
  std::uint64_t seed = 0;
  int threads = 1;
  LassoOptions lasso;
};

struct StabilityResult {
  std::vector<int> selected;   // frequency >= cutoff
  Eigen::VectorXd frequency;   // per column, in [0, 1]
  int per_subsample_cap = 0;   // q = floor(sqrt(ewv_bound*(2*cutoff-1)*p))
  int completed = 0;
  int skipped = 0;
};

/// Stability-selection baseline: selection frequency over B half-size
/// (class-stratified for binomial) subsamples, where each subsample's LASSO
/// path selection is truncated to at most q variables so the expected number
/// of false selections stays under ewv_bound.
StabilityResult stability_select(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, const GlmSpec& spec,
                                 const StabilityConfig& config);

}  // namespace surf
