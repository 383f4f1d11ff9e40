#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "surf/glm.hpp"
#include "surf/types.hpp"

namespace surf {

/// Decreasing geometric grid of penalty values. values[0] is lambda_max (the
/// smallest penalty at which every non-intercept coefficient is zero) and the
/// last entry is lambda_max * min_ratio.
struct LambdaPath {
  Eigen::VectorXd values;
  double lambda_max = 0.0;
  double min_ratio = 0.0;
};

LambdaPath make_lambda_path(double lambda_max, int n, int p, int length = 100,
                            double min_ratio = 0.0);

struct LassoOptions {
  int path_length = 100;
  int max_sweeps = 1000;     // per lambda, shared across IRLS rounds
  double coord_tol = 1e-7;   // coordinate-change tolerance, standardized scale
  int max_irls = 50;
  // Diagnostic hook: when set (gaussian fits), the per-sweep penalized
  // objective is appended here.
  std::vector<double>* sweep_objective_trace = nullptr;
};

/// L1-penalized GLM path fit by cyclic coordinate descent on IRLS quadratic
/// approximations. Columns are standardized internally to mean 0, variance 1
/// (population convention); constant columns keep coefficient 0. Coefficients
/// are stored per lambda on both the standardized and original scales.
struct LassoFit {
  Family family = Family::gaussian;
  LambdaPath path;
  Eigen::MatrixXd coef_standardized;  // p x L
  Eigen::MatrixXd coef_original;     // p x L
  Eigen::VectorXd intercepts;        // L, original scale
  Eigen::VectorXd column_mean;
  Eigen::VectorXd column_sd;         // 0 marks a constant column
};

LassoFit lasso_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const GlmSpec& spec, const LambdaPath* path = nullptr,
                    const LassoOptions& options = {});

/// Indices of nonzero coefficients at the grid point nearest to lambda.
std::vector<int> active_set(const LassoFit& fit, double lambda);

enum class LambdaRule { one_se, min };

struct CvResult {
  int fold_count = 0;
  Eigen::VectorXd mean_cv_error;  // per lambda, held-out mean unit deviance
  Eigen::VectorXd se_cv_error;    // per lambda, sd of fold means / sqrt(k)
  double lambda_min = 0.0;
  double lambda_1se = 0.0;
  int lambda_min_index = 0;
  int lambda_1se_index = 0;
  LassoFit fit;  // full-data fit over the same grid
};

/// k-fold cross-validation of the lasso path with deviance-based loss.
/// Folds are stratified by class for the binomial family and are drawn
/// deterministically from the seed; fold fits may run in parallel without
/// changing the result. Folds whose training part would be single-class are
/// redrawn up to 10 times before erroring.
CvResult cross_validate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const GlmSpec& spec, int k, std::uint64_t seed,
                        const LassoOptions& options = {}, int threads = 1);

double chosen_lambda(const CvResult& cv, LambdaRule rule);

}  // namespace surf
