#pragma once

#include <Eigen/Dense>
#include <vector>

#include "surf/types.hpp"

namespace surf {

/// Maximum-likelihood fit of an exponential-family GLM with canonical link.
/// The intercept is always present and reported separately from the column
/// coefficients. For the gaussian family the deviance is the residual sum of
/// squares and the log-likelihood has the variance profiled out.
struct GlmFit {
  Family family = Family::gaussian;
  double intercept = 0.0;
  Eigen::VectorXd coefficients;  // one per column of the design submatrix
  double deviance = 0.0;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  bool rank_deficient = false;
  std::vector<int> dropped_columns;  // zero-coefficient columns removed by pivoting
};

struct GlmOptions {
  int max_iterations = 50;
  double tolerance = 1e-8;         // relative deviance change
  double pivot_tolerance = 1e-10;  // relative to the largest pivot
  const GlmFit* start = nullptr;   // warm start (must match column count)
};

/// Fits y ~ intercept + X_sub by iteratively reweighted least squares.
/// Rank-deficient submatrices are fit on a maximal independent column
/// subset found by pivoted elimination; dropped columns get coefficient 0
/// and are flagged in the result. Binomial fitted probabilities are clamped
/// to [1e-8, 1-1e-8] so separation keeps deviances finite.
GlmFit fit_glm(const Eigen::MatrixXd& X_sub, const Eigen::VectorXd& y,
               const GlmSpec& spec, const GlmOptions& options = {});

/// Log-likelihood ratio statistic D between a null fit and an alternative
/// fit that nests it (same response). Binomial and poisson use
/// D = 2*(ll_alt - ll_null); gaussian profiles the variance out and uses
/// D = n*log(RSS_null / RSS_alt). Values in [-1e-6, 0) are clamped to 0;
/// anything below -1e-6 signals a convergence failure and throws.
double log_likelihood_ratio(const GlmFit& null_fit, const GlmFit& alt_fit,
                            int n);

/// Linear predictor eta = intercept + X*beta for a fit, mapped through the
/// inverse canonical link. Used for prediction and CV losses.
Eigen::VectorXd fitted_mean(const GlmFit& fit, const Eigen::MatrixXd& X);

/// Per-observation deviance contribution for a fitted mean (saturated-model
/// reference), non-negative. Sum over observations equals the fit deviance.
double unit_deviance(Family family, double y, double mu);

namespace detail {
double clamp_mu(Family family, double mu);
double variance_function(Family family, double mu);
double inverse_link(Family family, double eta);

/// Solves the symmetric positive semi-definite system A x = b by diagonally
/// pivoted Gaussian elimination on the equilibrated matrix. Pivots smaller
/// than tol times the largest pivot mark dependent columns; those entries of
/// x are zeroed and their indices reported.
struct PivotedSolve {
  Eigen::VectorXd x;
  std::vector<int> dropped;
};
PivotedSolve solve_semidefinite(Eigen::MatrixXd A, Eigen::VectorXd b,
                                double tol);
}  // namespace detail

}  // namespace surf
