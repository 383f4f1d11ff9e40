#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "surf/forward.hpp"
#include "surf/ranking.hpp"
#include "surf/rng.hpp"
#include "surf/stability.hpp"
#include "surf/types.hpp"

namespace surf {

/// Synthetic OTU-style design: blocks of correlated log-normal columns,
/// optionally row-normalized to proportions, with columns 0 and 1 forming a
/// near-perfect surrogate pair when requested.
struct SynthDesignConfig {
  int n = 100;
  int p = 100;
  int block_size = 10;
  double correlation = 0.5;        // within-block latent correlation
  double log_sigma = 1.0;          // log-scale spread (heavy tails)
  bool surrogate_pair = true;
  double surrogate_noise = 0.003;  // relative noise between the pair
  bool compositional = true;       // rows sum to one
};

Eigen::MatrixXd make_synthetic_design(const SynthDesignConfig& config,
                                      std::uint64_t seed);

struct TrueVariable {
  int column = 0;
  double direction = 1.0;  // sign (or relative weight) of the effect
};

struct ScenarioSpec {
  std::string name = "scenario";
  std::string design_file;  // CSV with header; empty means synthetic
  SynthDesignConfig synth;
  GlmSpec family;
  std::vector<TrueVariable> true_vars;  // empty marks the null scenario
  double intercept = std::numeric_limits<double>::quiet_NaN();  // NaN: default
  double target_snr = 1.0;
  std::vector<std::vector<int>> equivalence_classes;  // mutually surrogate sets
  int n_reps = 100;
  std::uint64_t seed = 0;
  int test_n = 0;  // held-out design rows; 0 disables test error
  int threads = 1;
  int cv_folds = 5;  // plain-LASSO comparator
  RankingConfig ranking;
  ForwardConfig forward;
  StabilityConfig stability;
};

/// Empirical signal-to-noise over the design rows. Binomial uses
/// Var(P)/E(P(1-P)) with P = logistic(intercept + X beta); gaussian uses
/// Var(X beta) with unit irreducible error.
double empirical_snr(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                     double intercept, Family family);

/// Scales beta_direction so the empirical SNR hits the target: closed form
/// for gaussian, bisection within 1% for binomial. Throws NumericError when
/// the target is unattainable, reporting the maximum reachable value.
Eigen::VectorXd calibrate_snr(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& beta_direction,
                              double intercept, Family family,
                              double target_snr);

/// Draws a response from the model: Bernoulli(logistic(eta)) or
/// eta + standard normal noise.
Eigen::VectorXd generate_response(const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& beta, double intercept,
                                  Family family, Rng& rng);

/// Surrogate-aware scoring: each truth equivalence class credits at most one
/// true positive; extra members of a credited class and variables outside
/// every class count as false positives.
std::pair<int, int> score_selection(const std::vector<int>& selected,
                                    const ScenarioSpec& spec);

struct MethodMetrics {
  std::string method;
  std::vector<int> tp_histogram;  // index = number of truth classes recovered
  double fp_mean = 0.0;
  double fp_sd = 0.0;
  double insample_error_mean = 0.0;  // misclassification (binomial) or MSE
  double insample_error_sd = 0.0;
  double test_error_mean = std::numeric_limits<double>::quiet_NaN();
  double test_error_sd = std::numeric_limits<double>::quiet_NaN();
  double r2_mean = std::numeric_limits<double>::quiet_NaN();  // gaussian only
  int completed = 0;
  int failed = 0;
  std::vector<int> per_rep_selected_count;
};

struct ScenarioMetrics {
  std::string scenario;
  int n_reps = 0;
  std::map<std::string, MethodMetrics> per_method;
};

/// Runs the scenario end to end for each requested method ("surf",
/// "stability", "lasso"): draw the response, select variables, score them
/// against the truth classes, refit the selected GLM and record predictive
/// error. Per-rep method failures are excluded and counted; more than 10%
/// failures aborts the scenario.
ScenarioMetrics run_scenario(const ScenarioSpec& spec,
                             const std::vector<std::string>& methods);

/// Plain-text key=value scenario file (see README for the key list).
ScenarioSpec parse_scenario_file(const std::string& path);

std::string metrics_csv(const ScenarioMetrics& metrics);

}  // namespace surf
