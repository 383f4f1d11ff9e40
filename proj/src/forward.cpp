#include "surf/forward.hpp"

#include <algorithm>
#include <cmath>

#include "surf/parallel.hpp"
#include "surf/rng.hpp"

namespace surf {

double quantile_upper(std::vector<double> values, double level) {
  if (values.empty()) throw InputError("quantile_upper: empty sample");
  if (level <= 0.0 || level >= 1.0)
    throw InputError("quantile_upper: level must be in (0, 1)");
  std::sort(values.begin(), values.end());
  const auto m = static_cast<double>(values.size());
  auto index = static_cast<std::size_t>(std::ceil(level * m));
  index = std::max<std::size_t>(1, std::min(index, values.size()));
  return values[index - 1];
}

namespace {

Eigen::MatrixXd columns_of(const Eigen::MatrixXd& X, const std::vector<int>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
  return out;
}

// LLR of current-model-plus-one-column against the current model, with the
// extra column supplied directly. Failures score 0.
double candidate_llr(const Eigen::MatrixXd& X_selected,
                     const Eigen::VectorXd& extra, const Eigen::VectorXd& y,
                     const GlmSpec& spec, const GlmFit& current, bool* ok) {
  Eigen::MatrixXd Xa(X_selected.rows(), X_selected.cols() + 1);
  if (X_selected.cols() > 0) Xa.leftCols(X_selected.cols()) = X_selected;
  Xa.col(X_selected.cols()) = extra;
  try {
    GlmFit start = current;
    start.coefficients.conservativeResize(Xa.cols());
    start.coefficients(Xa.cols() - 1) = 0.0;
    GlmOptions opt;
    opt.start = &start;
    const GlmFit alt = fit_glm(Xa, y, spec, opt);
    if (ok != nullptr) *ok = true;
    return log_likelihood_ratio(current, alt, static_cast<int>(y.size()));
  } catch (const std::exception&) {
    if (ok != nullptr) *ok = false;
    return 0.0;
  }
}

}  // namespace

std::vector<double> null_max_llr(
    const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GlmSpec& spec,
    const std::vector<int>& selected, const std::vector<int>& candidates,
    int n_perm, std::uint64_t seed, int threads,
    const std::vector<std::vector<int>>* permutations) {
  if (candidates.empty()) throw InputError("null_max_llr: empty candidate list");
  for (int c : candidates) {
    if (std::find(selected.begin(), selected.end(), c) != selected.end())
      throw InputError("null_max_llr: candidates must be disjoint from selected");
  }
  if (n_perm < 1) throw InputError("null_max_llr: need at least one permutation");
  if (permutations != nullptr &&
      static_cast<int>(permutations->size()) < n_perm)
    throw InputError("null_max_llr: not enough supplied permutations");

  const int n = static_cast<int>(y.size());
  const Eigen::MatrixXd X_selected = columns_of(X, selected);
  const GlmFit current = fit_glm(X_selected, y, spec);

  std::vector<double> stats(static_cast<std::size_t>(n_perm), 0.0);
  parallel_tasks(n_perm, threads, [&](int d) {
    std::vector<int> perm;
    if (permutations != nullptr) {
      perm = (*permutations)[static_cast<std::size_t>(d)];
    } else {
      Rng rng(derive_seed(seed, {0x9E37u, static_cast<std::uint64_t>(d)}));
      perm = rng.permutation(n);
    }
    Eigen::VectorXd permuted(n);
    double max_llr = 0.0;
    for (int c : candidates) {
      for (int i = 0; i < n; ++i)
        permuted(i) = X(perm[static_cast<std::size_t>(i)], c);
      max_llr = std::max(
          max_llr, candidate_llr(X_selected, permuted, y, spec, current, nullptr));
    }
    stats[static_cast<std::size_t>(d)] = max_llr;
  });
  return stats;
}

SelectionResult forward_select(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, const GlmSpec& spec,
                               const VariableRanking& ranking,
                               const ForwardConfig& config) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (config.alpha <= 0.0 || config.alpha >= 1.0)
    throw InputError("forward_select: alpha must be in (0, 1)");
  if (config.n_perm < 1 ||
      static_cast<double>(config.n_perm) < 1.0 / config.alpha)
    throw InputError("forward_select: n_perm below 1/alpha makes the "
                     "1-alpha quantile degenerate");
  {
    std::vector<char> seen(static_cast<std::size_t>(p), 0);
    if (static_cast<int>(ranking.order.size()) != p)
      throw InputError("forward_select: ranking does not cover all columns");
    for (int j : ranking.order) {
      if (j < 0 || j >= p || seen[static_cast<std::size_t>(j)])
        throw InputError("forward_select: ranking is not a permutation");
      seen[static_cast<std::size_t>(j)] = 1;
    }
  }
  const int max_steps =
      config.max_steps > 0 ? config.max_steps : std::min(n / 2, 50);

  SelectionResult result;
  std::vector<int> candidates = ranking.order;
  GlmFit current = fit_glm(Eigen::MatrixXd(n, 0), y, spec);
  Eigen::MatrixXd X_selected(n, 0);

  for (int step = 0; !candidates.empty(); ++step) {
    const auto stats = null_max_llr(
        X, y, spec, result.selected, candidates, config.n_perm,
        derive_seed(config.seed, {0xF0D0u, static_cast<std::uint64_t>(step)}),
        config.threads);
    const double critical = quantile_upper(stats, 1.0 - config.alpha);

    int chosen = -1;
    double chosen_llr = 0.0;
    double best_llr = -1.0;
    int best_candidate = -1;
    for (int c : candidates) {
      bool ok = true;
      const double llr =
          candidate_llr(X_selected, X.col(c), y, spec, current, &ok);
      if (!ok) result.failed_fits.emplace_back(step, c);
      if (llr > best_llr) {
        best_llr = llr;
        best_candidate = c;
      }
      if (llr > critical) {
        chosen = c;
        chosen_llr = llr;
        break;
      }
    }

    const auto p_value_of = [&](double d) {
      const auto exceed = static_cast<double>(
          std::count_if(stats.begin(), stats.end(),
                        [&](double s) { return s >= d; }));
      return (1.0 + exceed) / (static_cast<double>(config.n_perm) + 1.0);
    };

    if (chosen < 0) {
      result.terminal_null_stats = stats;
      result.terminal_best_candidate = best_candidate;
      result.terminal_p_value = p_value_of(best_llr);
      break;
    }

    SelectionStep sel;
    sel.variable = chosen;
    sel.llr = chosen_llr;
    sel.critical_value = critical;
    sel.p_value = p_value_of(chosen_llr);
    sel.null_stats = stats;
    result.steps.push_back(std::move(sel));
    result.selected.push_back(chosen);
    candidates.erase(std::find(candidates.begin(), candidates.end(), chosen));

    Eigen::MatrixXd widened(n, X_selected.cols() + 1);
    if (X_selected.cols() > 0) widened.leftCols(X_selected.cols()) = X_selected;
    widened.col(X_selected.cols()) = X.col(chosen);
    X_selected = std::move(widened);
    current = fit_glm(X_selected, y, spec);

    if (static_cast<int>(result.steps.size()) >= max_steps) {
      result.hit_max_steps = true;
      result.terminal_null_stats = stats;
      break;
    }
  }

  if (result.terminal_null_stats.empty() && !result.steps.empty())
    result.terminal_null_stats = result.steps.back().null_stats;
  result.final_model = current;
  return result;
}

}  // namespace surf
