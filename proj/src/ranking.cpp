#include "surf/ranking.hpp"

#include <algorithm>
#include <cmath>

#include "surf/glm.hpp"
#include "surf/parallel.hpp"

namespace surf {

std::vector<int> subsample_indices(int n, double fraction,
                                   const std::vector<int>* strata, Rng& rng) {
  if (n < 1) throw InputError("subsample_indices: empty population");
  if (fraction <= 0.0 || fraction >= 1.0)
    throw InputError("subsample_indices: fraction must be in (0, 1)");

  if (strata == nullptr) {
    const int m = static_cast<int>(std::lround(fraction * n));
    if (m < 1) throw InputError("subsample_indices: stratum too small");
    return rng.sample_without_replacement(n, m);
  }

  if (static_cast<int>(strata->size()) != n)
    throw InputError("subsample_indices: strata length mismatch");
  std::vector<int> classes(*strata);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::vector<int> out;
  for (int cls : classes) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
      if ((*strata)[static_cast<std::size_t>(i)] == cls) members.push_back(i);
    }
    const int m =
        static_cast<int>(std::lround(fraction * static_cast<double>(members.size())));
    if (m < 1) throw InputError("subsample_indices: stratum too small");
    for (int local : rng.sample_without_replacement(
             static_cast<int>(members.size()), m)) {
      out.push_back(members[static_cast<std::size_t>(local)]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

Eigen::VectorXd take_elements(const Eigen::VectorXd& y, const std::vector<int>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = y(rows[i]);
  return out;
}

Eigen::MatrixXd take_columns(const Eigen::MatrixXd& X, const std::vector<int>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
  return out;
}

// Orders a tied-frequency group by greedy deviance reduction against the
// model on all columns ranked so far. Once the base model's deviance hits
// zero no candidate can reduce it, so the remainder keeps index order.
void resolve_tie_group(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const GlmSpec& spec, std::vector<int>& resolved,
                       std::vector<int> group) {
  std::sort(group.begin(), group.end());
  if (group.size() == 1) {
    resolved.push_back(group.front());
    return;
  }

  GlmFit base;
  bool base_ok = true;
  try {
    base = fit_glm(take_columns(X, resolved), y, spec);
  } catch (const std::exception&) {
    base_ok = false;
  }
  const double dev_floor = 1e-6 * static_cast<double>(y.size());

  while (!group.empty()) {
    if (!base_ok || base.deviance <= dev_floor) {
      resolved.insert(resolved.end(), group.begin(), group.end());
      return;
    }

    int best = group.front();
    double best_reduction = -1.0;
    GlmFit best_fit;
    bool best_fit_ok = false;
    for (int candidate : group) {
      std::vector<int> cols(resolved);
      cols.push_back(candidate);
      double reduction = 0.0;
      GlmFit alt;
      bool alt_ok = false;
      try {
        GlmFit start = base;
        start.coefficients.conservativeResize(
            static_cast<Eigen::Index>(cols.size()));
        start.coefficients(static_cast<Eigen::Index>(cols.size()) - 1) = 0.0;
        GlmOptions opt;
        opt.start = &start;
        alt = fit_glm(take_columns(X, cols), y, spec, opt);
        reduction = std::max(base.deviance - alt.deviance, 0.0);
        alt_ok = true;
      } catch (const std::exception&) {
        reduction = 0.0;
      }
      // Strict improvement keeps exact ties on the lowest column index.
      if (reduction > best_reduction) {
        best_reduction = reduction;
        best = candidate;
        best_fit = alt;
        best_fit_ok = alt_ok;
      }
    }
    resolved.push_back(best);
    group.erase(std::find(group.begin(), group.end(), best));
    if (group.empty()) break;
    if (best_fit_ok) {
      base = best_fit;
    } else {
      try {
        base = fit_glm(take_columns(X, resolved), y, spec);
        base_ok = true;
      } catch (const std::exception&) {
        base_ok = false;
      }
    }
  }
}

}  // namespace

VariableRanking rank_variables(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, const GlmSpec& spec,
                               const RankingConfig& config) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (p < 1) throw InputError("rank_variables: need at least one column");
  if (config.B < 1) throw InputError("rank_variables: B must be >= 1");
  if (config.fraction <= 0.0 || config.fraction >= 1.0)
    throw InputError("rank_variables: fraction must be in (0, 1)");

  std::vector<int> strata_storage;
  const std::vector<int>* strata = nullptr;
  if (config.stratified && spec.family == Family::binomial) {
    strata_storage.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      strata_storage[static_cast<std::size_t>(i)] = y(i) > 0.5 ? 1 : 0;
    strata = &strata_storage;
  }

  // One slot per subsample so any scheduling aggregates identically.
  std::vector<std::vector<int>> picks(static_cast<std::size_t>(config.B));
  std::vector<char> completed(static_cast<std::size_t>(config.B), 0);

  parallel_tasks(config.B, config.threads, [&](int b) {
    Rng rng(derive_seed(config.seed, {0x5ABu, static_cast<std::uint64_t>(b)}));
    try {
      const auto rows = subsample_indices(n, config.fraction, strata, rng);
      const Eigen::MatrixXd Xs = take_rows(X, rows);
      const Eigen::VectorXd ys = take_elements(y, rows);
      const CvResult cv = cross_validate(
          Xs, ys, spec, config.cv_folds,
          derive_seed(config.seed, {0xCFAu, static_cast<std::uint64_t>(b)}),
          config.lasso, 1);
      picks[static_cast<std::size_t>(b)] =
          active_set(cv.fit, chosen_lambda(cv, config.lambda_rule));
      completed[static_cast<std::size_t>(b)] = 1;
    } catch (const InputError&) {
      // degenerate subsample; skipped
    } catch (const NumericError&) {
      // fold drawing failed; skipped
    }
  });

  VariableRanking ranking;
  ranking.frequency.assign(static_cast<std::size_t>(p), 0);
  for (int b = 0; b < config.B; ++b) {
    if (!completed[static_cast<std::size_t>(b)]) {
      ++ranking.skipped;
      continue;
    }
    ++ranking.completed;
    for (int j : picks[static_cast<std::size_t>(b)])
      ++ranking.frequency[static_cast<std::size_t>(j)];
  }
  if (ranking.skipped > config.B / 10)
    throw NumericError("rank_variables: more than 10% of subsamples skipped (" +
                       std::to_string(ranking.skipped) + " of " +
                       std::to_string(config.B) + ")");

  std::vector<int> by_count(static_cast<std::size_t>(p));
  std::iota(by_count.begin(), by_count.end(), 0);
  std::stable_sort(by_count.begin(), by_count.end(), [&](int a, int b) {
    return ranking.frequency[static_cast<std::size_t>(a)] >
           ranking.frequency[static_cast<std::size_t>(b)];
  });

  ranking.order.reserve(static_cast<std::size_t>(p));
  std::size_t start = 0;
  while (start < by_count.size()) {
    std::size_t end = start;
    while (end < by_count.size() &&
           ranking.frequency[static_cast<std::size_t>(by_count[end])] ==
               ranking.frequency[static_cast<std::size_t>(by_count[start])]) {
      ++end;
    }
    resolve_tie_group(X, y, spec, ranking.order,
                      {by_count.begin() + static_cast<std::ptrdiff_t>(start),
                       by_count.begin() + static_cast<std::ptrdiff_t>(end)});
    start = end;
  }
  return ranking;
}

}  // namespace surf
