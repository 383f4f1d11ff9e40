#include "surf/stability.hpp"

#include <cmath>

#include "surf/parallel.hpp"
#include "surf/ranking.hpp"
#include "surf/rng.hpp"

namespace surf {

StabilityResult stability_select(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, const GlmSpec& spec,
                                 const StabilityConfig& config) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (n < 4) throw InputError("stability_select: need at least 4 observations");
  if (config.cutoff <= 0.5 || config.cutoff > 1.0)
    throw InputError("stability_select: cutoff must be in (0.5, 1]");
  if (config.ewv_bound <= 0.0)
    throw InputError("stability_select: ewv_bound must be positive");
  if (config.B < 1) throw InputError("stability_select: B must be >= 1");

  const int q = static_cast<int>(std::floor(std::sqrt(
      config.ewv_bound * (2.0 * config.cutoff - 1.0) * static_cast<double>(p))));
  if (q < 1) throw InputError("stability_select: bound too tight for p");

  std::vector<int> strata_storage;
  const std::vector<int>* strata = nullptr;
  if (spec.family == Family::binomial) {
    strata_storage.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      strata_storage[static_cast<std::size_t>(i)] = y(i) > 0.5 ? 1 : 0;
    strata = &strata_storage;
  }

  std::vector<std::vector<int>> picks(static_cast<std::size_t>(config.B));
  std::vector<char> completed(static_cast<std::size_t>(config.B), 0);

  parallel_tasks(config.B, config.threads, [&](int b) {
    Rng rng(derive_seed(config.seed, {0x57ABu, static_cast<std::uint64_t>(b)}));
    try {
      const auto rows = subsample_indices(n, config.fraction, strata, rng);
      Eigen::MatrixXd Xs(static_cast<Eigen::Index>(rows.size()), p);
      Eigen::VectorXd ys(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        Xs.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
        ys(static_cast<Eigen::Index>(i)) = y(rows[i]);
      }
      const LassoFit fit = lasso_path(Xs, ys, spec, nullptr, config.lasso);

      // Walk the path from lambda_max down, accumulating the union of active
      // sets until adding the next grid point would exceed q variables.
      std::vector<char> in_union(static_cast<std::size_t>(p), 0);
      int union_size = 0;
      const int L = static_cast<int>(fit.path.values.size());
      for (int l = 0; l < L; ++l) {
        int added = 0;
        for (int j = 0; j < p; ++j) {
          if (fit.coef_standardized(j, l) != 0.0 &&
              !in_union[static_cast<std::size_t>(j)])
            ++added;
        }
        if (union_size + added > q) break;
        for (int j = 0; j < p; ++j) {
          if (fit.coef_standardized(j, l) != 0.0 &&
              !in_union[static_cast<std::size_t>(j)]) {
            in_union[static_cast<std::size_t>(j)] = 1;
            ++union_size;
          }
        }
      }
      auto& sel = picks[static_cast<std::size_t>(b)];
      for (int j = 0; j < p; ++j) {
        if (in_union[static_cast<std::size_t>(j)]) sel.push_back(j);
      }
      completed[static_cast<std::size_t>(b)] = 1;
    } catch (const InputError&) {
      // degenerate subsample; skipped
    } catch (const NumericError&) {
    }
  });

  StabilityResult result;
  result.per_subsample_cap = q;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(p);
  for (int b = 0; b < config.B; ++b) {
    if (!completed[static_cast<std::size_t>(b)]) {
      ++result.skipped;
      continue;
    }
    ++result.completed;
    for (int j : picks[static_cast<std::size_t>(b)]) counts(j) += 1.0;
  }
  if (result.completed == 0)
    throw NumericError("stability_select: every subsample was degenerate");

  result.frequency = counts / static_cast<double>(result.completed);
  for (int j = 0; j < p; ++j) {
    if (result.frequency(j) >= config.cutoff) result.selected.push_back(j);
  }
  return result;
}

}  // namespace surf
