#include "surf/lasso.hpp"

#include <algorithm>
#include <cmath>

#include "surf/parallel.hpp"
#include "surf/rng.hpp"

namespace surf {

namespace {

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

struct Standardized {
  Eigen::MatrixXd Xs;
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

Standardized standardize(const Eigen::MatrixXd& X) {
  const auto n = X.rows();
  const auto p = X.cols();
  Standardized s;
  s.Xs.resize(n, p);
  s.mean.resize(p);
  s.sd.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double m = X.col(j).mean();
    const double var = (X.col(j).array() - m).square().sum() / static_cast<double>(n);
    s.mean(j) = m;
    if (var > 0.0) {
      s.sd(j) = std::sqrt(var);
      s.Xs.col(j) = (X.col(j).array() - m) / s.sd(j);
    } else {
      s.sd(j) = 0.0;
      s.Xs.col(j).setZero();
    }
  }
  return s;
}

double intercept_only_mean(Family family, const Eigen::VectorXd& y) {
  const double ybar = y.mean();
  return detail::clamp_mu(family, ybar);
}

// State for one penalized fit over the whole path.
struct CdWorkspace {
  Eigen::VectorXd beta;    // standardized scale
  double b0 = 0.0;
  Eigen::VectorXd r;       // working residual z - b0 - Xs*beta
  Eigen::VectorXd w;       // IRLS weights (all ones for gaussian)
  Eigen::VectorXd wx2;     // sum(w * xs_j^2)/n per column
  double wsum = 0.0;
  std::vector<int> active;
  std::vector<char> is_active;
};

// One cyclic sweep; returns the largest coordinate move. Sweeps either the
// full column set or only the current active set.
double cd_sweep(const Standardized& s, double lambda, bool full,
                CdWorkspace& ws) {
  const auto n = static_cast<double>(s.Xs.rows());
  const auto p = static_cast<int>(s.Xs.cols());
  double max_delta = 0.0;

  auto update = [&](int j) {
    if (s.sd(j) == 0.0 || ws.wx2[j] <= 0.0) return;
    const auto xj = s.Xs.col(j);
    const double grad =
        (ws.w.array() * ws.r.array() * xj.array()).sum() / n;
    const double u = grad + ws.wx2[j] * ws.beta(j);
    const double bj = soft_threshold(u, lambda) / ws.wx2[j];
    const double delta = bj - ws.beta(j);
    if (delta != 0.0) {
      ws.beta(j) = bj;
      ws.r -= delta * xj;
      max_delta = std::max(max_delta, std::abs(delta));
      if (bj != 0.0 && !ws.is_active[static_cast<std::size_t>(j)]) {
        ws.is_active[static_cast<std::size_t>(j)] = 1;
        ws.active.push_back(j);
      }
    }
  };

  if (full) {
    for (int j = 0; j < p; ++j) update(j);
  } else {
    for (int j : ws.active) update(j);
  }

  const double d0 = (ws.w.array() * ws.r.array()).sum() / ws.wsum;
  if (d0 != 0.0) {
    ws.b0 += d0;
    ws.r.array() -= d0;
    max_delta = std::max(max_delta, std::abs(d0));
  }
  return max_delta;
}

// Coordinate descent to stationarity on the current quadratic. Returns the
// largest move seen in the first full sweep, which an IRLS caller uses as its
// outer convergence measure.
double cd_solve(const Standardized& s, double lambda, const LassoOptions& opt,
                int& sweep_budget, std::vector<double>* objective_trace,
                const Eigen::VectorXd* y_for_trace, CdWorkspace& ws) {
  double first_move = -1.0;
  bool full = true;
  while (sweep_budget > 0) {
    --sweep_budget;
    const double moved = cd_sweep(s, lambda, full, ws);
    if (objective_trace != nullptr && y_for_trace != nullptr) {
      // Gaussian objective: (1/2n)||y - b0 - Xs beta||^2 + lambda*||beta||_1.
      const double quad =
          0.5 * ws.r.squaredNorm() / static_cast<double>(s.Xs.rows());
      objective_trace->push_back(quad + lambda * ws.beta.lpNorm<1>());
    }
    if (first_move < 0.0) first_move = moved;
    if (moved < opt.coord_tol) {
      if (full) break;
      full = true;
    } else {
      full = false;
    }
  }
  return first_move;
}

}  // namespace

LambdaPath make_lambda_path(double lambda_max, int n, int p, int length,
                            double min_ratio) {
  if (lambda_max <= 0.0)
    throw InputError("make_lambda_path: lambda_max must be positive");
  if (length < 2) throw InputError("make_lambda_path: need at least 2 values");
  if (min_ratio <= 0.0) min_ratio = (n < p) ? 0.01 : 1e-4;
  LambdaPath path;
  path.lambda_max = lambda_max;
  path.min_ratio = min_ratio;
  path.values.resize(length);
  for (int i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(length - 1);
    path.values(i) = lambda_max * std::pow(min_ratio, t);
  }
  return path;
}

LassoFit lasso_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const GlmSpec& spec, const LambdaPath* path,
                    const LassoOptions& options) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (p < 1) throw InputError("lasso_path: need at least one column");
  if (n != y.size()) throw InputError("lasso_path: dimension mismatch");
  if (!X.allFinite() || !y.allFinite())
    throw InputError("lasso_path: non-finite values in input");
  if (spec.family == Family::binomial) {
    const double ybar = y.mean();
    if (ybar <= 0.0 || ybar >= 1.0) throw InputError("degenerate response");
  }

  const Standardized s = standardize(X);
  const double mu0 = intercept_only_mean(spec.family, y);

  LambdaPath grid;
  if (path != nullptr) {
    grid = *path;
  } else {
    double gmax = 0.0;
    for (int j = 0; j < p; ++j) {
      if (s.sd(j) == 0.0) continue;
      const double g =
          std::abs(s.Xs.col(j).dot(y - Eigen::VectorXd::Constant(n, mu0))) /
          static_cast<double>(n);
      gmax = std::max(gmax, g);
    }
    if (gmax <= 0.0) throw InputError("degenerate response");
    // Tiny inflation keeps the head of the path exactly sparse in floating
    // point across all families.
    grid = make_lambda_path(gmax * (1.0 + 1e-10), n, p, options.path_length);
  }
  const int L = static_cast<int>(grid.values.size());

  LassoFit fit;
  fit.family = spec.family;
  fit.path = grid;
  fit.column_mean = s.mean;
  fit.column_sd = s.sd;
  fit.coef_standardized = Eigen::MatrixXd::Zero(p, L);
  fit.coef_original = Eigen::MatrixXd::Zero(p, L);
  fit.intercepts.resize(L);

  CdWorkspace ws;
  ws.beta = Eigen::VectorXd::Zero(p);
  ws.is_active.assign(static_cast<std::size_t>(p), 0);
  switch (spec.family) {
    case Family::gaussian: ws.b0 = y.mean(); break;
    case Family::binomial: ws.b0 = std::log(mu0 / (1.0 - mu0)); break;
    case Family::poisson: ws.b0 = std::log(mu0); break;
  }

  Eigen::VectorXd eta(n), mu(n), z(n);
  for (int l = 0; l < L; ++l) {
    const double lambda = grid.values(l);
    int sweep_budget = options.max_sweeps;

    if (spec.family == Family::gaussian) {
      ws.w = Eigen::VectorXd::Ones(n);
      ws.wsum = n;
      if (l == 0) {
        ws.wx2 = Eigen::VectorXd::Ones(p);
        for (int j = 0; j < p; ++j) {
          if (s.sd(j) == 0.0) ws.wx2[j] = 0.0;
        }
        ws.r = y - Eigen::VectorXd::Constant(n, ws.b0);
      }
      cd_solve(s, lambda, options, sweep_budget,
               options.sweep_objective_trace, &y, ws);
    } else {
      ws.w.resize(n);
      for (int round = 0; round < options.max_irls; ++round) {
        eta = Eigen::VectorXd::Constant(n, ws.b0);
        for (int j : ws.active) {
          if (ws.beta(j) != 0.0) eta += ws.beta(j) * s.Xs.col(j);
        }
        for (int i = 0; i < n; ++i) {
          mu(i) = detail::inverse_link(spec.family, eta(i));
          const double v =
              std::max(detail::variance_function(spec.family, mu(i)), 1e-10);
          ws.w(i) = v;
          z(i) = eta(i) + (y(i) - mu(i)) / v;
        }
        ws.wsum = ws.w.sum();
        ws.wx2.resize(p);
        for (int j = 0; j < p; ++j) {
          ws.wx2[j] = s.sd(j) == 0.0
                          ? 0.0
                          : (ws.w.array() * s.Xs.col(j).array().square()).sum() /
                                static_cast<double>(n);
        }
        ws.r = z - eta;
        const double outer_move =
            cd_solve(s, lambda, options, sweep_budget, nullptr, nullptr, ws);
        if (outer_move < options.coord_tol || sweep_budget <= 0) break;
      }
    }

    fit.coef_standardized.col(l) = ws.beta;
    double shift = 0.0;
    for (int j = 0; j < p; ++j) {
      if (ws.beta(j) != 0.0 && s.sd(j) > 0.0) {
        const double bo = ws.beta(j) / s.sd(j);
        fit.coef_original(j, l) = bo;
        shift += bo * s.mean(j);
      }
    }
    fit.intercepts(l) = ws.b0 - shift;
  }
  return fit;
}

std::vector<int> active_set(const LassoFit& fit, double lambda) {
  const int L = static_cast<int>(fit.path.values.size());
  int best = 0;
  double best_dist = std::abs(fit.path.values(0) - lambda);
  for (int l = 1; l < L; ++l) {
    const double d = std::abs(fit.path.values(l) - lambda);
    if (d < best_dist) {
      best_dist = d;
      best = l;
    }
  }
  std::vector<int> idx;
  for (int j = 0; j < fit.coef_standardized.rows(); ++j) {
    if (fit.coef_standardized(j, best) != 0.0) idx.push_back(j);
  }
  return idx;
}

namespace {

// Per-fold mean held-out deviance for every lambda on the grid.
Eigen::VectorXd fold_losses(const LassoFit& fit, const Eigen::MatrixXd& Xout,
                            const Eigen::VectorXd& yout, Family family) {
  const int L = static_cast<int>(fit.path.values.size());
  Eigen::MatrixXd eta = Xout * fit.coef_original;  // n_out x L
  eta.rowwise() += fit.intercepts.transpose();
  Eigen::VectorXd loss(L);
  for (int l = 0; l < L; ++l) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < yout.size(); ++i) {
      acc += unit_deviance(family, yout(i),
                           detail::inverse_link(family, eta(i, l)));
    }
    loss(l) = acc / static_cast<double>(yout.size());
  }
  return loss;
}

std::vector<int> draw_fold_assignment(const Eigen::VectorXd& y, Family family,
                                      int k, std::uint64_t seed) {
  const int n = static_cast<int>(y.size());
  std::vector<int> fold(static_cast<std::size_t>(n), 0);
  Rng rng(seed);
  if (family == Family::binomial) {
    for (int cls = 0; cls <= 1; ++cls) {
      std::vector<int> members;
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>(y(i)) == cls) members.push_back(i);
      }
      const auto perm = rng.permutation(static_cast<int>(members.size()));
      for (std::size_t t = 0; t < members.size(); ++t) {
        fold[static_cast<std::size_t>(
            members[static_cast<std::size_t>(perm[t])])] =
            static_cast<int>(t) % k;
      }
    }
  } else {
    const auto perm = rng.permutation(n);
    for (int t = 0; t < n; ++t) {
      fold[static_cast<std::size_t>(perm[static_cast<std::size_t>(t)])] = t % k;
    }
  }
  return fold;
}

bool folds_trainable(const Eigen::VectorXd& y, Family family,
                     const std::vector<int>& fold, int k) {
  if (family != Family::binomial) return true;
  for (int f = 0; f < k; ++f) {
    int ones = 0, zeros = 0;
    for (std::size_t i = 0; i < fold.size(); ++i) {
      if (fold[i] == f) continue;
      if (y(static_cast<Eigen::Index>(i)) > 0.5) {
        ++ones;
      } else {
        ++zeros;
      }
    }
    if (ones == 0 || zeros == 0) return false;
  }
  return true;
}

}  // namespace

double chosen_lambda(const CvResult& cv, LambdaRule rule) {
  return rule == LambdaRule::one_se ? cv.lambda_1se : cv.lambda_min;
}

CvResult cross_validate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const GlmSpec& spec, int k, std::uint64_t seed,
                        const LassoOptions& options, int threads) {
  const int n = static_cast<int>(X.rows());
  if (k < 2) throw InputError("cross_validate: need k >= 2 folds");
  if (k > n) throw InputError("cross_validate: more folds than observations");

  CvResult cv;
  cv.fold_count = k;
  cv.fit = lasso_path(X, y, spec, nullptr, options);
  const int L = static_cast<int>(cv.fit.path.values.size());

  std::vector<int> fold;
  bool ok = false;
  for (int attempt = 0; attempt < 10; ++attempt) {
    fold = draw_fold_assignment(y, spec.family, k,
                                derive_seed(seed, {0xCFu, static_cast<std::uint64_t>(attempt)}));
    if (folds_trainable(y, spec.family, fold, k)) {
      ok = true;
      break;
    }
  }
  if (!ok)
    throw NumericError("cross_validate: could not draw folds with both classes "
                       "in every training set");

  Eigen::MatrixXd fold_mean(k, L);
  parallel_tasks(k, threads, [&](int f) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) {
      (fold[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    }
    Eigen::MatrixXd Xtr(train.size(), X.cols()), Xte(test.size(), X.cols());
    Eigen::VectorXd ytr(train.size()), yte(test.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train[i]);
      ytr(static_cast<Eigen::Index>(i)) = y(train[i]);
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
      Xte.row(static_cast<Eigen::Index>(i)) = X.row(test[i]);
      yte(static_cast<Eigen::Index>(i)) = y(test[i]);
    }
    const LassoFit ffit = lasso_path(Xtr, ytr, spec, &cv.fit.path, options);
    fold_mean.row(f) = fold_losses(ffit, Xte, yte, spec.family).transpose();
  });

  cv.mean_cv_error = fold_mean.colwise().mean().transpose();
  cv.se_cv_error.resize(L);
  for (int l = 0; l < L; ++l) {
    const double m = cv.mean_cv_error(l);
    double ss = 0.0;
    for (int f = 0; f < k; ++f) {
      const double d = fold_mean(f, l) - m;
      ss += d * d;
    }
    cv.se_cv_error(l) = std::sqrt(ss / (k - 1)) / std::sqrt(static_cast<double>(k));
  }

  cv.lambda_min_index = 0;
  for (int l = 1; l < L; ++l) {
    if (cv.mean_cv_error(l) < cv.mean_cv_error(cv.lambda_min_index))
      cv.lambda_min_index = l;
  }
  const double threshold =
      cv.mean_cv_error(cv.lambda_min_index) + cv.se_cv_error(cv.lambda_min_index);
  cv.lambda_1se_index = cv.lambda_min_index;
  for (int l = 0; l <= cv.lambda_min_index; ++l) {
    if (cv.mean_cv_error(l) <= threshold) {
      cv.lambda_1se_index = l;
      break;
    }
  }
  cv.lambda_min = cv.fit.path.values(cv.lambda_min_index);
  cv.lambda_1se = cv.fit.path.values(cv.lambda_1se_index);
  return cv;
}

}  // namespace surf
