#include "surf/glm.hpp"

#include <cmath>
#include <limits>

namespace surf {

namespace {

constexpr double kProbClamp = 1e-8;
constexpr double kMuFloor = 1e-10;
constexpr double kMuCeil = 1e10;
constexpr double kRssFloor = 1e-300;

double log1p_exp(double x) {
  // log(1 + e^x) without overflow.
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::binomial: return "binomial";
    case Family::poisson: return "poisson";
  }
  return "unknown";
}

const char* link_name(Family f) {
  switch (f) {
    case Family::gaussian: return "identity";
    case Family::binomial: return "logit";
    case Family::poisson: return "log";
  }
  return "unknown";
}

Family family_from_name(const std::string& name) {
  if (name == "gaussian") return Family::gaussian;
  if (name == "binomial") return Family::binomial;
  if (name == "poisson") return Family::poisson;
  throw InputError("unknown family: " + name);
}

namespace detail {

double clamp_mu(Family family, double mu) {
  switch (family) {
    case Family::gaussian:
      return mu;
    case Family::binomial:
      return std::min(1.0 - kProbClamp, std::max(kProbClamp, mu));
    case Family::poisson:
      return std::min(kMuCeil, std::max(kMuFloor, mu));
  }
  return mu;
}

double variance_function(Family family, double mu) {
  switch (family) {
    case Family::gaussian: return 1.0;
    case Family::binomial: return mu * (1.0 - mu);
    case Family::poisson: return mu;
  }
  return 1.0;
}

double inverse_link(Family family, double eta) {
  switch (family) {
    case Family::gaussian:
      return eta;
    case Family::binomial:
      return clamp_mu(family, 1.0 / (1.0 + std::exp(-eta)));
    case Family::poisson:
      return clamp_mu(family, std::exp(std::min(eta, 40.0)));
  }
  return eta;
}

PivotedSolve solve_semidefinite(Eigen::MatrixXd A, Eigen::VectorXd b,
                                double tol) {
  const int m = static_cast<int>(A.rows());
  PivotedSolve out;
  out.x = Eigen::VectorXd::Zero(m);
  if (m == 0) return out;

  // Equilibrate so pivot magnitudes are comparable across columns.
  Eigen::VectorXd scale(m);
  for (int i = 0; i < m; ++i) {
    const double d = A(i, i);
    scale(i) = d > 0.0 ? std::sqrt(d) : 0.0;
  }
  for (int i = 0; i < m; ++i) {
    if (scale(i) == 0.0) continue;
    b(i) /= scale(i);
    for (int j = 0; j < m; ++j) {
      if (scale(j) == 0.0) continue;
      A(i, j) /= scale(i) * scale(j);
    }
  }

  std::vector<bool> eliminated(static_cast<std::size_t>(m), false);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(m));
  double largest_pivot = 0.0;
  for (int step = 0; step < m; ++step) {
    int pivot = -1;
    double best = -1.0;
    for (int i = 0; i < m; ++i) {
      if (eliminated[static_cast<std::size_t>(i)]) continue;
      if (A(i, i) > best) {
        best = A(i, i);
        pivot = i;
      }
    }
    if (pivot < 0) break;
    largest_pivot = std::max(largest_pivot, best);
    if (best <= tol * largest_pivot || scale(pivot) == 0.0) {
      for (int i = 0; i < m; ++i) {
        if (!eliminated[static_cast<std::size_t>(i)])
          out.dropped.push_back(i);
      }
      break;
    }
    eliminated[static_cast<std::size_t>(pivot)] = true;
    order.push_back(pivot);
    const double inv = 1.0 / A(pivot, pivot);
    for (int i = 0; i < m; ++i) {
      if (eliminated[static_cast<std::size_t>(i)]) continue;
      const double factor = A(i, pivot) * inv;
      if (factor == 0.0) continue;
      for (int j = 0; j < m; ++j) {
        if (eliminated[static_cast<std::size_t>(j)] && j != pivot) continue;
        A(i, j) -= factor * A(pivot, j);
      }
      b(i) -= factor * b(pivot);
    }
  }

  // Back substitution over the pivot sequence in reverse.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int i = *it;
    double sum = b(i);
    for (int j : order) {
      if (j == i) continue;
      sum -= A(i, j) * out.x(j);
    }
    out.x(i) = sum / A(i, i);
  }
  for (int i = 0; i < m; ++i) {
    if (scale(i) > 0.0) out.x(i) /= scale(i);
  }
  std::sort(out.dropped.begin(), out.dropped.end());
  return out;
}

}  // namespace detail

namespace {

void validate_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const GlmSpec& spec) {
  if (y.size() < 1) throw InputError("fit_glm: empty response");
  if (X.rows() != y.size())
    throw InputError("fit_glm: design has " + std::to_string(X.rows()) +
                     " rows but response has " + std::to_string(y.size()));
  if (!X.allFinite() || !y.allFinite())
    throw InputError("fit_glm: non-finite values in input");
  if (spec.family == Family::binomial) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y(i) != 0.0 && y(i) != 1.0)
        throw InputError("fit_glm: binomial response must be 0/1");
    }
  }
  if (spec.family == Family::poisson) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y(i) < 0.0 || y(i) != std::floor(y(i)))
        throw InputError("fit_glm: poisson response must be non-negative integers");
    }
  }
}

double deviance_of(Family family, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& mu) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    dev += unit_deviance(family, y(i), mu(i));
  return dev;
}

double log_likelihood_of(Family family, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& mu, double deviance) {
  const auto n = static_cast<double>(y.size());
  switch (family) {
    case Family::gaussian: {
      const double rss = std::max(deviance, kRssFloor);
      return -0.5 * n * (std::log(2.0 * M_PI * rss / n) + 1.0);
    }
    case Family::binomial: {
      double ll = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i)
        ll += y(i) * std::log(mu(i)) + (1.0 - y(i)) * std::log(1.0 - mu(i));
      return ll;
    }
    case Family::poisson: {
      double ll = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i)
        ll += y(i) * std::log(mu(i)) - mu(i) - std::lgamma(y(i) + 1.0);
      return ll;
    }
  }
  return 0.0;
}

}  // namespace

double unit_deviance(Family family, double y, double mu) {
  switch (family) {
    case Family::gaussian: {
      const double r = y - mu;
      return r * r;
    }
    case Family::binomial: {
      const double m = detail::clamp_mu(family, mu);
      // Saturated log-likelihood is 0 for a 0/1 response.
      return -2.0 * (y * std::log(m) + (1.0 - y) * std::log(1.0 - m));
    }
    case Family::poisson: {
      const double m = detail::clamp_mu(family, mu);
      const double term = y > 0.0 ? y * std::log(y / m) : 0.0;
      return 2.0 * (term - (y - m));
    }
  }
  return 0.0;
}

GlmFit fit_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               const GlmSpec& spec, const GlmOptions& options) {
  validate_inputs(X, y, spec);
  const int n = static_cast<int>(y.size());
  const int k = static_cast<int>(X.cols());

  GlmFit fit;
  fit.family = spec.family;
  fit.coefficients = Eigen::VectorXd::Zero(k);

  Eigen::VectorXd eta(n), mu(n);
  if (options.start != nullptr &&
      options.start->coefficients.size() == static_cast<Eigen::Index>(k)) {
    eta = Eigen::VectorXd::Constant(n, options.start->intercept);
    if (k > 0) eta += X * options.start->coefficients;
    for (int i = 0; i < n; ++i) mu(i) = detail::inverse_link(spec.family, eta(i));
  } else {
    // Standard mean initialisation.
    switch (spec.family) {
      case Family::gaussian:
        mu = y;
        eta = mu;
        break;
      case Family::binomial:
        for (int i = 0; i < n; ++i) {
          mu(i) = (y(i) + 0.5) / 2.0;
          eta(i) = std::log(mu(i) / (1.0 - mu(i)));
        }
        break;
      case Family::poisson:
        for (int i = 0; i < n; ++i) {
          mu(i) = std::max(y(i), 0.1);
          eta(i) = std::log(mu(i));
        }
        break;
    }
  }

  const int m = k + 1;  // intercept first
  Eigen::MatrixXd A(m, m);
  Eigen::VectorXd rhs(m);
  Eigen::VectorXd w(n), z(n);
  double deviance = deviance_of(spec.family, y, mu);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    fit.iterations = iter;
    for (int i = 0; i < n; ++i) {
      // Canonical link: d(mu)/d(eta) equals the variance function.
      const double v = std::max(detail::variance_function(spec.family, mu(i)),
                                1e-10);
      w(i) = v;
      z(i) = eta(i) + (y(i) - mu(i)) / v;
    }

    A(0, 0) = w.sum();
    rhs(0) = w.dot(z);
    for (int j = 0; j < k; ++j) {
      const auto xj = X.col(j);
      A(0, j + 1) = A(j + 1, 0) = w.dot(xj);
      rhs(j + 1) = (w.array() * z.array() * xj.array()).sum();
      for (int l = 0; l <= j; ++l) {
        A(l + 1, j + 1) = A(j + 1, l + 1) =
            (w.array() * xj.array() * X.col(l).array()).sum();
      }
    }

    auto solved = detail::solve_semidefinite(A, rhs, options.pivot_tolerance);
    fit.intercept = solved.x(0);
    for (int j = 0; j < k; ++j) fit.coefficients(j) = solved.x(j + 1);
    fit.dropped_columns.clear();
    for (int idx : solved.dropped) {
      if (idx == 0) continue;  // intercept never competes with data columns
      fit.dropped_columns.push_back(idx - 1);
    }
    fit.rank_deficient = !fit.dropped_columns.empty();

    eta = Eigen::VectorXd::Constant(n, fit.intercept);
    if (k > 0) eta += X * fit.coefficients;
    for (int i = 0; i < n; ++i) mu(i) = detail::inverse_link(spec.family, eta(i));

    const double new_deviance = deviance_of(spec.family, y, mu);
    const double rel =
        std::abs(new_deviance - deviance) / (std::abs(new_deviance) + 0.1);
    deviance = new_deviance;
    if (rel < options.tolerance || spec.family == Family::gaussian) {
      fit.converged = true;
      break;
    }
  }

  fit.deviance = deviance;
  fit.log_likelihood = log_likelihood_of(spec.family, y, mu, deviance);
  return fit;
}

double log_likelihood_ratio(const GlmFit& null_fit, const GlmFit& alt_fit,
                            int n) {
  double d;
  if (null_fit.family == Family::gaussian) {
    const double rss0 = std::max(null_fit.deviance, kRssFloor);
    const double floor1 = std::max(1e-12 * rss0, kRssFloor);
    const double rss1 = std::max(alt_fit.deviance, floor1);
    d = static_cast<double>(n) * std::log(rss0 / rss1);
  } else {
    d = 2.0 * (alt_fit.log_likelihood - null_fit.log_likelihood);
  }
  if (d < -1e-6)
    throw NumericError(
        "log_likelihood_ratio: non-nested deviances (D = " + std::to_string(d) +
        "); upstream fit did not converge");
  return std::max(d, 0.0);
}

Eigen::VectorXd fitted_mean(const GlmFit& fit, const Eigen::MatrixXd& X) {
  Eigen::VectorXd eta =
      Eigen::VectorXd::Constant(X.rows(), fit.intercept);
  if (fit.coefficients.size() > 0) {
    if (X.cols() != fit.coefficients.size())
      throw InputError("fitted_mean: column count mismatch");
    eta += X * fit.coefficients;
  }
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    eta(i) = detail::inverse_link(fit.family, eta(i));
  return eta;
}

}  // namespace surf
