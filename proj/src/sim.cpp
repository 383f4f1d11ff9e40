#include "surf/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "surf/glm.hpp"
#include "surf/io.hpp"
#include "surf/lasso.hpp"
#include "surf/parallel.hpp"

namespace surf {

namespace {

double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

double default_intercept(Family family) {
  // Binomial scenarios center the class balance on 0.3.
  return family == Family::binomial ? std::log(0.3 / 0.7) : 0.0;
}

double population_variance(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size());
}

}  // namespace

Eigen::MatrixXd make_synthetic_design(const SynthDesignConfig& config,
                                      std::uint64_t seed) {
  if (config.n < 1 || config.p < 1)
    throw InputError("make_synthetic_design: n and p must be positive");
  if (config.correlation < 0.0 || config.correlation >= 1.0)
    throw InputError("make_synthetic_design: correlation must be in [0, 1)");
  const int block = std::max(1, config.block_size);

  Rng rng(derive_seed(seed, {0xDE516Eu}));
  Eigen::MatrixXd X(config.n, config.p);

  // Per-column abundance offsets on the log scale.
  std::vector<double> offsets(static_cast<std::size_t>(config.p));
  for (auto& o : offsets) o = 2.0 * rng.uniform01() - 1.0;

  const double a = std::sqrt(config.correlation);
  const double b = std::sqrt(1.0 - config.correlation);
  for (int i = 0; i < config.n; ++i) {
    double shared = rng.normal();
    for (int j = 0; j < config.p; ++j) {
      if (j % block == 0 && j > 0) shared = rng.normal();
      const double latent = a * shared + b * rng.normal();
      X(i, j) = std::exp(offsets[static_cast<std::size_t>(j)] +
                         config.log_sigma * latent);
    }
  }

  if (config.surrogate_pair && config.p >= 2) {
    for (int i = 0; i < config.n; ++i) {
      X(i, 1) = X(i, 0) * (1.0 + config.surrogate_noise * rng.normal());
    }
  }

  if (config.compositional) {
    for (int i = 0; i < config.n; ++i) {
      const double row_sum = X.row(i).sum();
      X.row(i) /= row_sum;
    }
  }
  return X;
}

double empirical_snr(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                     double intercept, Family family) {
  const Eigen::VectorXd eta =
      (X * beta).array() + intercept;
  switch (family) {
    case Family::binomial: {
      Eigen::VectorXd prob(eta.size());
      for (Eigen::Index i = 0; i < eta.size(); ++i) prob(i) = logistic(eta(i));
      const double denom =
          (prob.array() * (1.0 - prob.array())).mean();
      const double var_p = population_variance(prob);
      // Fully saturated probabilities carry no signal-to-noise information.
      if (denom <= 1e-300) return var_p > 1e-300
                                      ? std::numeric_limits<double>::infinity()
                                      : 0.0;
      return var_p / denom;
    }
    case Family::gaussian:
      // Irreducible error fixed at 1.
      return population_variance(eta);
    case Family::poisson:
      throw InputError("empirical_snr: poisson scenarios are not supported");
  }
  return 0.0;
}

Eigen::VectorXd calibrate_snr(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& beta_direction,
                              double intercept, Family family,
                              double target_snr) {
  if (beta_direction.size() != X.cols())
    throw InputError("calibrate_snr: direction length mismatch");
  if (beta_direction.lpNorm<Eigen::Infinity>() == 0.0)
    throw InputError("calibrate_snr: beta_direction must be nonzero");
  if (target_snr <= 0.0)
    throw InputError("calibrate_snr: target_snr must be positive");

  if (family == Family::gaussian) {
    const double var = population_variance(X * beta_direction);
    if (var <= 0.0)
      throw NumericError("calibrate_snr: direction has zero variance over X");
    return std::sqrt(target_snr / var) * beta_direction;
  }
  if (family != Family::binomial)
    throw InputError("calibrate_snr: unsupported family");

  const auto snr_at = [&](double c) {
    return empirical_snr(X, (c * beta_direction).eval(), intercept, family);
  };

  double hi = 1.0;
  double best = snr_at(hi);
  while (best < target_snr && hi < 1e8) {
    hi *= 2.0;
    best = snr_at(hi);
  }
  if (best < target_snr)
    throw NumericError(
        "calibrate_snr: target SNR unattainable (saturated probabilities); "
        "maximum attainable is about " + std::to_string(best));

  double lo = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double snr = snr_at(mid);
    if (std::abs(snr - target_snr) <= 0.01 * target_snr) {
      return mid * beta_direction;
    }
    if (snr < target_snr) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi) * beta_direction;
}

Eigen::VectorXd generate_response(const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& beta, double intercept,
                                  Family family, Rng& rng) {
  if (beta.size() != X.cols())
    throw InputError("generate_response: dimension mismatch");
  const Eigen::VectorXd eta = (X * beta).array() + intercept;
  Eigen::VectorXd y(eta.size());
  switch (family) {
    case Family::binomial:
      for (Eigen::Index i = 0; i < eta.size(); ++i)
        y(i) = rng.bernoulli(logistic(eta(i))) ? 1.0 : 0.0;
      break;
    case Family::gaussian:
      for (Eigen::Index i = 0; i < eta.size(); ++i) y(i) = eta(i) + rng.normal();
      break;
    case Family::poisson:
      throw InputError("generate_response: poisson scenarios are not supported");
  }
  return y;
}

std::pair<int, int> score_selection(const std::vector<int>& selected,
                                    const ScenarioSpec& spec) {
  // Truth classes: declared equivalence classes containing a true variable,
  // plus singleton classes for uncovered true variables.
  std::vector<std::vector<int>> classes;
  for (const auto& cls : spec.equivalence_classes) {
    for (const auto& tv : spec.true_vars) {
      if (std::find(cls.begin(), cls.end(), tv.column) != cls.end()) {
        classes.push_back(cls);
        break;
      }
    }
  }
  for (const auto& tv : spec.true_vars) {
    bool covered = false;
    for (const auto& cls : classes) {
      if (std::find(cls.begin(), cls.end(), tv.column) != cls.end()) {
        covered = true;
        break;
      }
    }
    if (!covered) classes.push_back({tv.column});
  }

  int tp = 0;
  int fp = 0;
  std::vector<char> credited(classes.size(), 0);
  for (int v : selected) {
    int cls_index = -1;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      if (std::find(classes[c].begin(), classes[c].end(), v) != classes[c].end()) {
        cls_index = static_cast<int>(c);
        break;
      }
    }
    if (cls_index < 0) {
      ++fp;
    } else if (credited[static_cast<std::size_t>(cls_index)]) {
      ++fp;  // a second member of an already-credited class is noise
    } else {
      credited[static_cast<std::size_t>(cls_index)] = 1;
      ++tp;
    }
  }
  return {tp, fp};
}

namespace {

struct RepOutcome {
  bool ok = false;
  int tp = 0;
  int fp = 0;
  int selected_count = 0;
  double insample_error = 0.0;
  double test_error = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
};

Eigen::MatrixXd columns_of(const Eigen::MatrixXd& X, const std::vector<int>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
  return out;
}

double prediction_error(const GlmFit& fit, const Eigen::MatrixXd& Xsel,
                        const Eigen::VectorXd& y, Family family) {
  const Eigen::VectorXd mu = fitted_mean(fit, Xsel);
  if (family == Family::binomial) {
    double wrong = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double label = mu(i) > 0.5 ? 1.0 : 0.0;
      if (label != y(i)) wrong += 1.0;
    }
    return wrong / static_cast<double>(y.size());
  }
  return (y - mu).squaredNorm() / static_cast<double>(y.size());
}

std::vector<int> run_method(const std::string& method, const ScenarioSpec& spec,
                            const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            std::uint64_t rep_seed) {
  if (method == "surf") {
    RankingConfig rc = spec.ranking;
    rc.seed = derive_seed(rep_seed, {0x21u});
    rc.threads = 1;
    const VariableRanking ranking = rank_variables(X, y, spec.family, rc);
    ForwardConfig fc = spec.forward;
    fc.seed = derive_seed(rep_seed, {0x22u});
    fc.threads = 1;
    return forward_select(X, y, spec.family, ranking, fc).selected;
  }
  if (method == "stability") {
    StabilityConfig sc = spec.stability;
    sc.seed = derive_seed(rep_seed, {0x23u});
    sc.threads = 1;
    return stability_select(X, y, spec.family, sc).selected;
  }
  if (method == "lasso") {
    const CvResult cv = cross_validate(X, y, spec.family, spec.cv_folds,
                                       derive_seed(rep_seed, {0x24u}));
    return active_set(cv.fit, cv.lambda_1se);
  }
  throw InputError("run_scenario: unknown method: " + method);
}

}  // namespace

ScenarioMetrics run_scenario(const ScenarioSpec& spec,
                             const std::vector<std::string>& methods) {
  if (methods.empty()) throw InputError("run_scenario: no methods requested");

  Eigen::MatrixXd X;
  if (spec.design_file.empty()) {
    X = make_synthetic_design(spec.synth, derive_seed(spec.seed, {0xD51u}));
  } else {
    X = load_numeric_csv(spec.design_file);
  }
  // Column-centralised design, as the selection pipeline uses it. Centering
  // also lets a single signed coefficient spread class probabilities to both
  // sides of the intercept, which the SNR targets require.
  const Eigen::RowVectorXd column_means = X.colwise().mean();
  X.rowwise() -= column_means;
  const int p = static_cast<int>(X.cols());
  for (const auto& tv : spec.true_vars) {
    if (tv.column < 0 || tv.column >= p)
      throw InputError("run_scenario: true variable index out of range");
  }

  const double intercept = std::isnan(spec.intercept)
                               ? default_intercept(spec.family.family)
                               : spec.intercept;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (!spec.true_vars.empty()) {
    Eigen::VectorXd direction = Eigen::VectorXd::Zero(p);
    for (const auto& tv : spec.true_vars) direction(tv.column) = tv.direction;
    beta = calibrate_snr(X, direction, intercept, spec.family.family,
                         spec.target_snr);
  }

  Eigen::MatrixXd X_test;
  if (spec.test_n > 0) {
    if (!spec.design_file.empty())
      throw InputError("run_scenario: test_n needs a synthetic design");
    SynthDesignConfig test_cfg = spec.synth;
    test_cfg.n = spec.test_n;
    X_test = make_synthetic_design(test_cfg, derive_seed(spec.seed, {0xD52u}));
    // Same affine transform as the training design.
    X_test.rowwise() -= column_means;
  }

  ScenarioMetrics metrics;
  metrics.scenario = spec.name;
  metrics.n_reps = spec.n_reps;

  const int n_classes = [&] {
    std::vector<int> dummy;
    for (const auto& tv : spec.true_vars) dummy.push_back(tv.column);
    return score_selection(dummy, spec).first;
  }();

  std::map<std::string, std::vector<RepOutcome>> outcomes;
  for (const auto& m : methods)
    outcomes[m].resize(static_cast<std::size_t>(spec.n_reps));

  parallel_tasks(spec.n_reps, spec.threads, [&](int rep) {
    const std::uint64_t rep_seed =
        derive_seed(spec.seed, {0x4E9u, static_cast<std::uint64_t>(rep)});
    Rng y_rng(derive_seed(rep_seed, {0x11u}));
    const Eigen::VectorXd y =
        generate_response(X, beta, intercept, spec.family.family, y_rng);
    Eigen::VectorXd y_test;
    if (spec.test_n > 0) {
      Rng t_rng(derive_seed(rep_seed, {0x12u}));
      y_test = generate_response(X_test, beta, intercept, spec.family.family, t_rng);
    }

    for (const auto& method : methods) {
      RepOutcome& out = outcomes[method][static_cast<std::size_t>(rep)];
      try {
        const std::vector<int> selected = run_method(method, spec, X, y, rep_seed);
        const auto [tp, fp] = score_selection(selected, spec);
        out.tp = tp;
        out.fp = fp;
        out.selected_count = static_cast<int>(selected.size());

        const Eigen::MatrixXd Xsel = columns_of(X, selected);
        const GlmFit fit = fit_glm(Xsel, y, spec.family);
        out.insample_error = prediction_error(fit, Xsel, y, spec.family.family);
        if (spec.family.family == Family::gaussian) {
          const double tss = (y.array() - y.mean()).square().sum();
          out.r2 = tss > 0.0 ? 1.0 - fit.deviance / tss : 0.0;
        }
        if (spec.test_n > 0) {
          out.test_error = prediction_error(fit, columns_of(X_test, selected),
                                            y_test, spec.family.family);
        }
        out.ok = true;
      } catch (const std::exception&) {
        out.ok = false;
      }
    }
  });

  for (const auto& method : methods) {
    MethodMetrics mm;
    mm.method = method;
    mm.tp_histogram.assign(static_cast<std::size_t>(n_classes) + 1, 0);
    std::vector<double> fps, ins, tests, r2s;
    for (const auto& out : outcomes[method]) {
      if (!out.ok) {
        ++mm.failed;
        continue;
      }
      ++mm.completed;
      ++mm.tp_histogram[static_cast<std::size_t>(out.tp)];
      fps.push_back(out.fp);
      ins.push_back(out.insample_error);
      mm.per_rep_selected_count.push_back(out.selected_count);
      if (spec.test_n > 0) tests.push_back(out.test_error);
      if (spec.family.family == Family::gaussian) r2s.push_back(out.r2);
    }
    const auto mean_sd = [](const std::vector<double>& v) {
      if (v.empty()) return std::make_pair(0.0, 0.0);
      double m = 0.0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - m) * (x - m);
      const double sd =
          v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      return std::make_pair(m, sd);
    };
    std::tie(mm.fp_mean, mm.fp_sd) = mean_sd(fps);
    std::tie(mm.insample_error_mean, mm.insample_error_sd) = mean_sd(ins);
    if (!tests.empty())
      std::tie(mm.test_error_mean, mm.test_error_sd) = mean_sd(tests);
    if (!r2s.empty()) mm.r2_mean = mean_sd(r2s).first;

    if (spec.n_reps > 0 && mm.failed * 10 > spec.n_reps)
      throw NumericError("run_scenario: method '" + method +
                         "' failed on more than 10% of reps");
    metrics.per_method[method] = std::move(mm);
  }
  return metrics;
}

ScenarioSpec parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario file: " + path);

  ScenarioSpec spec;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) continue;

    try {
      if (key == "name") spec.name = value;
      else if (key == "design") spec.design_file = value == "synthetic" ? "" : value;
      else if (key == "family") spec.family.family = family_from_name(value);
      else if (key == "n") spec.synth.n = std::stoi(value);
      else if (key == "p") spec.synth.p = std::stoi(value);
      else if (key == "block_size") spec.synth.block_size = std::stoi(value);
      else if (key == "correlation") spec.synth.correlation = std::stod(value);
      else if (key == "log_sigma") spec.synth.log_sigma = std::stod(value);
      else if (key == "surrogate_pair") spec.synth.surrogate_pair = value != "0";
      else if (key == "surrogate_noise") spec.synth.surrogate_noise = std::stod(value);
      else if (key == "compositional") spec.synth.compositional = value != "0";
      else if (key == "reps") spec.n_reps = std::stoi(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else if (key == "snr") spec.target_snr = std::stod(value);
      else if (key == "intercept") spec.intercept = std::stod(value);
      else if (key == "test_n") spec.test_n = std::stoi(value);
      else if (key == "threads") spec.threads = std::stoi(value);
      else if (key == "folds") spec.cv_folds = std::stoi(value);
      else if (key == "B") spec.ranking.B = std::stoi(value);
      else if (key == "fraction") spec.ranking.fraction = std::stod(value);
      else if (key == "lambda_rule")
        spec.ranking.lambda_rule = value == "min" ? LambdaRule::min : LambdaRule::one_se;
      else if (key == "perms") spec.forward.n_perm = std::stoi(value);
      else if (key == "alpha") spec.forward.alpha = std::stod(value);
      else if (key == "max_steps") spec.forward.max_steps = std::stoi(value);
      else if (key == "stability_B") spec.stability.B = std::stoi(value);
      else if (key == "cutoff") spec.stability.cutoff = std::stod(value);
      else if (key == "ewv_bound") spec.stability.ewv_bound = std::stod(value);
      else if (key == "true_vars") {
        // e.g. "0:-1, 5:+1"
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
          const auto colon = item.find(':');
          if (colon == std::string::npos)
            throw InputError("expected column:direction");
          TrueVariable tv;
          tv.column = std::stoi(trim(item.substr(0, colon)));
          tv.direction = std::stod(trim(item.substr(colon + 1)));
          spec.true_vars.push_back(tv);
        }
      } else if (key == "equivalence") {
        // e.g. "0~1; 4~5~6"
        std::stringstream ss(value);
        std::string cls;
        while (std::getline(ss, cls, ';')) {
          std::vector<int> members;
          std::stringstream ms(cls);
          std::string member;
          while (std::getline(ms, member, '~')) {
            member = trim(member);
            if (!member.empty()) members.push_back(std::stoi(member));
          }
          if (!members.empty()) spec.equivalence_classes.push_back(members);
        }
      } else {
        throw InputError("unknown key '" + key + "'");
      }
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      throw InputError("scenario file line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return spec;
}

std::string metrics_csv(const ScenarioMetrics& metrics) {
  std::ostringstream out;
  int max_tp = 0;
  for (const auto& [name, mm] : metrics.per_method)
    max_tp = std::max(max_tp, static_cast<int>(mm.tp_histogram.size()) - 1);
  out << "method,reps,completed,failed";
  for (int t = 0; t <= max_tp; ++t) out << ",tp" << t;
  out << ",fp_mean,fp_sd,insample_mean,insample_sd,test_mean,test_sd,r2_mean\n";
  for (const auto& [name, mm] : metrics.per_method) {
    out << name << ',' << metrics.n_reps << ',' << mm.completed << ','
        << mm.failed;
    for (int t = 0; t <= max_tp; ++t) {
      const auto idx = static_cast<std::size_t>(t);
      out << ',' << (idx < mm.tp_histogram.size() ? mm.tp_histogram[idx] : 0);
    }
    out << ',' << mm.fp_mean << ',' << mm.fp_sd << ',' << mm.insample_error_mean
        << ',' << mm.insample_error_sd << ',';
    if (!std::isnan(mm.test_error_mean))
      out << mm.test_error_mean << ',' << mm.test_error_sd;
    else
      out << ',';
    out << ',';
    if (!std::isnan(mm.r2_mean)) out << mm.r2_mean;
    out << '\n';
  }
  return out.str();
}

}  // namespace surf
