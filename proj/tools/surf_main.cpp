#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "surf/dataset.hpp"
#include "surf/pipeline.hpp"
#include "surf/sim.hpp"
#include "surf/types.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

nlohmann::json scenario_summary(const surf::ScenarioMetrics& metrics) {
  nlohmann::json j;
  j["scenario"] = metrics.scenario;
  j["reps"] = metrics.n_reps;
  for (const auto& [name, mm] : metrics.per_method) {
    nlohmann::json m;
    m["tp_histogram"] = mm.tp_histogram;
    m["fp_mean"] = mm.fp_mean;
    m["fp_sd"] = mm.fp_sd;
    m["insample_error_mean"] = mm.insample_error_mean;
    m["insample_error_sd"] = mm.insample_error_sd;
    if (!std::isnan(mm.test_error_mean)) {
      m["test_error_mean"] = mm.test_error_mean;
      m["test_error_sd"] = mm.test_error_sd;
    }
    if (!std::isnan(mm.r2_mean)) m["r2_mean"] = mm.r2_mean;
    m["completed"] = mm.completed;
    m["failed"] = mm.failed;
    j["methods"][name] = m;
  }
  return j;
}

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw surf::InputError("cannot write to " + path);
  out << content;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "surf: variable selection for exponential-family GLMs by subsampled "
      "LASSO ranking and permutation-calibrated forward selection"};

  std::string mode_name = "select";
  std::string table_path, response_name, taxonomy_path;
  std::string family_name_arg = "binomial";
  std::string normalize = "none";
  std::string passthrough_arg;
  std::string out_path = "report.json";
  std::string format = "json";
  std::string out_design_path;
  std::string scenario_path;
  std::string metrics_out = "metrics.csv";
  std::string summary_out;
  std::string methods_arg = "surf";
  std::string lambda_rule = "1se";

  surf::PipelineConfig config;

  app.add_option("--mode", mode_name,
                 "select | rank | aggregate | stability | simulate")
      ->capture_default_str();
  app.add_option("--table", table_path,
                 "CSV/TSV with sample ids in the first column");
  app.add_option("--response", response_name, "response column name");
  app.add_option("--family", family_name_arg, "gaussian | binomial | poisson")
      ->capture_default_str();
  app.add_option("--taxonomy", taxonomy_path,
                 "TSV of otu_id<TAB>lineage for tree aggregation");
  app.add_option("--normalize", normalize, "none | proportions")
      ->capture_default_str();
  app.add_option("--passthrough", passthrough_arg,
                 "comma-separated columns kept out of aggregation");
  app.add_option("--alpha", config.forward.alpha, "significance level")
      ->capture_default_str();
  app.add_option("--B", config.ranking.B, "ranking subsample count")
      ->capture_default_str();
  app.add_option("--fraction", config.ranking.fraction,
                 "ranking subsample proportion")
      ->capture_default_str();
  app.add_option("--perms", config.forward.n_perm, "permutations per step")
      ->capture_default_str();
  app.add_option("--max-steps", config.forward.max_steps,
                 "forward selection cap (0 = min(n/2, 50))");
  app.add_option("--lambda-rule", lambda_rule, "1se | min")
      ->capture_default_str();
  app.add_option("--folds", config.ranking.cv_folds, "CV folds")
      ->capture_default_str();
  app.add_option("--seed", config.seed, "RNG seed")->capture_default_str();
  app.add_option("--threads", config.threads, "worker count")
      ->capture_default_str();
  app.add_option("--cutoff", config.stability.cutoff,
                 "stability selection threshold probability")
      ->capture_default_str();
  app.add_option("--ewv-bound", config.stability.ewv_bound,
                 "stability expected-false-selections bound")
      ->capture_default_str();
  app.add_option("--stability-B", config.stability.B,
                 "stability subsample count")
      ->capture_default_str();
  app.add_option("--out", out_path, "report output path")
      ->capture_default_str();
  app.add_option("--format", format, "json | text")->capture_default_str();
  app.add_option("--out-design", out_design_path,
                 "write the augmented design as CSV (aggregate mode)");
  app.add_option("--scenario", scenario_path,
                 "scenario config file (simulate mode)");
  app.add_option("--metrics-out", metrics_out, "simulate: metrics CSV path")
      ->capture_default_str();
  app.add_option("--summary-out", summary_out, "simulate: JSON summary path");
  app.add_option("--methods", methods_arg,
                 "simulate: comma-separated subset of surf,stability,lasso")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    const surf::Mode mode = surf::mode_from_name(mode_name);

    if (mode == surf::Mode::simulate) {
      if (scenario_path.empty())
        throw surf::InputError("simulate mode needs --scenario");
      surf::ScenarioSpec spec = surf::parse_scenario_file(scenario_path);
      if (config.threads > 1) spec.threads = config.threads;
      const auto metrics = surf::run_scenario(spec, split_csv_list(methods_arg));
      write_file(metrics_out, surf::metrics_csv(metrics));
      if (!summary_out.empty())
        write_file(summary_out, scenario_summary(metrics).dump(2) + "\n");
      std::cout << surf::metrics_csv(metrics);
      return kExitOk;
    }

    if (table_path.empty()) throw surf::InputError("missing --table");
    if (response_name.empty()) throw surf::InputError("missing --response");
    if (normalize != "none" && normalize != "proportions")
      throw surf::InputError("--normalize must be none or proportions");

    surf::LoadOptions load;
    load.response_name = response_name;
    load.family = surf::family_from_name(family_name_arg);
    load.normalize_proportions = normalize == "proportions";
    load.passthrough = split_csv_list(passthrough_arg);
    load.taxonomy_path = taxonomy_path;
    const surf::Dataset dataset = surf::load_dataset(table_path, load);

    config.ranking.lambda_rule = lambda_rule == "min"
                                     ? surf::LambdaRule::min
                                     : surf::LambdaRule::one_se;

    const surf::Report report = surf::run_pipeline(dataset, mode, config);
    surf::write_report(report, out_path, format);
    std::cout << surf::report_text(report);

    if (!out_design_path.empty()) {
      write_file(out_design_path, surf::augmented_design_csv(dataset));
    }
    return kExitOk;
  } catch (const surf::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const surf::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
