#include "surf/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "surf/glm.hpp"

namespace surf {

namespace {

using nlohmann::json;

struct ModelingDesign {
  Eigen::MatrixXd X;
  std::vector<std::string> names;
  // For augmented columns, the design column index within the augmentation
  // (or -1 for passthrough covariates).
  std::vector<int> augmented_index;
  std::optional<AugmentedDesign> augmentation;
};

ModelingDesign build_design(const Dataset& dataset) {
  ModelingDesign design;
  if (!dataset.taxonomy.has_value()) {
    design.X = dataset.X;
    design.names = dataset.column_names;
    design.augmented_index.assign(dataset.column_names.size(), -1);
    return design;
  }

  Eigen::MatrixXd X_otu(dataset.X.rows(),
                        static_cast<Eigen::Index>(dataset.otu_columns.size()));
  for (std::size_t j = 0; j < dataset.otu_columns.size(); ++j)
    X_otu.col(static_cast<Eigen::Index>(j)) = dataset.X.col(dataset.otu_columns[j]);

  design.augmentation = build_augmented_design(X_otu, *dataset.taxonomy);
  const auto& aug = *design.augmentation;
  const auto q = aug.matrix.cols();
  const auto extra = static_cast<Eigen::Index>(dataset.passthrough_columns.size());

  design.X.resize(dataset.X.rows(), q + extra);
  design.X.leftCols(q) = aug.matrix;
  design.names = aug.column_label;
  design.augmented_index.resize(static_cast<std::size_t>(q));
  for (Eigen::Index j = 0; j < q; ++j)
    design.augmented_index[static_cast<std::size_t>(j)] = static_cast<int>(j);
  for (std::size_t j = 0; j < dataset.passthrough_columns.size(); ++j) {
    design.X.col(q + static_cast<Eigen::Index>(j)) =
        dataset.X.col(dataset.passthrough_columns[j]);
    design.names.push_back(
        dataset.column_names[static_cast<std::size_t>(dataset.passthrough_columns[j])]);
    design.augmented_index.push_back(-1);
  }
  return design;
}

json dataset_echo(const Dataset& dataset) {
  json j;
  j["n"] = dataset.n();
  j["p"] = dataset.p();
  j["family"] = family_name(dataset.spec.family);
  j["link"] = link_name(dataset.spec.family);
  j["columns"] = dataset.column_names;
  j["normalized"] = dataset.normalized;
  j["centered"] = true;
  j["has_taxonomy"] = dataset.taxonomy.has_value();
  return j;
}

json config_echo(Mode mode, const PipelineConfig& config) {
  // Worker count is intentionally not echoed: the body must be identical
  // across thread counts.
  json j;
  j["seed"] = config.seed;
  j["ranking"] = {{"B", config.ranking.B},
                  {"fraction", config.ranking.fraction},
                  {"stratified", config.ranking.stratified},
                  {"lambda_rule", config.ranking.lambda_rule == LambdaRule::one_se
                                      ? "1se"
                                      : "min"},
                  {"cv_folds", config.ranking.cv_folds}};
  j["forward"] = {{"alpha", config.forward.alpha},
                  {"n_perm", config.forward.n_perm},
                  {"max_steps", config.forward.max_steps}};
  if (mode == Mode::stability) {
    j["stability"] = {{"cutoff", config.stability.cutoff},
                      {"ewv_bound", config.stability.ewv_bound},
                      {"B", config.stability.B},
                      {"fraction", config.stability.fraction}};
  }
  return j;
}

json augmentation_echo(const Dataset& dataset, const ModelingDesign& design) {
  json j;
  if (!design.augmentation.has_value()) return j;
  const auto& aug = *design.augmentation;
  const auto labels = dataset.taxonomy->node_labels();
  j["columns"] = aug.column_label;
  json dropped = json::array();
  for (std::size_t d = 0; d < aug.dropped_nodes.size(); ++d) {
    dropped.push_back(
        {{"node", labels[static_cast<std::size_t>(aug.dropped_nodes[d])]},
         {"duplicate_of", aug.column_label[static_cast<std::size_t>(
                              aug.duplicate_of[d])]}});
  }
  j["dropped"] = dropped;
  j["column_count"] = aug.matrix.cols();
  return j;
}

}  // namespace

Mode mode_from_name(const std::string& name) {
  if (name == "select") return Mode::select;
  if (name == "rank") return Mode::rank;
  if (name == "stability") return Mode::stability;
  if (name == "simulate") return Mode::simulate;
  if (name == "aggregate") return Mode::aggregate;
  throw InputError("unknown mode: " + name);
}

Report run_pipeline(const Dataset& dataset, Mode mode,
                    const PipelineConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  if (mode == Mode::simulate)
    throw InputError("run_pipeline: simulate mode runs from a scenario file");

  Report report;
  report.body["mode"] = mode == Mode::select      ? "select"
                        : mode == Mode::rank      ? "rank"
                        : mode == Mode::stability ? "stability"
                                                  : "aggregate";
  report.body["seed"] = config.seed;
  report.body["dataset"] = dataset_echo(dataset);
  report.body["config"] = config_echo(mode, config);

  const ModelingDesign design = build_design(dataset);
  if (design.augmentation.has_value())
    report.body["augmentation"] = augmentation_echo(dataset, design);
  report.body["design_columns"] = design.names;

  if (mode == Mode::aggregate) {
    report.meta["wall_clock_ms"] =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - started)
            .count();
    return report;
  }

  if (mode == Mode::stability) {
    StabilityConfig sc = config.stability;
    sc.seed = config.seed;
    sc.threads = config.threads;
    const StabilityResult stab =
        stability_select(design.X, dataset.y, dataset.spec, sc);
    json sel = json::array();
    for (int j : stab.selected)
      sel.push_back(design.names[static_cast<std::size_t>(j)]);
    report.body["stability"] = {
        {"selected", sel},
        {"per_subsample_cap", stab.per_subsample_cap},
        {"completed", stab.completed},
        {"skipped", stab.skipped}};
    json freq = json::array();
    for (Eigen::Index j = 0; j < stab.frequency.size(); ++j) {
      freq.push_back({{"variable", design.names[static_cast<std::size_t>(j)]},
                      {"frequency", stab.frequency(j)}});
    }
    report.body["stability"]["frequency"] = freq;
    report.meta["wall_clock_ms"] =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - started)
            .count();
    return report;
  }

  // rank / select
  RankingConfig rc = config.ranking;
  rc.seed = config.seed;
  rc.threads = config.threads;
  const VariableRanking ranking =
      rank_variables(design.X, dataset.y, dataset.spec, rc);

  json rank_trace = json::array();
  for (int j : ranking.order) {
    rank_trace.push_back(
        {{"variable", design.names[static_cast<std::size_t>(j)]},
         {"frequency", ranking.frequency[static_cast<std::size_t>(j)]}});
  }
  report.body["ranking"] = {{"trace", rank_trace},
                            {"completed_subsamples", ranking.completed},
                            {"skipped_subsamples", ranking.skipped}};

  if (mode == Mode::select) {
    ForwardConfig fc = config.forward;
    fc.seed = derive_seed(config.seed, {0xF52u});
    fc.threads = config.threads;
    const SelectionResult selection =
        forward_select(design.X, dataset.y, dataset.spec, ranking, fc);

    json steps = json::array();
    for (const auto& step : selection.steps) {
      steps.push_back(
          {{"variable", design.names[static_cast<std::size_t>(step.variable)]},
           {"llr", step.llr},
           {"critical_value", step.critical_value},
           {"p_value", step.p_value}});
    }
    report.body["steps"] = steps;
    report.body["hit_max_steps"] = selection.hit_max_steps;
    if (selection.terminal_best_candidate >= 0) {
      // Not part of the selection rule; reported for diagnostics only.
      report.body["terminal"] = {
          {"best_candidate", design.names[static_cast<std::size_t>(
                                 selection.terminal_best_candidate)]},
          {"p_value", selection.terminal_p_value}};
    }

    json model;
    model["intercept"] = selection.final_model.intercept;
    model["converged"] = selection.final_model.converged;
    model["deviance"] = selection.final_model.deviance;
    json coefs = json::array();
    for (std::size_t s = 0; s < selection.selected.size(); ++s) {
      coefs.push_back(
          {{"variable", design.names[static_cast<std::size_t>(
                            selection.selected[s])]},
           {"coefficient",
            selection.final_model.coefficients(static_cast<Eigen::Index>(s))}});
    }
    model["coefficients"] = coefs;
    report.body["final_model"] = model;

    if (design.augmentation.has_value()) {
      std::vector<int> aug_cols;
      std::vector<double> aug_coefs;
      for (std::size_t s = 0; s < selection.selected.size(); ++s) {
        const int a = design.augmented_index[static_cast<std::size_t>(
            selection.selected[s])];
        if (a >= 0) {
          aug_cols.push_back(a);
          aug_coefs.push_back(
              selection.final_model.coefficients(static_cast<Eigen::Index>(s)));
        }
      }
      const LeafReport leaves = map_selection_to_leaves(
          *design.augmentation, aug_cols,
          Eigen::Map<const Eigen::VectorXd>(aug_coefs.data(),
                                            static_cast<Eigen::Index>(
                                                aug_coefs.size())),
          *dataset.taxonomy);
      json leaf_json = json::array();
      for (Eigen::Index l = 0; l < leaves.leaf_coefficient.size(); ++l) {
        leaf_json.push_back(
            {{"otu", dataset.taxonomy->otu_ids[static_cast<std::size_t>(l)]},
             {"coefficient", leaves.leaf_coefficient(l)}});
      }
      report.body["leaf_report"] = leaf_json;
      report.body["constraints"] = leaves.constraints;
    }
  }

  report.meta["wall_clock_ms"] =
      std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - started)
          .count();
  return report;
}

std::string report_text(const Report& report) {
  std::ostringstream out;
  const auto& body = report.body;
  out << "mode: " << body.value("mode", "?") << "\n";
  out << "seed: " << body["seed"] << "\n";
  if (body.contains("augmentation")) {
    out << "augmented design: " << body["augmentation"]["column_count"]
        << " columns\n";
  }
  if (body.contains("ranking")) {
    out << "top ranked variables:\n";
    const auto& trace = body["ranking"]["trace"];
    for (std::size_t i = 0; i < std::min<std::size_t>(10, trace.size()); ++i) {
      out << "  " << trace[i]["variable"].get<std::string>() << " ("
          << trace[i]["frequency"] << ")\n";
    }
  }
  if (body.contains("steps")) {
    if (body["steps"].empty()) {
      out << "no variables selected\n";
    } else {
      out << "selected variables:\n";
      for (const auto& step : body["steps"]) {
        out << "  " << step["variable"].get<std::string>()
            << "  D=" << step["llr"] << "  crit=" << step["critical_value"]
            << "  p=" << step["p_value"] << "\n";
      }
    }
  }
  if (body.contains("stability")) {
    out << "stability-selected variables:";
    for (const auto& v : body["stability"]["selected"])
      out << " " << v.get<std::string>();
    out << "\n";
  }
  return out.str();
}

void write_report(const Report& report, const std::string& path,
                  const std::string& format) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write report to " + path);
  if (format == "json") {
    nlohmann::json full = report.body;
    full["_meta"] = report.meta;
    out << full.dump(2) << "\n";
  } else if (format == "text") {
    out << report_text(report);
  } else {
    throw InputError("unknown report format: " + format);
  }
  if (!out) throw InputError("failed while writing " + path);
}

std::string augmented_design_csv(const Dataset& dataset) {
  if (!dataset.taxonomy.has_value())
    throw InputError("augmented_design_csv: dataset has no taxonomy");
  Eigen::MatrixXd X_otu(dataset.X.rows(),
                        static_cast<Eigen::Index>(dataset.otu_columns.size()));
  for (std::size_t j = 0; j < dataset.otu_columns.size(); ++j)
    X_otu.col(static_cast<Eigen::Index>(j)) = dataset.X.col(dataset.otu_columns[j]);
  const AugmentedDesign aug = build_augmented_design(X_otu, *dataset.taxonomy);

  std::ostringstream out;
  out.precision(17);
  for (std::size_t j = 0; j < aug.column_label.size(); ++j) {
    if (j > 0) out << ',';
    out << aug.column_label[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < aug.matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < aug.matrix.cols(); ++j) {
      if (j > 0) out << ',';
      out << aug.matrix(i, j);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace surf
