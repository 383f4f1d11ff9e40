#pragma once

#include <string>

#include <json.hpp>

#include "surf/dataset.hpp"
#include "surf/forward.hpp"
#include "surf/ranking.hpp"
#include "surf/stability.hpp"
#include "surf/types.hpp"

namespace surf {

enum class Mode { select, rank, stability, simulate, aggregate };

Mode mode_from_name(const std::string& name);

struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  RankingConfig ranking;
  ForwardConfig forward;
  StabilityConfig stability;
};

/// Machine-readable run report. `body` is fully determined by the dataset,
/// mode, seed and config (worker count excluded), so reruns are byte
/// identical; `meta` carries volatile fields like the wall clock.
struct Report {
  nlohmann::json body;
  nlohmann::json meta;
};

/// Runs aggregation (when a taxonomy is attached), ranking, and forward
/// selection per the mode, and assembles the report. `aggregate` stops after
/// building the augmented design; `stability` runs the baseline instead of
/// ranking + forward selection.
Report run_pipeline(const Dataset& dataset, Mode mode,
                    const PipelineConfig& config);

/// Serializes the report to JSON (schema documented in the README) or a
/// human-readable text summary.
void write_report(const Report& report, const std::string& path,
                  const std::string& format);

std::string report_text(const Report& report);

/// CSV of the augmented design named in the report (header row of node
/// labels, one row per sample).
std::string augmented_design_csv(const Dataset& dataset);

}  // namespace surf
