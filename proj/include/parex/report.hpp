#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "parex/driver.hpp"
#include "parex/trialstore.hpp"

namespace parex {

// CSV and SVG exports for run results and post-hoc reports.  Timestamps are
// deliberately left out of the trial table so identical seeded runs export
// byte-identical files.

// Columns: id,agent,state,<param names...>,<metric names...>
void write_trials_csv(const std::filesystem::path& path, const Study& study,
                      const std::vector<Trial>& trials);

// Columns: trial_count,objective,<param names...> (one row per snapshot and
// objective, importances in parameter declaration order).
void write_snapshots_csv(const std::filesystem::path& path, const Study& study,
                         const std::vector<ImportanceSnapshot>& snapshots);

// Columns: trial,agent,value,best_so_far over completed trials (objective 0).
void write_convergence_csv(const std::filesystem::path& path, const Study& study,
                           const std::vector<Trial>& trials);

// Columns: trial,<metric names...> for the final non-dominated set.
void write_pareto_csv(const std::filesystem::path& path, const Study& study,
                      const std::vector<Trial>& front);

std::string render_convergence_svg(const Study& study, const std::vector<Trial>& trials);
std::string render_importances_svg(const Study& study,
                                   const std::vector<ImportanceSnapshot>& snapshots);
std::string render_pareto_svg(const Study& study, const std::vector<Trial>& front);

ojson run_result_to_json(const RunResult& result);

// Minimal CSV reader (quote-aware) used by the CLI round-trip checks.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace parex
