#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parex/executor.hpp"
#include "parex/payload.hpp"
#include "parex/trialstore.hpp"

namespace parex {

// Driver-side knobs that are deploy-time configuration, not payload fields.
struct RunConfig {
  std::filesystem::path staging_root = "parex-staging";
  int parallelism = 0;  // worker cap; 0 means one worker per study
  std::optional<std::uint64_t> seed_override;

  // Monitoring endpoint for computational-performance metrics.  A window of
  // 0 scrapes the trial's own runtime padded by one step; the CLI defaults
  // the remote configuration to 24h at 10s steps.
  std::string monitor_url;
  std::string pod_selector = ".*";
  std::int64_t monitor_window_s = 0;
  std::int64_t monitor_step_s = 10;

  // Test hook, called before each episode; throwing simulates an agent crash
  // without touching the other agents.
  std::function<void(const std::string& study, int agent_id, int episode)> episode_hook;
};

struct AgentOutcome {
  int agent_id = 0;
  std::string study;
  int completed = 0;
  int failed = 0;
  std::string error;  // non-empty when the agent aborted
};

struct StudyResult {
  std::string study_name;
  std::vector<Trial> best;  // Pareto set; singleton for one objective
  std::vector<ImportanceSnapshot> importance_history;
  std::int64_t trial_count = 0;
  std::map<int, std::int64_t> per_agent_trials;
};

struct RunResult {
  std::vector<StudyResult> studies;
  std::vector<AgentOutcome> agents;
  double wall_time_s = 0.0;
};

// Importance snapshots are taken each time the global completed-trial count
// crosses a multiple of this interval.
inline constexpr std::int64_t kSnapshotInterval = 20;

// Spawns one exploration agent per study slot in a bounded worker pool, runs
// num_episodes trials each against the shared store, snapshots importances
// at every threshold, and assembles the final results.  Per-trial failures
// never abort the study.  Resuming an interrupted study tops the budget up
// to num_studies * num_episodes.
RunResult run_study(const Payload& payload, StoreBackend& store,
                    const WorkflowRegistry& registry, const RunConfig& config = {});

}  // namespace parex
