#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "parex/importance.hpp"
#include "parex/paramspace.hpp"

namespace parex {

enum class TrialState { Running, Complete, Failed };
enum class Direction { Minimize, Maximize };

std::string_view trial_state_name(TrialState s);
TrialState trial_state_from_name(std::string_view name);
std::string_view direction_name(Direction d);
Direction direction_from_name(std::string_view name);

// One workflow evaluation.  Ids are study-scoped, dense and monotonically
// increasing; values are present iff the trial completed (one per objective).
struct Trial {
  std::int64_t id = -1;
  ParamMap params;
  TrialState state = TrialState::Running;
  std::vector<double> values;
  int agent_id = 0;
  std::int64_t created_at_ms = 0;
  std::int64_t finished_at_ms = 0;
  std::map<std::string, std::string> user_attrs;
};

struct ImportanceSnapshot {
  std::int64_t trial_count = 0;
  std::vector<ImportanceReport> reports;  // one per objective
};

// Study metadata; the trial history lives behind list_trials.
struct Study {
  std::string name;
  SearchSpace space;
  std::vector<Direction> directions;
  std::vector<std::string> metric_names;
  std::vector<std::string> sampler_assignments;
  std::vector<ImportanceSnapshot> attr_snapshots;
};

// Shared, linearizable record of studies and trials.  Every mutation is
// atomic per study; agents coordinate exclusively through this interface.
class StoreBackend {
 public:
  virtual ~StoreBackend() = default;

  // Creates the study or returns the existing one with its history intact.
  // Same name with different space or directions is StudyConfigMismatch.
  virtual Study create_or_open_study(const std::string& name, const SearchSpace& space,
                                     const std::vector<Direction>& directions,
                                     const std::vector<std::string>& metric_names,
                                     const std::vector<std::string>& sampler_assignments) = 0;

  // Read-only open; NotFound when the study does not exist.
  virtual Study get_study(const std::string& name) = 0;

  virtual std::vector<std::string> list_studies() = 0;

  virtual Trial begin_trial(const std::string& study, int agent_id,
                            const ParamMap& params) = 0;

  virtual void complete_trial(const std::string& study, std::int64_t id,
                              const std::vector<double>& values) = 0;

  virtual void fail_trial(const std::string& study, std::int64_t id,
                          const std::string& reason) = 0;

  virtual void set_trial_attr(const std::string& study, std::int64_t id,
                              const std::string& key, const std::string& value) = 0;

  virtual std::vector<Trial> list_trials(const std::string& study) = 0;

  // Compare-and-append keyed on trial_count: returns false when a snapshot
  // for that count already exists (another agent won the race).
  virtual bool append_snapshot(const std::string& study, std::int64_t trial_count,
                               const std::vector<ImportanceReport>& reports) = 0;

  virtual std::vector<ImportanceSnapshot> list_snapshots(const std::string& study) = 0;

  // Marks every Running trial Failed (reason "abandoned").  Called by the
  // driver when resuming a study so interrupted trials are not retried.
  virtual std::int64_t abandon_running(const std::string& study) = 0;
};

// Pareto set of Complete trials under the study's directions; singleton best
// for one objective with ties broken by lowest id.  Result ordered by id.
std::vector<Trial> best_trials(StoreBackend& store, const std::string& study);

// Dominance under mixed directions: a dominates b iff a is no worse in every
// objective and strictly better in at least one.
bool dominates(const std::vector<double>& a, const std::vector<double>& b,
               const std::vector<Direction>& directions);

std::int64_t now_ms();

namespace detail {

struct StudyRec {
  Study meta;
  std::vector<Trial> trials;
};

// Validation and mutation logic shared by the in-memory and file-backed
// stores; callers provide their own locking.
class StudyTable {
 public:
  std::pair<Study, bool> create_or_open(const std::string& name, const SearchSpace& space,
                                        const std::vector<Direction>& directions,
                                        const std::vector<std::string>& metric_names,
                                        const std::vector<std::string>& sampler_assignments);
  const StudyRec& get(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<std::string> names() const;
  Trial begin(const std::string& study, int agent_id, const ParamMap& params,
              std::int64_t ts_ms);
  void complete(const std::string& study, std::int64_t id,
                const std::vector<double>& values, std::int64_t ts_ms);
  void fail(const std::string& study, std::int64_t id, const std::string& reason,
            std::int64_t ts_ms);
  void set_attr(const std::string& study, std::int64_t id, const std::string& key,
                const std::string& value);
  bool snapshot(const std::string& study, std::int64_t trial_count,
                const std::vector<ImportanceReport>& reports);
  std::vector<std::int64_t> running_ids(const std::string& study) const;

 private:
  StudyRec& get_mut(const std::string& name);
  Trial& get_trial(const std::string& study, std::int64_t id);

  std::map<std::string, StudyRec> studies_;
};

}  // namespace detail

// Process-local backend used by tests and single-process runs.
class MemoryStore : public StoreBackend {
 public:
  Study create_or_open_study(const std::string& name, const SearchSpace& space,
                             const std::vector<Direction>& directions,
                             const std::vector<std::string>& metric_names,
                             const std::vector<std::string>& sampler_assignments) override;
  Study get_study(const std::string& name) override;
  std::vector<std::string> list_studies() override;
  Trial begin_trial(const std::string& study, int agent_id, const ParamMap& params) override;
  void complete_trial(const std::string& study, std::int64_t id,
                      const std::vector<double>& values) override;
  void fail_trial(const std::string& study, std::int64_t id,
                  const std::string& reason) override;
  void set_trial_attr(const std::string& study, std::int64_t id, const std::string& key,
                      const std::string& value) override;
  std::vector<Trial> list_trials(const std::string& study) override;
  bool append_snapshot(const std::string& study, std::int64_t trial_count,
                       const std::vector<ImportanceReport>& reports) override;
  std::vector<ImportanceSnapshot> list_snapshots(const std::string& study) override;
  std::int64_t abandon_running(const std::string& study) override;

 private:
  std::mutex mutex_;
  detail::StudyTable table_;
};

}  // namespace parex
