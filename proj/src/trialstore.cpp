#include "parex/trialstore.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace parex {

std::string_view trial_state_name(TrialState s) {
  switch (s) {
    case TrialState::Running: return "running";
    case TrialState::Complete: return "complete";
    case TrialState::Failed: return "failed";
  }
  return "running";
}

TrialState trial_state_from_name(std::string_view name) {
  if (name == "running") return TrialState::Running;
  if (name == "complete") return TrialState::Complete;
  if (name == "failed") return TrialState::Failed;
  throw Error(Errc::malformed_response, "unknown trial state '" + std::string(name) + "'");
}

std::string_view direction_name(Direction d) {
  return d == Direction::Minimize ? "minimize" : "maximize";
}

Direction direction_from_name(std::string_view name) {
  if (name == "minimize") return Direction::Minimize;
  if (name == "maximize") return Direction::Maximize;
  throw Error(Errc::malformed_response, "unknown direction '" + std::string(name) + "'");
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool dominates(const std::vector<double>& a, const std::vector<double>& b,
               const std::vector<Direction>& directions) {
  if (a.size() != b.size() || a.size() != directions.size())
    throw Error(Errc::dimension_mismatch, "objective vectors disagree with directions");
  bool strictly_better = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double sign = directions[i] == Direction::Minimize ? 1.0 : -1.0;
    const double da = sign * a[i];
    const double db = sign * b[i];
    if (da > db) return false;
    if (da < db) strictly_better = true;
  }
  return strictly_better;
}

std::vector<Trial> best_trials(StoreBackend& store, const std::string& study_name) {
  const Study study = store.get_study(study_name);
  std::vector<Trial> complete;
  for (auto& t : store.list_trials(study_name)) {
    if (t.state == TrialState::Complete) complete.push_back(std::move(t));
  }
  if (complete.empty())
    throw Error(Errc::no_completed_trials, "study '" + study_name + "' has no completed trials");
  std::sort(complete.begin(), complete.end(),
            [](const Trial& a, const Trial& b) { return a.id < b.id; });

  if (study.directions.size() == 1) {
    const double sign = study.directions[0] == Direction::Minimize ? 1.0 : -1.0;
    const Trial* best = &complete.front();
    for (const auto& t : complete) {
      if (sign * t.values[0] < sign * best->values[0]) best = &t;
    }
    return {*best};
  }

  std::vector<Trial> front;
  for (const auto& candidate : complete) {
    bool dominated = false;
    for (const auto& other : complete) {
      if (other.id != candidate.id &&
          dominates(other.values, candidate.values, study.directions)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(candidate);
  }
  return front;
}

namespace detail {

std::pair<Study, bool> StudyTable::create_or_open(
    const std::string& name, const SearchSpace& space,
    const std::vector<Direction>& directions, const std::vector<std::string>& metric_names,
    const std::vector<std::string>& sampler_assignments) {
  if (directions.empty())
    throw Error(Errc::study_config_mismatch, "study requires at least one direction");
  if (!metric_names.empty() && metric_names.size() != directions.size())
    throw Error(Errc::study_config_mismatch,
                "metric names and directions must have the same length");
  const auto it = studies_.find(name);
  if (it != studies_.end()) {
    const Study& existing = it->second.meta;
    if (!(existing.space == space))
      throw Error(Errc::study_config_mismatch,
                  "study '" + name + "' exists with a different search space");
    if (existing.directions != directions)
      throw Error(Errc::study_config_mismatch,
                  "study '" + name + "' exists with different directions");
    return {existing, false};
  }
  StudyRec rec;
  rec.meta.name = name;
  rec.meta.space = space;
  rec.meta.directions = directions;
  rec.meta.metric_names = metric_names;
  rec.meta.sampler_assignments = sampler_assignments;
  auto [inserted, _] = studies_.emplace(name, std::move(rec));
  return {inserted->second.meta, true};
}

const StudyRec& StudyTable::get(const std::string& name) const {
  const auto it = studies_.find(name);
  if (it == studies_.end())
    throw Error(Errc::not_found, "study '" + name + "' does not exist");
  return it->second;
}

StudyRec& StudyTable::get_mut(const std::string& name) {
  const auto it = studies_.find(name);
  if (it == studies_.end())
    throw Error(Errc::not_found, "study '" + name + "' does not exist");
  return it->second;
}

bool StudyTable::has(const std::string& name) const { return studies_.count(name) > 0; }

std::vector<std::string> StudyTable::names() const {
  std::vector<std::string> out;
  out.reserve(studies_.size());
  for (const auto& [name, _] : studies_) out.push_back(name);
  return out;
}

Trial& StudyTable::get_trial(const std::string& study, std::int64_t id) {
  auto& rec = get_mut(study);
  if (id < 0 || static_cast<std::size_t>(id) >= rec.trials.size())
    throw Error(Errc::unknown_trial,
                "study '" + study + "' has no trial " + std::to_string(id));
  return rec.trials[static_cast<std::size_t>(id)];
}

Trial StudyTable::begin(const std::string& study, int agent_id, const ParamMap& params,
                        std::int64_t ts_ms) {
  auto& rec = get_mut(study);
  rec.meta.space.check_point(params);
  Trial t;
  t.id = static_cast<std::int64_t>(rec.trials.size());
  t.params = params;
  t.state = TrialState::Running;
  t.agent_id = agent_id;
  t.created_at_ms = ts_ms;
  rec.trials.push_back(t);
  return t;
}

void StudyTable::complete(const std::string& study, std::int64_t id,
                          const std::vector<double>& values, std::int64_t ts_ms) {
  auto& rec = get_mut(study);
  Trial& t = get_trial(study, id);
  if (t.state != TrialState::Running)
    throw Error(Errc::illegal_transition,
                "trial " + std::to_string(id) + " is already terminal");
  if (values.empty() || values.size() != rec.meta.directions.size())
    throw Error(Errc::dimension_mismatch,
                "expected " + std::to_string(rec.meta.directions.size()) +
                    " objective values, got " + std::to_string(values.size()));
  for (const double v : values) {
    if (!std::isfinite(v))
      throw Error(Errc::non_finite_value,
                  "objective value for trial " + std::to_string(id) + " is not finite");
  }
  t.state = TrialState::Complete;
  t.values = values;
  t.finished_at_ms = ts_ms;
}

void StudyTable::fail(const std::string& study, std::int64_t id, const std::string& reason,
                      std::int64_t ts_ms) {
  Trial& t = get_trial(study, id);
  if (t.state != TrialState::Running)
    throw Error(Errc::illegal_transition,
                "trial " + std::to_string(id) + " is already terminal");
  t.state = TrialState::Failed;
  t.values.clear();
  t.finished_at_ms = ts_ms;
  if (!reason.empty()) t.user_attrs["failed_reason"] = reason;
}

void StudyTable::set_attr(const std::string& study, std::int64_t id, const std::string& key,
                          const std::string& value) {
  get_trial(study, id).user_attrs[key] = value;
}

bool StudyTable::snapshot(const std::string& study, std::int64_t trial_count,
                          const std::vector<ImportanceReport>& reports) {
  auto& rec = get_mut(study);
  auto& snaps = rec.meta.attr_snapshots;
  const auto pos = std::lower_bound(
      snaps.begin(), snaps.end(), trial_count,
      [](const ImportanceSnapshot& s, std::int64_t c) { return s.trial_count < c; });
  if (pos != snaps.end() && pos->trial_count == trial_count) return false;
  snaps.insert(pos, ImportanceSnapshot{trial_count, reports});
  return true;
}

std::vector<std::int64_t> StudyTable::running_ids(const std::string& study) const {
  std::vector<std::int64_t> ids;
  for (const auto& t : get(study).trials) {
    if (t.state == TrialState::Running) ids.push_back(t.id);
  }
  return ids;
}

}  // namespace detail

Study MemoryStore::create_or_open_study(const std::string& name, const SearchSpace& space,
                                        const std::vector<Direction>& directions,
                                        const std::vector<std::string>& metric_names,
                                        const std::vector<std::string>& sampler_assignments) {
  std::lock_guard lock(mutex_);
  return table_.create_or_open(name, space, directions, metric_names, sampler_assignments)
      .first;
}

Study MemoryStore::get_study(const std::string& name) {
  std::lock_guard lock(mutex_);
  return table_.get(name).meta;
}

std::vector<std::string> MemoryStore::list_studies() {
  std::lock_guard lock(mutex_);
  return table_.names();
}

Trial MemoryStore::begin_trial(const std::string& study, int agent_id,
                               const ParamMap& params) {
  std::lock_guard lock(mutex_);
  return table_.begin(study, agent_id, params, now_ms());
}

void MemoryStore::complete_trial(const std::string& study, std::int64_t id,
                                 const std::vector<double>& values) {
  std::lock_guard lock(mutex_);
  table_.complete(study, id, values, now_ms());
}

void MemoryStore::fail_trial(const std::string& study, std::int64_t id,
                             const std::string& reason) {
  std::lock_guard lock(mutex_);
  table_.fail(study, id, reason, now_ms());
}

void MemoryStore::set_trial_attr(const std::string& study, std::int64_t id,
                                 const std::string& key, const std::string& value) {
  std::lock_guard lock(mutex_);
  table_.set_attr(study, id, key, value);
}

std::vector<Trial> MemoryStore::list_trials(const std::string& study) {
  std::lock_guard lock(mutex_);
  return table_.get(study).trials;
}

bool MemoryStore::append_snapshot(const std::string& study, std::int64_t trial_count,
                                  const std::vector<ImportanceReport>& reports) {
  std::lock_guard lock(mutex_);
  return table_.snapshot(study, trial_count, reports);
}

std::vector<ImportanceSnapshot> MemoryStore::list_snapshots(const std::string& study) {
  std::lock_guard lock(mutex_);
  return table_.get(study).meta.attr_snapshots;
}

std::int64_t MemoryStore::abandon_running(const std::string& study) {
  std::lock_guard lock(mutex_);
  const auto ids = table_.running_ids(study);
  for (const auto id : ids) table_.fail(study, id, "abandoned", now_ms());
  return static_cast<std::int64_t>(ids.size());
}

}  // namespace parex
