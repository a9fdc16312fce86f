#pragma once

#include <filesystem>
#include <mutex>
#include <string>

#include "parex/trialstore.hpp"

namespace parex {

// Durable store backend over a newline-delimited JSON log: one
// self-describing, schema-versioned record per mutation.  Concurrent access
// from multiple processes on one host is serialized with an advisory flock
// on the log file; every operation re-syncs the in-memory mirror from the
// log tail before acting, so all handles observe one linear history.
//
// Record schema (v1), one JSON object per line:
//   {"v":1,"op":"create_study","ts":..,"study":..,"space":{..},
//    "directions":[..],"metrics":[..],"samplers":[..]}
//   {"v":1,"op":"begin","ts":..,"study":..,"trial":N,"agent":A,"params":{..}}
//   {"v":1,"op":"complete","ts":..,"study":..,"trial":N,"values":[..]}
//   {"v":1,"op":"fail","ts":..,"study":..,"trial":N,"reason":".."}
//   {"v":1,"op":"attr","study":..,"trial":N,"key":"..","value":".."}
//   {"v":1,"op":"snapshot","study":..,"count":N,"reports":[..]}
// A torn final line (crash mid-write) is ignored on replay and truncated
// away before the next append.
class FileStore : public StoreBackend {
 public:
  explicit FileStore(const std::filesystem::path& path);
  ~FileStore() override;

  FileStore(const FileStore&) = delete;
  FileStore& operator=(const FileStore&) = delete;

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

  // Flushes buffered records to stable storage.
  void sync_to_disk();

  const std::filesystem::path& path() const { return path_; }

 private:
  class LockGuard;

  void sync_from_log();
  void append_record(const ojson& record);
  void apply_record(const ojson& record);

  std::filesystem::path path_;
  int fd_ = -1;
  std::mutex mutex_;
  detail::StudyTable table_;
  std::uint64_t applied_offset_ = 0;  // bytes of the log already applied
  std::uint64_t tail_len_ = 0;        // trailing partial record, if any
};

}  // namespace parex
