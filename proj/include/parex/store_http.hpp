#pragma once

#include <memory>
#include <string>
#include <thread>

#include "parex/trialstore.hpp"

namespace parex {

// Network front-end for a store backend so agents on other machines share
// the same trial history.  Endpoints mirror the StoreBackend operations and
// exchange the same JSON record schema as the file log:
//
//   POST /v1/studies                          create_or_open_study
//   GET  /v1/studies                          list_studies
//   GET  /v1/studies/{name}                   get_study
//   POST /v1/studies/{name}/trials            begin_trial
//   GET  /v1/studies/{name}/trials            list_trials
//   POST /v1/studies/{name}/trials/{id}/complete
//   POST /v1/studies/{name}/trials/{id}/fail
//   POST /v1/studies/{name}/trials/{id}/attrs set_trial_attr
//   POST /v1/studies/{name}/snapshots         append_snapshot
//   GET  /v1/studies/{name}/snapshots         list_snapshots
//   POST /v1/studies/{name}/abandon           abandon_running
//
// Errors come back as {"error":{"code":"<Errc name>","message":".."}}; the
// client rethrows the original code.  Trial ids are assigned server-side,
// so uniqueness holds across clients even through retries.
class StoreServer {
 public:
  explicit StoreServer(StoreBackend& backend);
  ~StoreServer();

  StoreServer(const StoreServer&) = delete;
  StoreServer& operator=(const StoreServer&) = delete;

  // Blocks until stop() is called.  Throws StoreUnavailable when the
  // address cannot be bound.
  void serve(const std::string& host, int port);

  // Binds an ephemeral port and serves on a background thread; returns the
  // port.  Used by tests and by serve() internally.
  int start_async(const std::string& host, int port = 0);

  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// StoreBackend implementation over the protocol above.  Transport failures
// are retried with backoff; exhausted retries raise StoreUnavailable.  A
// complete/fail whose first attempt was applied but whose response was lost
// resolves the retry via the trial's current state.
class RemoteStore : public StoreBackend {
 public:
  explicit RemoteStore(const std::string& base_url, int max_retries = 10);
  ~RemoteStore() override;

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
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// True when the store locator should be treated as a server URL rather than
// a log file path.
bool is_store_url(const std::string& locator);

// FileStore for paths, RemoteStore for http:// or https:// locators.
std::unique_ptr<StoreBackend> open_store(const std::string& locator);

}  // namespace parex
