#include "parex/filestore.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "parex/json_codec.hpp"

namespace parex {

namespace {

constexpr int kSchemaVersion = 1;

std::string errno_message(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

}  // namespace

// Holds the advisory lock for the duration of one store operation.
class FileStore::LockGuard {
 public:
  explicit LockGuard(int fd) : fd_(fd) {
    if (::flock(fd_, LOCK_EX) != 0)
      throw Error(Errc::store_io, errno_message("flock"));
  }
  ~LockGuard() { ::flock(fd_, LOCK_UN); }
  LockGuard(const LockGuard&) = delete;
  LockGuard& operator=(const LockGuard&) = delete;

 private:
  int fd_;
};

FileStore::FileStore(const std::filesystem::path& path) : path_(path) {
  if (path_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
  }
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
  if (fd_ < 0) throw Error(Errc::store_io, errno_message("open store log"));
  std::lock_guard lock(mutex_);
  LockGuard file_lock(fd_);
  sync_from_log();
}

FileStore::~FileStore() {
  if (fd_ >= 0) {
    ::fsync(fd_);
    ::close(fd_);
  }
}

void FileStore::sync_to_disk() {
  std::lock_guard lock(mutex_);
  if (fd_ >= 0) ::fsync(fd_);
}

void FileStore::sync_from_log() {
  struct stat st{};
  if (::fstat(fd_, &st) != 0) throw Error(Errc::store_io, errno_message("fstat"));
  const auto size = static_cast<std::uint64_t>(st.st_size);
  if (size < applied_offset_) {
    // The log shrank underneath us (external truncation); replay from scratch.
    table_ = detail::StudyTable{};
    applied_offset_ = 0;
    tail_len_ = 0;
  }
  if (size == applied_offset_ + tail_len_) return;

  std::string chunk;
  chunk.resize(size - applied_offset_);
  std::size_t read_total = 0;
  while (read_total < chunk.size()) {
    const ssize_t n = ::pread(fd_, chunk.data() + read_total, chunk.size() - read_total,
                              static_cast<off_t>(applied_offset_ + read_total));
    if (n < 0) throw Error(Errc::store_io, errno_message("pread store log"));
    if (n == 0) break;
    read_total += static_cast<std::size_t>(n);
  }
  chunk.resize(read_total);

  std::size_t pos = 0;
  while (pos < chunk.size()) {
    const auto nl = chunk.find('\n', pos);
    if (nl == std::string::npos) break;
    const std::string_view line(chunk.data() + pos, nl - pos);
    if (!line.empty()) {
      ojson record = ojson::parse(line, nullptr, false);
      if (record.is_discarded())
        throw Error(Errc::store_io, "corrupt record in store log at byte offset " +
                                        std::to_string(applied_offset_ + pos));
      apply_record(record);
    }
    pos = nl + 1;
  }
  applied_offset_ += pos;
  tail_len_ = chunk.size() - pos;
}

void FileStore::append_record(const ojson& record) {
  if (tail_len_ > 0) {
    // Drop the torn record a crashed writer left behind.
    if (::ftruncate(fd_, static_cast<off_t>(applied_offset_)) != 0)
      throw Error(Errc::store_io, errno_message("ftruncate store log"));
    tail_len_ = 0;
  }
  std::string line = record.dump();
  line.push_back('\n');
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::pwrite(fd_, line.data() + written, line.size() - written,
                               static_cast<off_t>(applied_offset_ + written));
    if (n < 0) throw Error(Errc::store_io, errno_message("pwrite store log"));
    written += static_cast<std::size_t>(n);
  }
  applied_offset_ += line.size();
}

void FileStore::apply_record(const ojson& record) {
  if (record.at("v").get<int>() != kSchemaVersion)
    throw Error(Errc::store_io, "unsupported store log schema version");
  const auto op = record.at("op").get<std::string>();
  const auto study = record.at("study").get<std::string>();
  if (op == "create_study") {
    table_.create_or_open(study, space_from_json(record.at("space")),
                          directions_from_json(record.at("directions")),
                          record.at("metrics").get<std::vector<std::string>>(),
                          record.at("samplers").get<std::vector<std::string>>());
  } else if (op == "begin") {
    const Trial t = table_.begin(study, record.at("agent").get<int>(),
                                 params_from_json(record.at("params")),
                                 record.at("ts").get<std::int64_t>());
    if (t.id != record.at("trial").get<std::int64_t>())
      throw Error(Errc::store_io, "store log trial ids are out of sequence");
  } else if (op == "complete") {
    table_.complete(study, record.at("trial").get<std::int64_t>(),
                    record.at("values").get<std::vector<double>>(),
                    record.at("ts").get<std::int64_t>());
  } else if (op == "fail") {
    table_.fail(study, record.at("trial").get<std::int64_t>(),
                record.at("reason").get<std::string>(),
                record.at("ts").get<std::int64_t>());
  } else if (op == "attr") {
    table_.set_attr(study, record.at("trial").get<std::int64_t>(),
                    record.at("key").get<std::string>(),
                    record.at("value").get<std::string>());
  } else if (op == "snapshot") {
    std::vector<ImportanceReport> reports;
    for (const auto& r : record.at("reports")) reports.push_back(report_from_json(r));
    table_.snapshot(study, record.at("count").get<std::int64_t>(), reports);
  } else {
    throw Error(Errc::store_io, "unknown store log op '" + op + "'");
  }
}

Study FileStore::create_or_open_study(const std::string& name, const SearchSpace& space,
                                      const std::vector<Direction>& directions,
                                      const std::vector<std::string>& metric_names,
                                      const std::vector<std::string>& sampler_assignments) {
  std::lock_guard lock(mutex_);
  LockGuard file_lock(fd_);
  sync_from_log();
  auto [study, created] =
      table_.create_or_open(name, space, directions, metric_names, sampler_assignments);
  if (created) {
    append_record(ojson{{"v", kSchemaVersion},
                        {"op", "create_study"},
                        {"ts", now_ms()},
                        {"study", name},
                        {"space", space_to_json(space)},
                        {"directions", directions_to_json(directions)},
                        {"metrics", metric_names},
                        {"samplers", sampler_assignments}});
  }
  return study;
}

Study FileStore::get_study(const std::string& name) {
  std::lock_guard lock(mutex_);
  LockGuard file_lock(fd_);
  sync_from_log();
  return table_.get(name).meta;
}

std::vector<std::string> FileStore::list_studies() {
  std::lock_guard lock(mutex_);
  LockGuard file_lock(fd_);
  sync_from_log();
  return table_.names();
}

Trial FileStore::begin_trial(const std::string& study, int agent_id, const ParamMap& params) {
  std::lock_guard lock(mutex_);
  LockGuard file_lock(fd_);
  sync_from_log();
  const std::int64_t ts = now_ms();
  const Trial t = table_.begin(study, agent_id, params, ts);
  append_record(ojson{{"v", kSchemaVersion},
                      {"op", "begin"},
                      {"ts", ts},
                      {"study", study},
                      {"trial", t.id},
                      {"agent", agent_id},
                      {"params", params_to_json(params)}});
  return t;
}

void FileStore::complete_trial(const std::string& study, std::int64_t id,
                               const std::vector<double>& values) {
  std::lock_guard lock(mutex_);
  LockGuard file_lock(fd_);
  sync_from_log();
  const std::int64_t ts = now_ms();
  table_.complete(study, id, values, ts);
  append_record(ojson{{"v", kSchemaVersion},
                      {"op", "complete"},
                      {"ts", ts},
                      {"study", study},
                      {"trial", id},
                      {"values", values}});
}

void FileStore::fail_trial(const std::string& study, std::int64_t id,
                           const std::string& reason) {
  std::lock_guard lock(mutex_);
  LockGuard file_lock(fd_);
  sync_from_log();
  const std::int64_t ts = now_ms();
  table_.fail(study, id, reason, ts);
  append_record(ojson{{"v", kSchemaVersion},
                      {"op", "fail"},
                      {"ts", ts},
                      {"study", study},
                      {"trial", id},
                      {"reason", reason}});
}

void FileStore::set_trial_attr(const std::string& study, std::int64_t id,
                               const std::string& key, const std::string& value) {
  std::lock_guard lock(mutex_);
  LockGuard file_lock(fd_);
  sync_from_log();
  table_.set_attr(study, id, key, value);
  append_record(ojson{{"v", kSchemaVersion},
                      {"op", "attr"},
                      {"study", study},
                      {"trial", id},
                      {"key", key},
                      {"value", value}});
}

std::vector<Trial> FileStore::list_trials(const std::string& study) {
  std::lock_guard lock(mutex_);
  LockGuard file_lock(fd_);
  sync_from_log();
  return table_.get(study).trials;
}

bool FileStore::append_snapshot(const std::string& study, std::int64_t trial_count,
                                const std::vector<ImportanceReport>& reports) {
  std::lock_guard lock(mutex_);
  LockGuard file_lock(fd_);
  sync_from_log();
  if (!table_.snapshot(study, trial_count, reports)) return false;
  ojson jreports = ojson::array();
  for (const auto& r : reports) jreports.push_back(report_to_json(r));
  append_record(ojson{{"v", kSchemaVersion},
                      {"op", "snapshot"},
                      {"study", study},
                      {"count", trial_count},
                      {"reports", std::move(jreports)}});
  return true;
}

std::vector<ImportanceSnapshot> FileStore::list_snapshots(const std::string& study) {
  std::lock_guard lock(mutex_);
  LockGuard file_lock(fd_);
  sync_from_log();
  return table_.get(study).meta.attr_snapshots;
}

std::int64_t FileStore::abandon_running(const std::string& study) {
  std::lock_guard lock(mutex_);
  LockGuard file_lock(fd_);
  sync_from_log();
  const auto ids = table_.running_ids(study);
  for (const auto id : ids) {
    const std::int64_t ts = now_ms();
    table_.fail(study, id, "abandoned", ts);
    append_record(ojson{{"v", kSchemaVersion},
                        {"op", "fail"},
                        {"ts", ts},
                        {"study", study},
                        {"trial", id},
                        {"reason", "abandoned"}});
  }
  return static_cast<std::int64_t>(ids.size());
}

}  // namespace parex
