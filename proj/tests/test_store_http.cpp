#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <thread>

#include "parex/filestore.hpp"
#include "parex/store_http.hpp"

using namespace parex;

namespace {

std::filesystem::path temp_log(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() / "parex-http";
  std::filesystem::create_directories(dir);
  const auto path = dir / (tag + "-" + std::to_string(::getpid()) + "-" +
                           std::to_string(counter.fetch_add(1)) + ".log");
  std::filesystem::remove(path);
  return path;
}

SearchSpace one_dim_space() {
  SearchSpace space;
  space.add(ParamSpec::continuous("x", 0.0, 1.0));
  return space;
}

}  // namespace

TEST_CASE("remote client mirrors the backend contract over HTTP") {
  MemoryStore backend;
  StoreServer server(backend);
  const int port = server.start_async("127.0.0.1");
  RemoteStore remote("http://127.0.0.1:" + std::to_string(port), 2);

  const auto space = one_dim_space();
  const Study created =
      remote.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {"RandomSampler"});
  CHECK(created.name == "s");
  CHECK(created.space == space);

  const Trial t0 = remote.begin_trial("s", 7, ParamMap{{"x", 0.25}});
  CHECK(t0.id == 0);
  CHECK(t0.agent_id == 7);
  remote.complete_trial("s", t0.id, {0.5});

  const Trial t1 = remote.begin_trial("s", 7, ParamMap{{"x", 0.75}});
  remote.fail_trial("s", t1.id, "boom");
  remote.set_trial_attr("s", t1.id, "note", "checked");

  const auto trials = remote.list_trials("s");
  REQUIRE(trials.size() == 2);
  CHECK(trials[0].state == TrialState::Complete);
  CHECK(trials[0].values == std::vector<double>{0.5});
  CHECK(std::get<double>(trials[0].params.at("x")) == 0.25);
  CHECK(trials[1].state == TrialState::Failed);
  CHECK(trials[1].user_attrs.at("note") == "checked");

  ImportanceReport report;
  report.trial_count = 20;
  report.entries = {{"x", 1.0}};
  CHECK(remote.append_snapshot("s", 20, {report}));
  CHECK_FALSE(remote.append_snapshot("s", 20, {report}));
  const auto snaps = remote.list_snapshots("s");
  REQUIRE(snaps.size() == 1);
  CHECK(snaps[0].reports[0].entries == report.entries);

  CHECK(remote.list_studies() == std::vector<std::string>{"s"});

  // Server-side errors keep their code across the wire.
  try {
    remote.get_study("missing");
    FAIL("expected NotFound");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_found);
  }
  try {
    remote.complete_trial("s", t0.id, {0.5});
    FAIL("expected IllegalTransition (values differ is fine, state matches)");
  } catch (const Error& e) {
    // t0 is already Complete with the same values, so the client treats the
    // retry as applied; force a genuine error with different values.
    FAIL("complete retry with matching values should be accepted: ", e.what());
  } catch (...) {
    FAIL("unexpected exception");
  }
  try {
    remote.complete_trial("s", t0.id, {0.9});
    FAIL("expected IllegalTransition");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::illegal_transition);
  }

  server.stop();
}

TEST_CASE("remote and local agents share one study") {
  const auto path = temp_log("mixed");
  FileStore backend(path);
  StoreServer server(backend);
  const int port = server.start_async("127.0.0.1");
  const std::string url = "http://127.0.0.1:" + std::to_string(port);

  const auto space = one_dim_space();
  backend.create_or_open_study("shared", space, {Direction::Minimize}, {"m"}, {});

  std::vector<std::thread> agents;
  for (int a = 0; a < 2; ++a) {
    agents.emplace_back([&url, a]() {
      RemoteStore remote(url, 5);
      Rng rng(static_cast<std::uint64_t>(a) + 1);
      for (int i = 0; i < 10; ++i) {
        const Trial t = remote.begin_trial("shared", a, ParamMap{{"x", rng.uniform()}});
        remote.complete_trial("shared", t.id, {rng.uniform()});
      }
    });
  }
  // A local agent writes directly to the backend while remotes run.
  Rng rng(99);
  for (int i = 0; i < 10; ++i) {
    const Trial t = backend.begin_trial("shared", 2, ParamMap{{"x", rng.uniform()}});
    backend.complete_trial("shared", t.id, {rng.uniform()});
  }
  for (auto& a : agents) a.join();

  RemoteStore remote(url, 5);
  const auto trials = remote.list_trials("shared");
  REQUIRE(trials.size() == 30);
  std::set<std::int64_t> ids;
  std::set<int> seen_agents;
  for (const auto& t : trials) {
    ids.insert(t.id);
    seen_agents.insert(t.agent_id);
    CHECK(t.state == TrialState::Complete);
  }
  CHECK(ids.size() == 30);
  CHECK(*ids.rbegin() == 29);
  CHECK(seen_agents == std::set<int>{0, 1, 2});
  server.stop();
}

TEST_CASE("a server restart preserves history and id uniqueness") {
  const auto path = temp_log("restart");
  const auto space = one_dim_space();
  int port = 0;
  {
    FileStore backend(path);
    StoreServer server(backend);
    port = server.start_async("127.0.0.1");
    RemoteStore remote("http://127.0.0.1:" + std::to_string(port), 2);
    remote.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {});
    for (int i = 0; i < 5; ++i) {
      const Trial t = remote.begin_trial("s", 0, ParamMap{{"x", 0.5}});
      remote.complete_trial("s", t.id, {1.0});
    }
    server.stop();
  }
  {
    FileStore backend(path);
    StoreServer server(backend);
    const int port2 = server.start_async("127.0.0.1", port);  // same address
    RemoteStore remote("http://127.0.0.1:" + std::to_string(port2), 10);
    for (int i = 0; i < 5; ++i) {
      const Trial t = remote.begin_trial("s", 1, ParamMap{{"x", 0.5}});
      remote.complete_trial("s", t.id, {1.0});
    }
    const auto trials = remote.list_trials("s");
    REQUIRE(trials.size() == 10);
    for (std::size_t i = 0; i < trials.size(); ++i)
      CHECK(trials[i].id == static_cast<std::int64_t>(i));
    server.stop();
  }
}

TEST_CASE("an unreachable server raises StoreUnavailable after retries") {
  RemoteStore remote("http://127.0.0.1:9", 1);
  try {
    remote.list_studies();
    FAIL("expected StoreUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::store_unavailable);
  }
}

#ifdef PAREX_CLI_PATH
namespace {

pid_t spawn_cli(const std::vector<std::string>& args) {
  std::vector<std::string> storage = args;
  storage.insert(storage.begin(), PAREX_CLI_PATH);
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  const pid_t pid = ::fork();
  if (pid == 0) {
    ::execv(PAREX_CLI_PATH, argv.data());
    _exit(127);
  }
  return pid;
}

}  // namespace

TEST_CASE("the serve-store command serves a log and flushes it on SIGTERM") {
  const auto path = temp_log("cli-serve");
  const int port = 18450 + static_cast<int>(::getpid() % 1000);
  const std::string listen = "127.0.0.1:" + std::to_string(port);
  const pid_t pid = spawn_cli({"serve-store", "--store", path.string(), "--listen", listen});
  REQUIRE(pid > 0);

  const std::string url = "http://127.0.0.1:" + std::to_string(port);
  RemoteStore remote(url, 40);  // generous retries while the server boots
  const auto space = one_dim_space();
  remote.create_or_open_study("cli", space, {Direction::Minimize}, {"m"}, {});
  for (int i = 0; i < 10; ++i) {
    const Trial t = remote.begin_trial("cli", 0, ParamMap{{"x", 0.25}});
    remote.complete_trial("cli", t.id, {0.5});
  }

  ::kill(pid, SIGTERM);
  int status = 0;
  ::waitpid(pid, &status, 0);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);

  FileStore reopened(path);
  const auto trials = reopened.list_trials("cli");
  REQUIRE(trials.size() == 10);
  for (const auto& t : trials) CHECK(t.state == TrialState::Complete);

  // The released port is bindable again; a second server on a taken port
  // exits nonzero.
  const pid_t again = spawn_cli({"serve-store", "--store", path.string(), "--listen", listen});
  RemoteStore probe(url, 40);
  CHECK(probe.list_studies() == std::vector<std::string>{"cli"});
  const pid_t conflict =
      spawn_cli({"serve-store", "--store", path.string(), "--listen", listen});
  int conflict_status = 0;
  ::waitpid(conflict, &conflict_status, 0);
  CHECK(WIFEXITED(conflict_status));
  CHECK(WEXITSTATUS(conflict_status) != 0);
  ::kill(again, SIGTERM);
  ::waitpid(again, nullptr, 0);
}
#endif
