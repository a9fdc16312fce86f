#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "parex/filestore.hpp"
#include "parex/rng.hpp"
#include "parex/trialstore.hpp"

using namespace parex;

namespace {

SearchSpace two_dim_space() {
  SearchSpace space;
  space.add(ParamSpec::continuous("x", 0.0, 1.0));
  space.add(ParamSpec::continuous("y", 0.0, 1.0));
  return space;
}

ParamMap point(double x, double y) { return ParamMap{{"x", x}, {"y", y}}; }

std::filesystem::path temp_log(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() / "parex-tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / (tag + "-" + std::to_string(now_ms()) + "-" +
                           std::to_string(counter.fetch_add(1)) + ".log");
  std::filesystem::remove(path);
  return path;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected an Error");
}

void exercise_backend(StoreBackend& store) {
  const auto space = two_dim_space();

  SUBCASE("create, resume and config mismatch") {
    store.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {"RandomSampler"});
    const Trial t = store.begin_trial("s", 0, point(0.1, 0.2));
    CHECK(t.id == 0);
    store.complete_trial("s", t.id, {0.5});

    // Reopening with the same config keeps history intact.
    const Study again =
        store.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {});
    CHECK(again.name == "s");
    CHECK(store.list_trials("s").size() == 1);

    SearchSpace other = two_dim_space();
    other.add(ParamSpec::continuous("z", 0.0, 1.0));
    CHECK(code_of([&] {
            store.create_or_open_study("s", other, {Direction::Minimize}, {"m"}, {});
          }) == Errc::study_config_mismatch);
    CHECK(code_of([&] {
            store.create_or_open_study("s", space, {Direction::Maximize}, {"m"}, {});
          }) == Errc::study_config_mismatch);
    CHECK(code_of([&] { store.create_or_open_study("e", space, {}, {}, {}); }) ==
          Errc::study_config_mismatch);
  }

  SUBCASE("trial lifecycle and error paths") {
    store.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {});
    CHECK(code_of([&] { store.get_study("nope"); }) == Errc::not_found);
    CHECK(code_of([&] { store.begin_trial("s", 0, ParamMap{{"x", 0.5}}); }) ==
          Errc::point_space_mismatch);

    const Trial t = store.begin_trial("s", 3, point(0.1, 0.2));
    CHECK(t.state == TrialState::Running);

    CHECK(code_of([&] { store.complete_trial("s", 99, {1.0}); }) == Errc::unknown_trial);
    CHECK(code_of([&] {
            store.complete_trial("s", t.id, {std::nan("")});
          }) == Errc::non_finite_value);
    CHECK(code_of([&] { store.complete_trial("s", t.id, {1.0, 2.0}); }) ==
          Errc::dimension_mismatch);
    CHECK(code_of([&] { store.complete_trial("s", t.id, {}); }) == Errc::dimension_mismatch);

    // The NaN attempt left the trial Running, so it can still be failed.
    store.fail_trial("s", t.id, "non-finite objective");
    CHECK(code_of([&] { store.complete_trial("s", t.id, {1.0}); }) ==
          Errc::illegal_transition);
    CHECK(code_of([&] { store.fail_trial("s", t.id, "again"); }) == Errc::illegal_transition);

    const auto trials = store.list_trials("s");
    REQUIRE(trials.size() == 1);
    CHECK(trials[0].state == TrialState::Failed);
    CHECK(trials[0].values.empty());
    CHECK(trials[0].agent_id == 3);
    CHECK(trials[0].user_attrs.at("failed_reason") == "non-finite objective");
  }

  SUBCASE("complete twice errors") {
    store.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {});
    const Trial t = store.begin_trial("s", 0, point(0.3, 0.4));
    store.complete_trial("s", t.id, {0.3});
    CHECK(code_of([&] { store.complete_trial("s", t.id, {0.3}); }) ==
          Errc::illegal_transition);
  }

  SUBCASE("user attrs") {
    store.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {});
    const Trial t = store.begin_trial("s", 0, point(0.3, 0.4));
    store.set_trial_attr("s", t.id, "metrics_status", "missing");
    CHECK(store.list_trials("s")[0].user_attrs.at("metrics_status") == "missing");
  }

  SUBCASE("snapshots are keyed by trial count and kept ordered") {
    store.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {});
    ImportanceReport r;
    r.trial_count = 40;
    r.entries = {{"x", 0.7}, {"y", 0.3}};
    CHECK(store.append_snapshot("s", 40, {r}));
    r.trial_count = 20;
    CHECK(store.append_snapshot("s", 20, {r}));
    CHECK_FALSE(store.append_snapshot("s", 20, {r}));  // lost the race

    const auto snaps = store.list_snapshots("s");
    REQUIRE(snaps.size() == 2);
    CHECK(snaps[0].trial_count == 20);
    CHECK(snaps[1].trial_count == 40);
  }

  SUBCASE("abandon_running fails interrupted trials only") {
    store.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {});
    const Trial a = store.begin_trial("s", 0, point(0.1, 0.1));
    const Trial b = store.begin_trial("s", 0, point(0.2, 0.2));
    store.complete_trial("s", a.id, {1.0});
    CHECK(store.abandon_running("s") == 1);
    const auto trials = store.list_trials("s");
    CHECK(trials[0].state == TrialState::Complete);
    CHECK(trials[1].state == TrialState::Failed);
    CHECK(store.abandon_running("s") == 0);
  }
}

}  // namespace

TEST_CASE("memory store honors the backend contract") {
  MemoryStore store;
  exercise_backend(store);
}

TEST_CASE("file store honors the backend contract") {
  FileStore store(temp_log("contract"));
  exercise_backend(store);
}

TEST_CASE("best_trials: single objective picks the optimum, ties to lowest id") {
  MemoryStore store;
  const auto space = two_dim_space();
  store.create_or_open_study("min", space, {Direction::Minimize}, {"m"}, {});
  for (const double v : {3.0, 1.0, 2.0}) {
    const Trial t = store.begin_trial("min", 0, point(0.1, 0.1));
    store.complete_trial("min", t.id, {v});
  }
  auto best = best_trials(store, "min");
  REQUIRE(best.size() == 1);
  CHECK(best[0].id == 1);

  store.create_or_open_study("max", space, {Direction::Maximize}, {"m"}, {});
  for (const double v : {3.0, 3.0}) {
    const Trial t = store.begin_trial("max", 0, point(0.1, 0.1));
    store.complete_trial("max", t.id, {v});
  }
  best = best_trials(store, "max");
  REQUIRE(best.size() == 1);
  CHECK(best[0].id == 0);

  store.create_or_open_study("empty", space, {Direction::Minimize}, {"m"}, {});
  const Trial r = store.begin_trial("empty", 0, point(0.5, 0.5));
  store.fail_trial("empty", r.id, "boom");
  CHECK_THROWS_AS(best_trials(store, "empty"), Error);
}

TEST_CASE("best_trials: two-objective Pareto set by pairwise dominance") {
  MemoryStore store;
  const auto space = two_dim_space();
  store.create_or_open_study("mo", space, {Direction::Minimize, Direction::Minimize},
                             {"a", "b"}, {});
  for (const auto& values :
       std::vector<std::vector<double>>{{1.0, 2.0}, {2.0, 1.0}, {2.0, 2.0}}) {
    const Trial t = store.begin_trial("mo", 0, point(0.1, 0.1));
    store.complete_trial("mo", t.id, values);
  }
  const auto front = best_trials(store, "mo");
  REQUIRE(front.size() == 2);
  CHECK(front[0].values == std::vector<double>{1.0, 2.0});
  CHECK(front[1].values == std::vector<double>{2.0, 1.0});
}

TEST_CASE("best_trials is invariant under insertion order") {
  const auto space = two_dim_space();
  std::vector<std::vector<double>> values;
  Rng rng(31);
  for (int i = 0; i < 60; ++i) values.push_back({rng.uniform(), rng.uniform()});

  const auto front_of = [&](const std::vector<std::vector<double>>& ordered) {
    MemoryStore store;
    store.create_or_open_study("s", space, {Direction::Minimize, Direction::Minimize},
                               {"a", "b"}, {});
    for (const auto& v : ordered) {
      const Trial t = store.begin_trial("s", 0, point(0.5, 0.5));
      store.complete_trial("s", t.id, v);
    }
    std::vector<std::vector<double>> front;
    for (const auto& t : best_trials(store, "s")) front.push_back(t.values);
    std::sort(front.begin(), front.end());
    return front;
  };

  const auto baseline = front_of(values);
  for (int shuffle = 0; shuffle < 5; ++shuffle) {
    auto permuted = values;
    for (std::size_t i = permuted.size(); i > 1; --i)
      std::swap(permuted[i - 1], permuted[rng.index(i)]);
    CHECK(front_of(permuted) == baseline);
  }
}

TEST_CASE("concurrent begin/complete yields dense distinct ids and quiescence") {
  MemoryStore store;
  const auto space = two_dim_space();
  store.create_or_open_study("c", space, {Direction::Minimize}, {"m"}, {});

  constexpr int kAgents = 5;
  constexpr int kPerAgent = 50;
  std::vector<std::thread> agents;
  for (int a = 0; a < kAgents; ++a) {
    agents.emplace_back([&store, a]() {
      Rng rng(static_cast<std::uint64_t>(a) + 1);
      for (int i = 0; i < kPerAgent; ++i) {
        const Trial t = store.begin_trial("c", a, point(rng.uniform(), rng.uniform()));
        store.complete_trial("c", t.id, {rng.uniform()});
      }
    });
  }
  for (auto& t : agents) t.join();

  const auto trials = store.list_trials("c");
  REQUIRE(trials.size() == kAgents * kPerAgent);
  std::vector<std::int64_t> ids;
  for (const auto& t : trials) {
    CHECK(t.state == TrialState::Complete);
    ids.push_back(t.id);
  }
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == static_cast<std::int64_t>(i));
}

TEST_CASE("two file store handles share one log consistently") {
  const auto path = temp_log("shared");
  FileStore first(path);
  FileStore second(path);
  const auto space = two_dim_space();

  // Concurrent create: exactly one creation record wins, both calls succeed.
  std::atomic<int> ready{0};
  std::thread t1([&]() {
    ++ready;
    while (ready.load() < 2) {}
    first.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {});
  });
  std::thread t2([&]() {
    ++ready;
    while (ready.load() < 2) {}
    second.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {});
  });
  t1.join();
  t2.join();

  std::ifstream log(path);
  std::string line;
  int create_records = 0;
  while (std::getline(log, line)) {
    if (line.find("create_study") != std::string::npos) ++create_records;
  }
  CHECK(create_records == 1);

  // Writes through one handle are visible through the other.
  const Trial t = first.begin_trial("s", 0, point(0.1, 0.2));
  second.complete_trial("s", t.id, {0.9});
  CHECK(first.list_trials("s")[0].state == TrialState::Complete);

  // Interleaved begins never duplicate ids.
  std::thread w1([&]() {
    for (int i = 0; i < 40; ++i) first.begin_trial("s", 1, point(0.3, 0.3));
  });
  std::thread w2([&]() {
    for (int i = 0; i < 40; ++i) second.begin_trial("s", 2, point(0.4, 0.4));
  });
  w1.join();
  w2.join();
  const auto trials = first.list_trials("s");
  CHECK(trials.size() == 81);
  std::vector<std::int64_t> ids;
  for (const auto& trial : trials) ids.push_back(trial.id);
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("a resumed study keeps its pre-interrupt trials") {
  const auto path = temp_log("resume");
  const auto space = two_dim_space();
  {
    FileStore store(path);
    store.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {});
    for (int i = 0; i < 7; ++i) {
      const Trial t = store.begin_trial("s", 0, point(0.1, 0.1));
      store.complete_trial("s", t.id, {static_cast<double>(i)});
    }
  }
  {
    FileStore store(path);
    const Study s = store.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {});
    CHECK(s.name == "s");
    CHECK(store.list_trials("s").size() == 7);
    for (int i = 0; i < 3; ++i) {
      const Trial t = store.begin_trial("s", 1, point(0.2, 0.2));
      store.complete_trial("s", t.id, {static_cast<double>(i)});
    }
    CHECK(store.list_trials("s").size() == 10);
  }
}

TEST_CASE("file log reopens consistently after truncation at any record boundary") {
  const auto path = temp_log("truncate");
  const auto space = two_dim_space();
  {
    FileStore store(path);
    store.create_or_open_study("s", space, {Direction::Minimize}, {"m"}, {});
    for (int i = 0; i < 12; ++i) {
      const Trial t = store.begin_trial("s", 0, point(0.1, 0.1));
      if (i % 3 == 0) {
        store.fail_trial("s", t.id, "boom");
      } else {
        store.complete_trial("s", t.id, {static_cast<double>(i)});
      }
    }
  }

  std::ifstream in(path, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::size_t> boundaries{0};
  for (std::size_t i = 0; i < content.size(); ++i) {
    if (content[i] == '\n') boundaries.push_back(i + 1);
  }

  for (const auto boundary : boundaries) {
    const auto trimmed = temp_log("truncate-prefix");
    std::ofstream(trimmed, std::ios::binary) << content.substr(0, boundary);
    FileStore reopened(trimmed);
    if (boundary == 0) {
      CHECK(reopened.list_studies().empty());
    } else {
      // Replay must succeed and expose a consistent prefix of the history.
      const auto trials = reopened.list_trials("s");
      for (std::size_t i = 0; i < trials.size(); ++i)
        CHECK(trials[i].id == static_cast<std::int64_t>(i));
    }
    std::filesystem::remove(trimmed);
  }

  // A torn final record (no trailing newline) is ignored on replay.
  const auto torn = temp_log("torn");
  std::ofstream(torn, std::ios::binary) << content << "{\"v\":1,\"op\":\"begin\",\"stu";
  FileStore reopened(torn);
  CHECK(reopened.list_trials("s").size() == 12);
  const Trial t = reopened.begin_trial("s", 1, point(0.9, 0.9));
  CHECK(t.id == 12);
}
