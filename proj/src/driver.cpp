#include "parex/driver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <set>
#include <thread>

#include "parex/fanova.hpp"
#include "parex/json_codec.hpp"
#include "parex/metrics.hpp"
#include "parex/samplers.hpp"

namespace parex {

namespace {

struct PerfMetric {
  std::string series;  // cpu | memory | io
  std::string agg;     // min | max | mean | std
};

std::optional<PerfMetric> parse_perf_metric(const std::string& name) {
  const auto underscore = name.rfind('_');
  if (underscore == std::string::npos) return std::nullopt;
  PerfMetric m{name.substr(0, underscore), name.substr(underscore + 1)};
  static const std::set<std::string> kSeries = {"cpu", "memory", "io"};
  static const std::set<std::string> kAggs = {"min", "max", "mean", "std"};
  if (kSeries.count(m.series) == 0 || kAggs.count(m.agg) == 0) return std::nullopt;
  return m;
}

double aggregate_value(const MetricsSeries& series, const std::string& agg) {
  if (agg == "min") return series.agg.min;
  if (agg == "max") return series.agg.max;
  if (agg == "mean") return series.agg.mean;
  return series.agg.std;
}

struct MetricPlan {
  WorkflowGraph graph;                       // model with metric graphs appended
  std::vector<std::optional<PerfMetric>> perf;  // per payload metric; set for perf
  bool any_perf = false;
};

MetricPlan resolve_metrics(const Payload& payload, const WorkflowRegistry& registry,
                           const RunConfig& config) {
  MetricPlan plan;
  plan.graph = registry.lookup(payload.workflow_type);
  std::vector<Diagnostic> problems;
  for (const auto& metric : payload.options.metrics) {
    if (const auto perf = parse_perf_metric(metric)) {
      plan.perf.push_back(perf);
      plan.any_perf = true;
      if (config.monitor_url.empty())
        problems.push_back({"variational_options.metric_to_optimize",
                            "metric '" + metric + "' needs a monitoring endpoint"});
      continue;
    }
    plan.perf.emplace_back(std::nullopt);
    if (!registry.has(metric)) {
      problems.push_back({"variational_options.metric_to_optimize",
                          "no metric workflow named '" + metric + "'"});
      continue;
    }
    plan.graph = compose(plan.graph, registry.lookup(metric));
  }
  if (!problems.empty()) throw PayloadError(std::move(problems));
  return plan;
}

struct AgentTask {
  int agent_id;
  std::string study;
  std::string sampler_type;
  std::int64_t budget;
};

std::string trial_dir_name(std::int64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "trial_%06lld", static_cast<long long>(id));
  return buf;
}

void take_due_snapshots(StoreBackend& store, const std::string& study,
                        const SearchSpace& space, std::size_t n_objectives,
                        const FanovaConfig& fanova) {
  auto trials = store.list_trials(study);
  std::vector<Trial> complete;
  for (auto& t : trials) {
    if (t.state == TrialState::Complete) complete.push_back(std::move(t));
  }
  std::sort(complete.begin(), complete.end(),
            [](const Trial& a, const Trial& b) { return a.id < b.id; });
  const auto count = static_cast<std::int64_t>(complete.size());
  if (count < kSnapshotInterval) return;

  std::set<std::int64_t> existing;
  for (const auto& snap : store.list_snapshots(study)) existing.insert(snap.trial_count);

  for (std::int64_t threshold = kSnapshotInterval; threshold <= count;
       threshold += kSnapshotInterval) {
    if (existing.count(threshold) > 0) continue;
    const std::vector<Trial> window(complete.begin(),
                                    complete.begin() + static_cast<std::ptrdiff_t>(threshold));
    std::vector<ImportanceReport> reports;
    bool skipped = false;
    for (std::size_t objective = 0; objective < n_objectives; ++objective) {
      try {
        reports.push_back(importances(window, space, static_cast<int>(objective), fanova));
      } catch (const Error& e) {
        if (e.code() == Errc::insufficient_data) {
          skipped = true;
          break;
        }
        throw;
      }
    }
    if (!skipped) store.append_snapshot(study, threshold, reports);
  }
}

class AgentRunner {
 public:
  AgentRunner(const Payload& payload, StoreBackend& store, const MetricPlan& plan,
              const RunConfig& config, std::uint64_t seed)
      : payload_(payload), store_(store), plan_(plan), config_(config), seed_(seed) {
    fanova_ = fanova_config_from_json(payload.options.fanova_config);
    if (!payload.options.fanova_config.contains("seed")) fanova_.seed = seed;
  }

  AgentOutcome run(const AgentTask& task) {
    AgentOutcome outcome;
    outcome.agent_id = task.agent_id;
    outcome.study = task.study;
    try {
      run_episodes(task, outcome);
    } catch (const std::exception& e) {
      outcome.error = e.what();
    }
    return outcome;
  }

 private:
  void run_episodes(const AgentTask& task, AgentOutcome& outcome) {
    Rng rng(mix_seed(mix_seed(seed_, hash_str(task.study)),
                     static_cast<std::uint64_t>(task.agent_id)));
    const auto sampler = make_sampler(task.sampler_type, payload_.options.sampler_config);
    const auto& directions = payload_.options.directions;

    for (std::int64_t episode = 0; episode < task.budget; ++episode) {
      if (config_.episode_hook)
        config_.episode_hook(task.study, task.agent_id, static_cast<int>(episode));

      std::vector<Trial> history;
      for (auto& t : store_.list_trials(task.study)) {
        if (t.state == TrialState::Complete) history.push_back(std::move(t));
      }
      const ParamMap point = sampler->suggest(payload_.space, history, directions, rng);
      const Trial trial = store_.begin_trial(task.study, task.agent_id, point);

      try {
        run_one_trial(task, trial, point);
        ++outcome.completed;
      } catch (const std::exception& e) {
        store_.fail_trial(task.study, trial.id, e.what());
        ++outcome.failed;
      }
      take_due_snapshots(store_, task.study, payload_.space, directions.size(), fanova_);
    }
  }

  void run_one_trial(const AgentTask& task, const Trial& trial, const ParamMap& point) {
    const auto staging = config_.staging_root / task.study / trial_dir_name(trial.id);
    const ParamMap merged = payload_.space.with_fixed(point);

    const auto started = std::chrono::steady_clock::now();
    const auto workflow_values = parex::run(plan_.graph, merged, staging);
    const double runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    std::vector<MetricsSeries> perf_series;
    bool perf_available = false;
    if (!config_.monitor_url.empty()) {
      const std::int64_t step = std::max<std::int64_t>(1, config_.monitor_step_s);
      std::int64_t window = config_.monitor_window_s;
      if (window <= 0) {
        // Local default: the trial's own runtime padded by one step.
        window = static_cast<std::int64_t>(runtime_s) + 2 * step;
        window = ((window + step - 1) / step) * step;
      }
      try {
        perf_series = scrape_metrics(config_.monitor_url, now_ms() / 1000, window, step,
                                     config_.pod_selector);
        perf_available = true;
        write_metrics_csv(perf_series, staging / "metrics.csv");
        for (const auto& series : perf_series) {
          store_.set_trial_attr(task.study, trial.id, "metrics." + series.metric + ".min",
                                format_double(series.agg.min));
          store_.set_trial_attr(task.study, trial.id, "metrics." + series.metric + ".max",
                                format_double(series.agg.max));
          store_.set_trial_attr(task.study, trial.id, "metrics." + series.metric + ".mean",
                                format_double(series.agg.mean));
          store_.set_trial_attr(task.study, trial.id, "metrics." + series.metric + ".std",
                                format_double(series.agg.std));
        }
      } catch (const Error& e) {
        if (plan_.any_perf) throw;  // the objective needs the series
        store_.set_trial_attr(task.study, trial.id, "metrics_status", "missing");
      }
    }

    std::vector<double> values;
    values.reserve(payload_.options.metrics.size());
    for (std::size_t m = 0; m < payload_.options.metrics.size(); ++m) {
      const auto& name = payload_.options.metrics[m];
      if (plan_.perf[m].has_value()) {
        if (!perf_available)
          throw Error(Errc::monitor_unreachable,
                      "metric '" + name + "' needs the monitoring endpoint");
        const auto& want = *plan_.perf[m];
        const auto it =
            std::find_if(perf_series.begin(), perf_series.end(),
                         [&](const MetricsSeries& s) { return s.metric == want.series; });
        if (it == perf_series.end())
          throw Error(Errc::malformed_response, "monitor returned no " + want.series);
        values.push_back(aggregate_value(*it, want.agg));
      } else {
        values.push_back(workflow_values.at(name));
      }
    }
    store_.complete_trial(task.study, trial.id, values);
  }

  const Payload& payload_;
  StoreBackend& store_;
  const MetricPlan& plan_;
  const RunConfig& config_;
  std::uint64_t seed_;
  FanovaConfig fanova_;
};

}  // namespace

RunResult run_study(const Payload& payload, StoreBackend& store,
                    const WorkflowRegistry& registry, const RunConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  const StudyOptions& opts = payload.options;
  const std::uint64_t seed = config.seed_override.value_or(opts.seed);

  MetricPlan plan = resolve_metrics(payload, registry, config);

  // Assign agents to studies and samplers.
  std::vector<AgentTask> tasks;
  std::vector<std::string> study_order;
  std::map<std::string, std::vector<std::size_t>> study_agents;
  for (int agent = 0; agent < opts.num_studies; ++agent) {
    AgentTask task;
    task.agent_id = agent;
    task.study =
        opts.shared_study() ? opts.study_names[0] : opts.study_names[static_cast<std::size_t>(agent)];
    task.sampler_type = opts.sampler_types.size() == 1
                            ? opts.sampler_types[0]
                            : opts.sampler_types[static_cast<std::size_t>(agent)];
    task.budget = 0;
    if (study_agents.emplace(task.study, std::vector<std::size_t>{}).second)
      study_order.push_back(task.study);
    study_agents[task.study].push_back(tasks.size());
    tasks.push_back(std::move(task));
  }

  // Open every study, abandon interrupted trials, and split the remaining
  // budget so a resumed study tops up to exactly num_agents * num_episodes.
  for (const auto& study : study_order) {
    const auto& agent_indices = study_agents[study];
    std::vector<std::string> assignments;
    for (const auto idx : agent_indices) assignments.push_back(tasks[idx].sampler_type);
    store.create_or_open_study(study, payload.space, opts.directions, opts.metrics,
                               assignments);
    store.abandon_running(study);
    const auto existing = static_cast<std::int64_t>(store.list_trials(study).size());
    const std::int64_t target =
        static_cast<std::int64_t>(agent_indices.size()) * opts.num_episodes;
    std::int64_t remaining = std::max<std::int64_t>(0, target - existing);
    const auto k = static_cast<std::int64_t>(agent_indices.size());
    for (std::int64_t i = 0; i < k; ++i) {
      const std::int64_t share = remaining / k + (i < remaining % k ? 1 : 0);
      tasks[agent_indices[static_cast<std::size_t>(i)]].budget = share;
    }
  }

  AgentRunner runner(payload, store, plan, config, seed);

  const int workers = std::min<int>(
      opts.num_studies, config.parallelism > 0 ? config.parallelism : opts.num_studies);
  std::vector<AgentOutcome> outcomes(tasks.size());
  std::atomic<std::size_t> next_task{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t index = next_task.fetch_add(1);
        if (index >= tasks.size()) return;
        outcomes[index] = runner.run(tasks[index]);
      }
    });
  }
  for (auto& worker : pool) worker.join();

  RunResult result;
  result.agents = std::move(outcomes);
  for (const auto& study : study_order) {
    StudyResult sr;
    sr.study_name = study;
    try {
      sr.best = best_trials(store, study);
    } catch (const Error& e) {
      if (e.code() != Errc::no_completed_trials) throw;
    }
    sr.importance_history = store.list_snapshots(study);
    const auto trials = store.list_trials(study);
    sr.trial_count = static_cast<std::int64_t>(trials.size());
    for (const auto& t : trials) ++sr.per_agent_trials[t.agent_id];
    result.studies.push_back(std::move(sr));
  }
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace parex
