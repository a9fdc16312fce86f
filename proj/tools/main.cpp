#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "parex/driver.hpp"
#include "parex/filestore.hpp"
#include "parex/json_codec.hpp"
#include "parex/metrics.hpp"
#include "parex/payload.hpp"
#include "parex/report.hpp"
#include "parex/store_http.hpp"
#include "parex/workflows.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitStoreUnreachable = 3;

parex::StoreServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

struct RunArgs {
  std::string payload_path;
  std::string store = "parex-store.log";
  std::string staging = "parex-staging";
  std::string out_dir = "parex-out";
  int parallelism = 0;
  std::int64_t seed = -1;
  std::string monitor_url;
  std::string pod_selector = ".*";
  std::int64_t monitor_window = parex::kDefaultMonitorWindowS;
  std::int64_t monitor_step = parex::kDefaultMonitorStepS;
};

int cmd_run(const RunArgs& args) {
  const parex::Payload payload = parex::load_payload_file(args.payload_path);
  for (const auto& warning : payload.warnings) std::cerr << "warning: " << warning << "\n";

  const auto store = parex::open_store(args.store);
  const auto registry = parex::builtin_registry();

  parex::RunConfig config;
  config.staging_root = args.staging;
  config.parallelism = args.parallelism;
  if (args.seed >= 0) config.seed_override = static_cast<std::uint64_t>(args.seed);
  config.monitor_url = args.monitor_url;
  config.pod_selector = args.pod_selector;
  config.monitor_window_s = args.monitor_window;
  config.monitor_step_s = args.monitor_step;

  const parex::RunResult result = parex::run_study(payload, *store, registry, config);

  const std::filesystem::path out_dir(args.out_dir);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream report(out_dir / "report.json", std::ios::binary | std::ios::trunc);
    report << parex::run_result_to_json(result).dump(2) << "\n";
  }
  for (const auto& sr : result.studies) {
    const parex::Study study = store->get_study(sr.study_name);
    const auto trials = store->list_trials(sr.study_name);
    parex::write_trials_csv(out_dir / (sr.study_name + "-trials.csv"), study, trials);
    parex::write_snapshots_csv(out_dir / (sr.study_name + "-snapshots.csv"), study,
                               sr.importance_history);
    std::cout << "study=" << sr.study_name << " trials=" << sr.trial_count
              << " snapshots=" << sr.importance_history.size();
    if (!sr.best.empty() && !sr.best.front().values.empty())
      std::cout << " best=" << parex::format_double(sr.best.front().values[0]);
    std::cout << "\n";
  }
  for (const auto& agent : result.agents) {
    if (!agent.error.empty())
      std::cerr << "agent " << agent.agent_id << " aborted: " << agent.error << "\n";
  }
  std::cout << "status=ok wall_time_s=" << parex::format_double(result.wall_time_s)
            << " out=" << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_serve_store(const std::string& store_path, const std::string& listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) {
    std::cerr << "listen address must be host:port\n";
    return kExitValidation;
  }
  const std::string host = listen.substr(0, colon);
  const int port = std::stoi(listen.substr(colon + 1));

  parex::FileStore store(store_path);
  parex::StoreServer server(store);
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::cout << "status=serving store=" << store_path << " listen=" << listen << "\n"
            << std::flush;
  server.serve(host, port);
  g_server = nullptr;
  store.sync_to_disk();
  std::cout << "status=stopped\n";
  return kExitOk;
}

int cmd_report(const std::string& store_locator, const std::string& study_name,
               const std::string& kind, const std::string& format,
               const std::string& out_dir_arg) {
  const auto store = parex::open_store(store_locator);
  parex::Study study;
  try {
    study = store->get_study(study_name);
  } catch (const parex::Error& e) {
    if (e.code() == parex::Errc::not_found)
      throw parex::Error(parex::Errc::unknown_study, "no study named '" + study_name + "'");
    throw;
  }
  const auto trials = store->list_trials(study_name);
  const std::filesystem::path out_dir(out_dir_arg);
  std::filesystem::create_directories(out_dir);

  std::filesystem::path csv_path;
  std::string svg;
  if (kind == "convergence") {
    csv_path = out_dir / (study_name + "-convergence.csv");
    parex::write_convergence_csv(csv_path, study, trials);
    svg = parex::render_convergence_svg(study, trials);
  } else if (kind == "importances") {
    csv_path = out_dir / (study_name + "-importances.csv");
    const auto snapshots = store->list_snapshots(study_name);
    parex::write_snapshots_csv(csv_path, study, snapshots);
    svg = parex::render_importances_svg(study, snapshots);
  } else {
    csv_path = out_dir / (study_name + "-pareto.csv");
    const auto front = parex::best_trials(*store, study_name);
    parex::write_pareto_csv(csv_path, study, front);
    svg = parex::render_pareto_svg(study, front);
  }
  std::cout << "wrote=" << csv_path.string() << "\n";
  if (format == "svg") {
    auto svg_path = csv_path;
    svg_path.replace_extension(".svg");
    std::ofstream(svg_path, std::ios::binary | std::ios::trunc) << svg;
    std::cout << "wrote=" << svg_path.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parallel exploration of black-box workflows"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run a study from a payload file");
  run->add_option("--payload", run_args.payload_path, "payload JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--store", run_args.store, "store log path or http:// server URL")
      ->envname("PAREX_STORE");
  run->add_option("--staging", run_args.staging, "staging directory for trial artifacts")
      ->envname("PAREX_STAGING");
  run->add_option("--out", run_args.out_dir, "output directory for reports");
  run->add_option("--parallelism", run_args.parallelism, "worker cap (0 = one per study)");
  run->add_option("--seed", run_args.seed, "override the payload seed");
  run->add_option("--monitor", run_args.monitor_url, "monitoring server URL");
  run->add_option("--pod-selector", run_args.pod_selector, "pod selector for monitor queries");
  run->add_option("--monitor-window", run_args.monitor_window,
                  "scrape window in seconds (0 = trial runtime)");
  run->add_option("--monitor-step", run_args.monitor_step, "scrape step in seconds");

  std::string serve_store_path = "parex-store.log";
  std::string listen = "127.0.0.1:8700";
  auto* serve = app.add_subcommand("serve-store", "serve a store log over HTTP");
  serve->add_option("--store", serve_store_path, "store log path")->envname("PAREX_STORE");
  serve->add_option("--listen", listen, "host:port to listen on");

  std::string report_store;
  std::string report_study;
  std::string report_kind = "convergence";
  std::string report_format = "csv";
  std::string report_out = "parex-out";
  auto* report = app.add_subcommand("report", "export reports for a study");
  report->add_option("--store", report_store, "store log path or http:// server URL")
      ->envname("PAREX_STORE")
      ->required();
  report->add_option("--study", report_study, "study name")->required();
  report->add_option("--kind", report_kind, "convergence | importances | pareto")
      ->check(CLI::IsMember({"convergence", "importances", "pareto"}));
  report->add_option("--format", report_format, "csv | svg")
      ->check(CLI::IsMember({"csv", "svg"}));
  report->add_option("--out", report_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (serve->parsed()) return cmd_serve_store(serve_store_path, listen);
    if (report->parsed())
      return cmd_report(report_store, report_study, report_kind, report_format, report_out);
  } catch (const parex::PayloadError& e) {
    for (const auto& d : e.diagnostics())
      std::cerr << "error: " << d.path << ": " << d.message << "\n";
    return kExitValidation;
  } catch (const parex::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.code() == parex::Errc::store_unavailable) return kExitStoreUnreachable;
    if (e.code() == parex::Errc::payload_invalid) return kExitValidation;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
