#include "parex/executor.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "parex/json_codec.hpp"

namespace parex {

std::filesystem::path StepContext::artifact_path(const std::string& name) const {
  return staging / name;
}

void StepContext::write_artifact(const std::string& name, const std::string& content) const {
  const auto path = artifact_path(name);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw Error(Errc::step_failed, "failed to write artifact '" + name + "'");
}

std::string StepContext::read_artifact(const std::string& name) const {
  std::ifstream in(artifact_path(name), std::ios::binary);
  if (!in) throw Error(Errc::step_failed, "missing artifact '" + name + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void StepContext::write_scalar(const std::string& name, double value) const {
  write_artifact(name, format_double(value) + "\n");
}

double StepContext::read_scalar(const std::string& name) const {
  const std::string text = read_artifact(name);
  try {
    return std::stod(text);
  } catch (const std::exception&) {
    throw Error(Errc::step_failed, "artifact '" + name + "' is not a scalar");
  }
}

double StepContext::number(const std::string& name) const {
  const auto it = params.find(name);
  if (it == params.end())
    throw Error(Errc::point_space_mismatch, "missing workflow parameter '" + name + "'");
  return numeric_value(it->second);
}

double StepContext::number_or(const std::string& name, double fallback) const {
  const auto it = params.find(name);
  return it == params.end() ? fallback : numeric_value(it->second);
}

std::int64_t StepContext::integer_or(const std::string& name, std::int64_t fallback) const {
  const auto it = params.find(name);
  if (it == params.end()) return fallback;
  return static_cast<std::int64_t>(std::llround(numeric_value(it->second)));
}

std::string StepContext::text_or(const std::string& name, const std::string& fallback) const {
  const auto it = params.find(name);
  if (it == params.end()) return fallback;
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  return value_to_string(it->second);
}

std::vector<std::string> WorkflowGraph::produced_artifacts() const {
  std::vector<std::string> out;
  for (const auto& step : steps)
    out.insert(out.end(), step.outputs.begin(), step.outputs.end());
  return out;
}

std::vector<std::string> WorkflowGraph::free_inputs() const {
  std::set<std::string> produced;
  for (const auto& step : steps) produced.insert(step.outputs.begin(), step.outputs.end());
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& step : steps) {
    for (const auto& input : step.inputs) {
      if (produced.count(input) == 0 && seen.insert(input).second) out.push_back(input);
    }
  }
  return out;
}

namespace {

// Topological order by artifact dependencies; declaration order breaks ties
// so execution is deterministic.
std::vector<std::size_t> topological_order(const WorkflowGraph& graph, Errc cycle_code) {
  std::map<std::string, std::size_t> producer;
  for (std::size_t i = 0; i < graph.steps.size(); ++i) {
    for (const auto& out : graph.steps[i].outputs) {
      if (!producer.emplace(out, i).second)
        throw Error(Errc::unbound_metric_input,
                    "artifact '" + out + "' has more than one producer");
    }
  }

  std::vector<std::vector<std::size_t>> children(graph.steps.size());
  std::vector<std::size_t> indegree(graph.steps.size(), 0);
  for (std::size_t i = 0; i < graph.steps.size(); ++i) {
    for (const auto& input : graph.steps[i].inputs) {
      const auto it = producer.find(input);
      if (it == producer.end()) continue;  // free input, staged externally
      children[it->second].push_back(i);
      ++indegree[i];
    }
  }

  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < graph.steps.size(); ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    std::sort(ready.begin(), ready.end(), std::greater<>());
    const std::size_t step = ready.back();
    ready.pop_back();
    order.push_back(step);
    for (const auto child : children[step]) {
      if (--indegree[child] == 0) ready.push_back(child);
    }
  }
  if (order.size() != graph.steps.size())
    throw Error(cycle_code, "workflow '" + graph.name + "' contains a cycle");
  return order;
}

std::string sanitize_filename(const std::string& name) {
  std::string out = name;
  for (auto& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.')
      c = '_';
  }
  return out;
}

void run_external(const Step& step, const StepContext& ctx,
                  const std::filesystem::path& log_path) {
  std::vector<std::string> argv_storage = step.command;
  std::vector<char*> argv;
  argv.reserve(argv_storage.size() + 1);
  for (auto& arg : argv_storage) argv.push_back(arg.data());
  argv.push_back(nullptr);

  // Language-neutral parameter contract: a params.json document in the
  // staging dir plus PARAM_<NAME> environment variables.
  std::vector<std::string> env_storage;
  for (const auto& [name, value] : ctx.params) {
    std::string upper = name;
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    env_storage.push_back("PARAM_" + upper + "=" + value_to_string(value));
  }

  const pid_t pid = ::fork();
  if (pid < 0) throw Error(Errc::step_failed, "fork failed for step '" + step.id + "'");
  if (pid == 0) {
    if (::chdir(ctx.staging.c_str()) != 0) _exit(127);
    FILE* log = std::fopen(log_path.c_str(), "w");
    if (log != nullptr) {
      ::dup2(fileno(log), STDOUT_FILENO);
      ::dup2(fileno(log), STDERR_FILENO);
    }
    for (const auto& kv : env_storage) ::putenv(const_cast<char*>(kv.c_str()));
    ::execvp(argv[0], argv.data());
    _exit(127);
  }

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(step.timeout_s);
  int status = 0;
  while (true) {
    const pid_t done = ::waitpid(pid, &status, step.timeout_s > 0 ? WNOHANG : 0);
    if (done == pid) break;
    if (done < 0) throw Error(Errc::step_failed, "waitpid failed for step '" + step.id + "'");
    if (step.timeout_s > 0 && std::chrono::steady_clock::now() >= deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw Error(Errc::step_timeout,
                  "step '" + step.id + "' exceeded " + format_double(step.timeout_s) + "s");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    throw Error(Errc::step_failed,
                "step '" + step.id + "' exited with code " + std::to_string(code));
  }
}

}  // namespace

void validate_graph(const WorkflowGraph& graph) {
  topological_order(graph, Errc::cycle_introduced);
}

WorkflowGraph compose(const WorkflowGraph& model, const WorkflowGraph& metric) {
  if (metric.metric_outputs.empty())
    throw Error(Errc::unbound_metric_input,
                "workflow '" + metric.name + "' declares no metric output");

  std::set<std::string> available;
  for (const auto& out : model.produced_artifacts()) available.insert(out);
  for (const auto& ref : model.reference_inputs) available.insert(ref);
  for (const auto& ref : metric.reference_inputs) available.insert(ref);
  for (const auto& input : metric.free_inputs()) {
    if (available.count(input) == 0)
      throw Error(Errc::unbound_metric_input,
                  "metric '" + metric.name + "' input '" + input +
                      "' is not produced by workflow '" + model.name + "'");
  }

  WorkflowGraph combined;
  combined.name = model.name + "+" + metric.name;
  combined.steps = model.steps;
  for (Step step : metric.steps) {
    step.id = metric.name + ":" + step.id;
    combined.steps.push_back(std::move(step));
  }
  combined.required_params = model.required_params;
  for (const auto& p : metric.required_params) {
    if (std::find(combined.required_params.begin(), combined.required_params.end(), p) ==
        combined.required_params.end())
      combined.required_params.push_back(p);
  }
  combined.reference_inputs = model.reference_inputs;
  for (const auto& r : metric.reference_inputs) {
    if (std::find(combined.reference_inputs.begin(), combined.reference_inputs.end(), r) ==
        combined.reference_inputs.end())
      combined.reference_inputs.push_back(r);
  }
  combined.metric_outputs = model.metric_outputs;
  combined.metric_outputs.insert(combined.metric_outputs.end(),
                                 metric.metric_outputs.begin(), metric.metric_outputs.end());
  validate_graph(combined);
  return combined;
}

std::map<std::string, double> run(const WorkflowGraph& graph, const ParamMap& params,
                                  const std::filesystem::path& staging_dir,
                                  const RunOptions& options) {
  for (const auto& name : graph.required_params) {
    if (params.count(name) == 0)
      throw Error(Errc::point_space_mismatch,
                  "workflow '" + graph.name + "' requires parameter '" + name + "'");
  }

  std::filesystem::create_directories(staging_dir);
  std::filesystem::create_directories(staging_dir / "logs");
  const StepContext ctx{params, staging_dir};
  ctx.write_artifact("params.json", params_to_json(params).dump(2) + "\n");

  const auto order = topological_order(graph, Errc::cycle_introduced);
  for (const auto index : order) {
    const Step& step = graph.steps[index];
    if (options.observer) options.observer(step.id);
    const auto log_path = staging_dir / "logs" / (sanitize_filename(step.id) + ".log");
    if (step.fn) {
      try {
        step.fn(ctx);
      } catch (const Error&) {
        throw;
      } catch (const std::exception& e) {
        std::ofstream(log_path) << e.what() << "\n";
        throw Error(Errc::step_failed, "step '" + step.id + "': " + e.what());
      }
    } else {
      if (step.command.empty())
        throw Error(Errc::step_failed, "step '" + step.id + "' has no action");
      run_external(step, ctx, log_path);
    }
    for (const auto& out : step.outputs) {
      if (!std::filesystem::exists(ctx.artifact_path(out)))
        throw Error(Errc::step_failed,
                    "step '" + step.id + "' did not produce artifact '" + out + "'");
    }
  }

  std::map<std::string, double> metrics;
  for (const auto& [metric_name, artifact] : graph.metric_outputs) {
    const double value = ctx.read_scalar(artifact);
    if (!std::isfinite(value))
      throw Error(Errc::non_finite_value, "metric '" + metric_name + "' is not finite");
    metrics[metric_name] = value;
  }
  return metrics;
}

void WorkflowRegistry::register_workflow(const std::string& name, WorkflowGraph graph) {
  validate_graph(graph);
  graphs_.insert_or_assign(name, std::move(graph));
}

const WorkflowGraph& WorkflowRegistry::lookup(const std::string& name) const {
  const auto it = graphs_.find(name);
  if (it == graphs_.end())
    throw Error(Errc::unknown_workflow, "no workflow named '" + name + "'");
  return it->second;
}

bool WorkflowRegistry::has(const std::string& name) const { return graphs_.count(name) > 0; }

std::vector<std::string> WorkflowRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(graphs_.size());
  for (const auto& [name, _] : graphs_) out.push_back(name);
  return out;
}

}  // namespace parex
