#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "parex/paramspace.hpp"

namespace parex {

// Execution context handed to builtin steps.  Artifacts are plain files in
// the trial's staging directory, which doubles as the audit trail.
struct StepContext {
  const ParamMap& params;
  std::filesystem::path staging;

  std::filesystem::path artifact_path(const std::string& name) const;
  void write_artifact(const std::string& name, const std::string& content) const;
  std::string read_artifact(const std::string& name) const;
  void write_scalar(const std::string& name, double value) const;
  double read_scalar(const std::string& name) const;

  bool has_param(const std::string& name) const { return params.count(name) > 0; }
  double number(const std::string& name) const;
  double number_or(const std::string& name, double fallback) const;
  std::int64_t integer_or(const std::string& name, std::int64_t fallback) const;
  std::string text_or(const std::string& name, const std::string& fallback) const;
};

struct Step {
  std::string id;
  std::vector<std::string> inputs;   // artifact names consumed
  std::vector<std::string> outputs;  // artifact names produced
  std::function<void(const StepContext&)> fn;  // builtin when set
  std::vector<std::string> command;            // external argv otherwise
  double timeout_s = 0.0;                      // 0 disables the wall-clock cap
};

// Directed acyclic graph of steps exchanging named artifacts.  Each input
// artifact is produced by exactly one upstream step or arrives from outside
// (a reference input staged before the run).
struct WorkflowGraph {
  std::string name;
  std::vector<Step> steps;
  std::vector<std::string> required_params;
  std::vector<std::string> reference_inputs;
  // (metric name, artifact holding its scalar); a metric workflow carries
  // exactly one entry.
  std::vector<std::pair<std::string, std::string>> metric_outputs;

  std::vector<std::string> produced_artifacts() const;
  std::vector<std::string> free_inputs() const;
};

// Structural validation: unique producers, no cycles, inputs bound.
void validate_graph(const WorkflowGraph& graph);

// Appends the metric graph to the model graph: metric steps consume model
// outputs (plus declared reference data); the combined graph is named
// "<model>+<metric>".  Metric step ids are prefixed with the metric name.
WorkflowGraph compose(const WorkflowGraph& model, const WorkflowGraph& metric);

struct RunOptions {
  // Called with each step id as it starts, in execution order.
  std::function<void(const std::string&)> observer;
};

// Executes the graph in topological order inside staging_dir and returns the
// terminal scalar per metric.  Step stdout/stderr land in staging/logs/.
std::map<std::string, double> run(const WorkflowGraph& graph, const ParamMap& params,
                                  const std::filesystem::path& staging_dir,
                                  const RunOptions& options = {});

class WorkflowRegistry {
 public:
  void register_workflow(const std::string& name, WorkflowGraph graph);
  const WorkflowGraph& lookup(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, WorkflowGraph> graphs_;
};

// Registry with the bundled workflows preregistered: "sphere", "identity",
// "pompy", "rmse" and "synthetic-cost-13d".
WorkflowRegistry builtin_registry();

}  // namespace parex
