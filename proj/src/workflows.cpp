#include "parex/workflows.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "parex/json_codec.hpp"

namespace parex {

WorkflowGraph sphere_workflow() {
  WorkflowGraph g;
  g.name = "sphere";
  Step evaluate;
  evaluate.id = "evaluate";
  evaluate.outputs = {"value"};
  evaluate.fn = [](const StepContext& ctx) {
    double sum = 0.0;
    for (const auto& [name, value] : ctx.params) {
      if (!std::holds_alternative<std::string>(value)) {
        const double v = numeric_value(value);
        sum += v * v;
      }
    }
    ctx.write_scalar("value", sum);
  };
  g.steps.push_back(std::move(evaluate));
  return g;
}

WorkflowGraph identity_metric() {
  WorkflowGraph g;
  g.name = "identity";
  Step pass;
  pass.id = "pass";
  pass.inputs = {"value"};
  pass.outputs = {"metric.identity"};
  pass.fn = [](const StepContext& ctx) {
    ctx.write_scalar("metric.identity", ctx.read_scalar("value"));
  };
  g.steps.push_back(std::move(pass));
  g.metric_outputs = {{"identity", "metric.identity"}};
  return g;
}

PlumeConfig plume_config_from_params(const ParamMap& params) {
  const StepContext ctx{params, {}};
  PlumeConfig c;
  c.domain_x = ctx.number_or("domain_x", c.domain_x);
  c.domain_y = ctx.number_or("domain_y", c.domain_y);
  c.release_rate = ctx.number_or("release_rate", c.release_rate);
  c.puff_mass = ctx.number_or("puff_mass", c.puff_mass);
  c.sigma0 = ctx.number_or("sigma0", c.sigma0);
  c.diffusion = ctx.number_or("diffusion", c.diffusion);
  c.wind_u = ctx.number_or("wind_u", c.wind_u);
  c.wind_v = ctx.number_or("wind_v", c.wind_v);
  c.wind_noise = ctx.number_or("wind_noise", c.wind_noise);
  c.wind_tau = ctx.number_or("wind_tau", c.wind_tau);
  c.dt = ctx.number_or("dt", c.dt);
  c.duration = ctx.number_or("duration", c.duration);
  c.sensor_count = static_cast<int>(ctx.integer_or("sensor_count", c.sensor_count));
  c.wind_seed = static_cast<std::uint64_t>(ctx.integer_or("wind_seed", 7));
  c.sensor_seed = static_cast<std::uint64_t>(ctx.integer_or("sensor_seed", 11));
  return c;
}

void write_sensor_positions_csv(const SensorArray& array, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "sensor,x,y\n";
  for (std::size_t s = 0; s < array.positions.size(); ++s) {
    out << s << ',' << format_double(array.positions[s].first) << ','
        << format_double(array.positions[s].second) << '\n';
  }
}

void write_sensor_series_csv(const SensorArray& array, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "sensor,step,value\n";
  for (std::size_t s = 0; s < array.series.size(); ++s) {
    for (std::size_t t = 0; t < array.series[s].size(); ++t)
      out << s << ',' << t << ',' << format_double(array.series[s][t]) << '\n';
  }
}

std::vector<std::vector<double>> read_sensor_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::step_failed, "cannot open series CSV " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> series;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string sensor, step, value;
    std::getline(row, sensor, ',');
    std::getline(row, step, ',');
    std::getline(row, value, ',');
    const auto s = static_cast<std::size_t>(std::stoull(sensor));
    if (series.size() <= s) series.resize(s + 1);
    series[s].push_back(std::stod(value));
  }
  return series;
}

WorkflowGraph pompy_workflow() {
  WorkflowGraph g;
  g.name = "pompy";
  g.required_params = {"source_x", "source_y"};

  Step reference;
  reference.id = "reference";
  reference.outputs = {"truth_series.csv", "sensor_positions.csv"};
  reference.fn = [](const StepContext& ctx) {
    PlumeConfig config = plume_config_from_params(ctx.params);
    config.source_x = ctx.number_or("truth_source_x", 70.0);
    config.source_y = ctx.number_or("truth_source_y", 30.0);
    const SensorArray truth = simulate(config);
    write_sensor_positions_csv(truth, ctx.artifact_path("sensor_positions.csv"));
    write_sensor_series_csv(truth, ctx.artifact_path("truth_series.csv"));
  };
  g.steps.push_back(std::move(reference));

  Step candidate;
  candidate.id = "simulate";
  candidate.outputs = {"candidate_series.csv"};
  candidate.fn = [](const StepContext& ctx) {
    // The wind field is treated as known: the candidate reuses the
    // reference wind seed, so only the source location drives the misfit.
    PlumeConfig config = plume_config_from_params(ctx.params);
    config.source_x = ctx.number("source_x");
    config.source_y = ctx.number("source_y");
    const SensorArray sim = simulate(config);
    write_sensor_series_csv(sim, ctx.artifact_path("candidate_series.csv"));
  };
  g.steps.push_back(std::move(candidate));
  return g;
}

WorkflowGraph rmse_metric() {
  WorkflowGraph g;
  g.name = "rmse";
  Step compare;
  compare.id = "compare";
  compare.inputs = {"truth_series.csv", "candidate_series.csv"};
  compare.outputs = {"metric.rmse"};
  compare.fn = [](const StepContext& ctx) {
    SensorArray truth;
    truth.series = read_sensor_series_csv(ctx.artifact_path("truth_series.csv"));
    truth.positions.resize(truth.series.size());
    SensorArray candidate;
    candidate.series = read_sensor_series_csv(ctx.artifact_path("candidate_series.csv"));
    candidate.positions.resize(candidate.series.size());
    ctx.write_scalar("metric.rmse", mean_rmse(truth, candidate));
  };
  g.steps.push_back(std::move(compare));
  g.metric_outputs = {{"rmse", "metric.rmse"}};
  return g;
}

double synthetic_cost(const ParamMap& params) {
  const StepContext ctx{params, {}};
  const auto x = [&](int i) {
    char name[8];
    std::snprintf(name, sizeof(name), "x%02d", i);
    return ctx.number(name);
  };
  // Additive surface: x01/x02 dominate, x03..x08 carry modest weight and
  // x09..x13 are near-zero.
  double y = 5.0 * std::sin(1.7 * x(1)) + 2.2 * std::cos(2.3 * x(2));
  y += 1.0 * x(3) + 0.9 * x(4) + 0.8 * x(5) + 0.7 * x(6) + 0.6 * x(7) + 0.5 * x(8);
  y += 0.02 * (x(9) + x(10) + x(11) + x(12) + x(13));
  return y;
}

WorkflowGraph synthetic_cost_workflow() {
  WorkflowGraph g;
  g.name = "synthetic-cost-13d";
  for (int i = 1; i <= kSyntheticCostDims; ++i) {
    char name[8];
    std::snprintf(name, sizeof(name), "x%02d", i);
    g.required_params.emplace_back(name);
  }
  Step evaluate;
  evaluate.id = "evaluate";
  evaluate.outputs = {"value"};
  evaluate.fn = [](const StepContext& ctx) {
    ctx.write_scalar("value", synthetic_cost(ctx.params));
  };
  g.steps.push_back(std::move(evaluate));
  return g;
}

WorkflowRegistry builtin_registry() {
  WorkflowRegistry registry;
  registry.register_workflow("sphere", sphere_workflow());
  registry.register_workflow("identity", identity_metric());
  registry.register_workflow("pompy", pompy_workflow());
  registry.register_workflow("rmse", rmse_metric());
  registry.register_workflow("synthetic-cost-13d", synthetic_cost_workflow());
  return registry;
}

}  // namespace parex
