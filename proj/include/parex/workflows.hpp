#pragma once

#include <filesystem>

#include "parex/executor.hpp"
#include "parex/paramspace.hpp"
#include "parex/plume.hpp"

namespace parex {

// Bundled workflow graphs.
//
//   sphere             model: sum of squares of the numeric parameters,
//                      written to artifact "value"
//   identity           metric: passes "value" through as metric "identity"
//   pompy              model: simulates the reference plume (truth source
//                      from fixed options) and the candidate plume
//                      (source_x/source_y from the sampled point), writing
//                      the sensor CSV bundle for both
//   rmse               metric: mean per-sensor RMSE between candidate and
//                      truth series
//   synthetic-cost-13d model: 13-parameter additive cost surface with two
//                      dominant and five near-zero parameters

WorkflowGraph sphere_workflow();
WorkflowGraph identity_metric();
WorkflowGraph pompy_workflow();
WorkflowGraph rmse_metric();
WorkflowGraph synthetic_cost_workflow();

// The cost surface behind "synthetic-cost-13d"; exposed for tests.
// Parameters are named x01..x13, each on [0,1].
double synthetic_cost(const ParamMap& params);
inline constexpr int kSyntheticCostDims = 13;

// Plume configuration assembled from workflow options (defaults from
// PlumeConfig, overridable per option name).
PlumeConfig plume_config_from_params(const ParamMap& params);

// Sensor CSV bundle: positions file ("sensor,x,y") and series file
// ("sensor,step,value").
void write_sensor_positions_csv(const SensorArray& array, const std::filesystem::path& path);
void write_sensor_series_csv(const SensorArray& array, const std::filesystem::path& path);
std::vector<std::vector<double>> read_sensor_series_csv(const std::filesystem::path& path);

}  // namespace parex
