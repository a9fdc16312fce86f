#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "parex/errors.hpp"
#include "parex/rng.hpp"

namespace parex {

// 2D Gaussian-puff dispersion on a rectangular domain.  Puffs are released
// from the source at a fixed rate, advected by a base wind plus a shared
// Ornstein-Uhlenbeck perturbation, and grow as sigma^2(t) = sigma0^2 +
// diffusion * t.  Puffs leaving the domain are dropped.
struct PlumeConfig {
  double domain_x = 100.0;
  double domain_y = 50.0;
  double source_x = 25.0;
  double source_y = 25.0;
  double release_rate = 10.0;  // puffs per unit time
  double puff_mass = 1.0;
  double sigma0 = 0.5;
  double diffusion = 0.1;  // d(sigma^2)/dt
  double wind_u = 1.0;
  double wind_v = 0.0;
  double wind_noise = 0.0;  // OU amplitude (stationary std)
  double wind_tau = 5.0;    // OU correlation time
  double dt = 0.1;
  double duration = 50.0;
  int sensor_count = 20;
  std::uint64_t wind_seed = 7;    // candidate runs reuse the truth's seed
  std::uint64_t sensor_seed = 11; // sensor layout has its own seed
};

struct SensorArray {
  std::vector<std::pair<double, double>> positions;
  std::vector<std::vector<double>> series;  // [sensor][step]

  bool operator==(const SensorArray&) const = default;
};

// Counters exposed for bookkeeping tests.
struct SimulationTrace {
  std::vector<int> released_per_step;
  std::vector<int> alive_per_step;
  std::vector<int> dropped_per_step;
};

void validate_config(const PlumeConfig& config);

SensorArray simulate(const PlumeConfig& config, SimulationTrace* trace = nullptr);

// Gaussian kernel: mass / (2 pi sigma^2) * exp(-r^2 / (2 sigma^2)).
double puff_concentration(double dx, double dy, double mass, double sigma_sq);

// Per-sensor RMSE over time, averaged over sensors.
double mean_rmse(const SensorArray& truth, const SensorArray& candidate);

}  // namespace parex
