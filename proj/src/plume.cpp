#include "parex/plume.hpp"

#include <cmath>

namespace parex {

void validate_config(const PlumeConfig& config) {
  if (config.source_x < 0.0 || config.source_x > config.domain_x ||
      config.source_y < 0.0 || config.source_y > config.domain_y)
    throw Error(Errc::out_of_domain_source, "source lies outside the simulation domain");
  if (config.dt <= 0.0) throw Error(Errc::out_of_domain_source, "dt must be positive");
  if (config.sigma0 <= 0.0)
    throw Error(Errc::out_of_domain_source, "sigma0 must be positive");
  if (config.wind_noise < 0.0)
    throw Error(Errc::out_of_domain_source, "wind noise amplitude must be >= 0");
  if (config.wind_tau <= 0.0)
    throw Error(Errc::out_of_domain_source, "wind correlation time must be positive");
}

double puff_concentration(double dx, double dy, double mass, double sigma_sq) {
  const double r_sq = dx * dx + dy * dy;
  return mass / (2.0 * M_PI * sigma_sq) * std::exp(-r_sq / (2.0 * sigma_sq));
}

namespace {

struct Puff {
  double x;
  double y;
  double age;
};

}  // namespace

SensorArray simulate(const PlumeConfig& config, SimulationTrace* trace) {
  validate_config(config);

  SensorArray out;
  Rng layout_rng(config.sensor_seed);
  out.positions.reserve(static_cast<std::size_t>(config.sensor_count));
  for (int s = 0; s < config.sensor_count; ++s) {
    out.positions.emplace_back(layout_rng.uniform(0.0, config.domain_x),
                               layout_rng.uniform(0.0, config.domain_y));
  }
  out.series.assign(out.positions.size(), {});

  const auto steps = static_cast<std::size_t>(std::llround(config.duration / config.dt));
  for (auto& series : out.series) series.reserve(steps);

  Rng wind_rng(config.wind_seed);
  double noise_u = 0.0;
  double noise_v = 0.0;
  const double ou_decay = config.dt / config.wind_tau;
  const double ou_kick = config.wind_noise * std::sqrt(2.0 * config.dt / config.wind_tau);

  std::vector<Puff> puffs;
  double release_accumulator = 0.0;

  for (std::size_t step = 0; step < steps; ++step) {
    int released = 0;
    release_accumulator += config.release_rate * config.dt;
    while (release_accumulator >= 1.0) {
      puffs.push_back(Puff{config.source_x, config.source_y, 0.0});
      release_accumulator -= 1.0;
      ++released;
    }

    // One shared wind perturbation per step; the normals are drawn even when
    // the amplitude is zero so the stream stays aligned across noise levels.
    const double zu = wind_rng.normal();
    const double zv = wind_rng.normal();
    noise_u += -noise_u * ou_decay + ou_kick * zu;
    noise_v += -noise_v * ou_decay + ou_kick * zv;
    const double wind_u = config.wind_u + noise_u;
    const double wind_v = config.wind_v + noise_v;

    int dropped = 0;
    std::size_t keep = 0;
    for (std::size_t p = 0; p < puffs.size(); ++p) {
      Puff puff = puffs[p];
      puff.x += wind_u * config.dt;
      puff.y += wind_v * config.dt;
      puff.age += config.dt;
      if (puff.x < 0.0 || puff.x > config.domain_x || puff.y < 0.0 ||
          puff.y > config.domain_y) {
        ++dropped;
        continue;
      }
      puffs[keep++] = puff;
    }
    puffs.resize(keep);

    for (std::size_t s = 0; s < out.positions.size(); ++s) {
      double concentration = 0.0;
      for (const auto& puff : puffs) {
        const double sigma_sq = config.sigma0 * config.sigma0 + config.diffusion * puff.age;
        concentration += puff_concentration(out.positions[s].first - puff.x,
                                            out.positions[s].second - puff.y,
                                            config.puff_mass, sigma_sq);
      }
      out.series[s].push_back(concentration);
    }

    if (trace != nullptr) {
      trace->released_per_step.push_back(released);
      trace->alive_per_step.push_back(static_cast<int>(puffs.size()));
      trace->dropped_per_step.push_back(dropped);
    }
  }
  return out;
}

double mean_rmse(const SensorArray& truth, const SensorArray& candidate) {
  if (truth.series.size() != candidate.series.size())
    throw Error(Errc::shape_mismatch, "sensor counts differ");
  if (truth.series.empty())
    throw Error(Errc::shape_mismatch, "sensor arrays are empty");
  double total = 0.0;
  for (std::size_t s = 0; s < truth.series.size(); ++s) {
    if (truth.series[s].size() != candidate.series[s].size())
      throw Error(Errc::shape_mismatch, "series lengths differ");
    double sq = 0.0;
    for (std::size_t t = 0; t < truth.series[s].size(); ++t) {
      const double d = truth.series[s][t] - candidate.series[s][t];
      sq += d * d;
    }
    total += std::sqrt(sq / static_cast<double>(truth.series[s].size()));
  }
  return total / static_cast<double>(truth.series.size());
}

}  // namespace parex
