#pragma once

#include <memory>
#include <string>
#include <vector>

#include "parex/paramspace.hpp"
#include "parex/trialstore.hpp"

namespace parex {

// Strategy mapping the shared trial history to the next parameter point.
// Samplers hold no state between calls: everything they learn from lives in
// the store, so agents on different machines see the same picture.
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual std::string_view name() const = 0;

  // history carries Complete trials only.  The suggestion is a pure function
  // of (space, history, directions, rng state).
  virtual ParamMap suggest(const SearchSpace& space, const std::vector<Trial>& history,
                           const std::vector<Direction>& directions, Rng& rng) = 0;
};

struct NsgaConfig {
  int population_size = 24;
  double crossover_prob = 0.9;
  double mutation_prob = -1.0;  // negative means 1/d
  double eta_crossover = 15.0;
  double eta_mutation = 20.0;
};

struct TpeConfig {
  double gamma = 0.25;  // quantile splitting good from bad
  int n_startup = 10;
  int n_candidates = 24;
  std::string kde_bandwidth_rule = "scott";
};

// Independent uniform draw per dimension (also the NSGA-II/TPE warm-up).
ParamMap random_suggest(const SearchSpace& space, Rng& rng);

// Deb's fast non-dominated sort.  Front 0 is the non-dominated set; front k
// is non-dominated once fronts < k are removed.  Indices within a front are
// ascending.
std::vector<std::vector<std::size_t>> nondominated_sort(
    const std::vector<std::vector<double>>& points, const std::vector<Direction>& directions);

// Diversity score for one front: boundary points per objective get +inf,
// interior points accumulate normalized neighbor gaps; a constant objective
// contributes nothing.
std::vector<double> crowding_distance(const std::vector<std::vector<double>>& front_points);

class RandomSampler : public Sampler {
 public:
  std::string_view name() const override { return "RandomSampler"; }
  ParamMap suggest(const SearchSpace& space, const std::vector<Trial>& history,
                   const std::vector<Direction>& directions, Rng& rng) override;
};

// Tree-structured Parzen estimator, single objective.  Splits the history at
// the gamma quantile, fits per-dimension kernel densities on the unit cube
// for the good and bad sets, draws candidates from the good density and
// returns the one with the best density ratio.
class TpeSampler : public Sampler {
 public:
  explicit TpeSampler(TpeConfig config = {});
  std::string_view name() const override { return "TPESampler"; }
  ParamMap suggest(const SearchSpace& space, const std::vector<Trial>& history,
                   const std::vector<Direction>& directions, Rng& rng) override;

  const TpeConfig& config() const { return config_; }

 private:
  TpeConfig config_;
};

// NSGA-II over a shared store.  Because several agents interleave trials,
// "generations" are consecutive population_size blocks of the global
// complete-trial sequence: parents come from the most recent block plus the
// elite half of the preceding block, selected by (front rank, crowding).
class NsgaSampler : public Sampler {
 public:
  explicit NsgaSampler(NsgaConfig config = {});
  std::string_view name() const override { return "NSGAIISampler"; }
  ParamMap suggest(const SearchSpace& space, const std::vector<Trial>& history,
                   const std::vector<Direction>& directions, Rng& rng) override;

  const NsgaConfig& config() const { return config_; }

 private:
  NsgaConfig config_;
};

// Accepts the payload identifiers "RandomSampler", "TPESampler" and
// "NSGAIISampler" (case-sensitive); anything else is UnknownSampler.
std::unique_ptr<Sampler> make_sampler(const std::string& identifier);
std::unique_ptr<Sampler> make_sampler(const std::string& identifier, const ojson& config);

}  // namespace parex
