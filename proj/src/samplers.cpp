#include "parex/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace parex {

ParamMap random_suggest(const SearchSpace& space, Rng& rng) {
  ParamMap point;
  for (const auto& spec : space.specs()) point.emplace(spec.name, sample(spec, rng));
  return point;
}

namespace {

// a dominates b on sign-normalized (minimization) vectors.
bool dominates_min(const std::vector<double>& a, const std::vector<double>& b) {
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strict = true;
  }
  return strict;
}

std::vector<std::vector<double>> normalize_directions(
    const std::vector<std::vector<double>>& points, const std::vector<Direction>& directions) {
  std::vector<std::vector<double>> out = points;
  for (auto& p : out) {
    if (p.size() != directions.size())
      throw Error(Errc::dimension_mismatch,
                  "objective vector length disagrees with directions");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (directions[i] == Direction::Maximize) p[i] = -p[i];
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> nondominated_sort(
    const std::vector<std::vector<double>>& points, const std::vector<Direction>& directions) {
  const auto pts = normalize_directions(points, directions);
  const std::size_t n = pts.size();
  std::vector<std::vector<std::size_t>> dominated_by(n);
  std::vector<std::size_t> domination_count(n, 0);

  std::vector<std::vector<std::size_t>> fronts(1);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates_min(pts[p], pts[q])) {
        dominated_by[p].push_back(q);
      } else if (dominates_min(pts[q], pts[p])) {
        ++domination_count[p];
      }
    }
    if (domination_count[p] == 0) fronts[0].push_back(p);
  }

  std::size_t k = 0;
  while (!fronts[k].empty()) {
    std::vector<std::size_t> next;
    for (const std::size_t p : fronts[k]) {
      for (const std::size_t q : dominated_by[p]) {
        if (--domination_count[q] == 0) next.push_back(q);
      }
    }
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(next));
    ++k;
  }
  fronts.pop_back();
  return fronts;
}

std::vector<double> crowding_distance(const std::vector<std::vector<double>>& front_points) {
  const std::size_t n = front_points.size();
  std::vector<double> dist(n, 0.0);
  if (n == 0) return dist;
  const std::size_t m = front_points.front().size();
  constexpr double inf = std::numeric_limits<double>::infinity();

  for (std::size_t obj = 0; obj < m; ++obj) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return front_points[a][obj] < front_points[b][obj];
    });
    const double span =
        front_points[order.back()][obj] - front_points[order.front()][obj];
    dist[order.front()] = inf;
    dist[order.back()] = inf;
    if (span <= 0.0) continue;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (std::isinf(dist[order[i]])) continue;
      dist[order[i]] +=
          (front_points[order[i + 1]][obj] - front_points[order[i - 1]][obj]) / span;
    }
  }
  return dist;
}

ParamMap RandomSampler::suggest(const SearchSpace& space, const std::vector<Trial>&,
                                const std::vector<Direction>&, Rng& rng) {
  return random_suggest(space, rng);
}

TpeSampler::TpeSampler(TpeConfig config) : config_(std::move(config)) {
  if (!(config_.gamma > 0.0 && config_.gamma < 1.0))
    throw Error(Errc::unknown_sampler, "TPE gamma must be in (0,1)");
  if (config_.n_startup < 1)
    throw Error(Errc::unknown_sampler, "TPE n_startup must be >= 1");
  if (config_.kde_bandwidth_rule != "scott")
    throw Error(Errc::unknown_sampler,
                "unknown bandwidth rule '" + config_.kde_bandwidth_rule + "'");
}

namespace {

struct DimDensity {
  // Gaussian KDE on [0,1] mixed with a uniform floor; categorical dims use
  // Laplace-smoothed category frequencies instead.
  bool categorical = false;
  std::vector<double> centers;
  double bandwidth = 0.1;
  double prior_weight = 0.1;
  std::vector<double> category_probs;

  double density(double u, std::size_t category_index) const {
    if (categorical) return category_probs[category_index];
    if (centers.empty()) return 1.0;
    double kde = 0.0;
    const double inv = 1.0 / (bandwidth * 2.5066282746310002);  // sqrt(2*pi)
    for (const double c : centers) {
      const double z = (u - c) / bandwidth;
      kde += inv * std::exp(-0.5 * z * z);
    }
    kde /= static_cast<double>(centers.size());
    return (1.0 - prior_weight) * kde + prior_weight;
  }
};

DimDensity fit_dim_density(const ParamSpec& spec, const std::vector<double>& coords,
                           std::size_t category_count) {
  DimDensity d;
  d.prior_weight = 1.0 / (1.0 + static_cast<double>(coords.size()));
  if (std::holds_alternative<CategoricalSet>(spec.kind)) {
    d.categorical = true;
    const auto k = category_count;
    std::vector<double> counts(k, 0.0);
    for (const double u : coords) {
      const auto idx = std::get<std::string>(decode_unit(spec, u));
      const auto& choices = std::get<CategoricalSet>(spec.kind).choices;
      const auto it = std::find(choices.begin(), choices.end(), idx);
      counts[static_cast<std::size_t>(it - choices.begin())] += 1.0;
    }
    d.category_probs.resize(k);
    const double denom = static_cast<double>(coords.size()) + static_cast<double>(k);
    for (std::size_t i = 0; i < k; ++i) d.category_probs[i] = (counts[i] + 1.0) / denom;
    return d;
  }
  d.centers = coords;
  const auto m = static_cast<double>(coords.size());
  if (!coords.empty()) {
    const double mean = std::accumulate(coords.begin(), coords.end(), 0.0) / m;
    double var = 0.0;
    for (const double c : coords) var += (c - mean) * (c - mean);
    var /= m;
    const double sigma = std::max(std::sqrt(var), 1e-3);
    // Scott-style rate on the unit interval.
    d.bandwidth = std::clamp(1.06 * sigma * std::pow(m, -0.2), 1e-3, 1.0);
  }
  return d;
}

std::size_t category_index_of(const ParamSpec& spec, double u) {
  const auto& choices = std::get<CategoricalSet>(spec.kind).choices;
  const auto value = std::get<std::string>(decode_unit(spec, u));
  const auto it = std::find(choices.begin(), choices.end(), value);
  return static_cast<std::size_t>(it - choices.begin());
}

}  // namespace

ParamMap TpeSampler::suggest(const SearchSpace& space, const std::vector<Trial>& history,
                             const std::vector<Direction>& directions, Rng& rng) {
  if (directions.size() != 1)
    throw Error(Errc::multi_objective_unsupported,
                "TPESampler supports single-objective studies only");
  std::vector<const Trial*> complete;
  for (const auto& t : history) {
    if (t.state == TrialState::Complete) complete.push_back(&t);
  }
  const std::size_t n = complete.size();
  if (n < static_cast<std::size_t>(config_.n_startup)) return random_suggest(space, rng);

  const double sign = directions[0] == Direction::Minimize ? 1.0 : -1.0;
  std::sort(complete.begin(), complete.end(), [&](const Trial* a, const Trial* b) {
    const double va = sign * a->values[0];
    const double vb = sign * b->values[0];
    if (va != vb) return va < vb;
    return a->id < b->id;
  });
  const auto n_good = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(config_.gamma * static_cast<double>(n))));

  const auto& specs = space.specs();
  const std::size_t d = specs.size();
  std::vector<std::vector<double>> good_coords(d), bad_coords(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = space.to_unit_cube(complete[i]->params);
    for (std::size_t dim = 0; dim < d; ++dim)
      (i < n_good ? good_coords[dim] : bad_coords[dim]).push_back(u[dim]);
  }

  std::vector<DimDensity> good(d), bad(d);
  for (std::size_t dim = 0; dim < d; ++dim) {
    const std::size_t k = std::holds_alternative<CategoricalSet>(specs[dim].kind)
                              ? std::get<CategoricalSet>(specs[dim].kind).choices.size()
                              : 0;
    good[dim] = fit_dim_density(specs[dim], good_coords[dim], k);
    bad[dim] = fit_dim_density(specs[dim], bad_coords[dim], k);
  }

  std::vector<double> best_u;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < config_.n_candidates; ++c) {
    std::vector<double> u(d);
    for (std::size_t dim = 0; dim < d; ++dim) {
      if (good[dim].categorical) {
        // Sample a category from the smoothed good distribution.
        double r = rng.uniform();
        std::size_t idx = 0;
        for (; idx + 1 < good[dim].category_probs.size(); ++idx) {
          r -= good[dim].category_probs[idx];
          if (r <= 0.0) break;
        }
        u[dim] = encode_unit(specs[dim],
                             std::get<CategoricalSet>(specs[dim].kind).choices[idx]);
      } else if (rng.uniform() < good[dim].prior_weight || good[dim].centers.empty()) {
        u[dim] = rng.uniform();
      } else {
        const double center = good[dim].centers[rng.index(good[dim].centers.size())];
        u[dim] = std::clamp(center + good[dim].bandwidth * rng.normal(), 0.0, 1.0);
      }
    }
    double score = 0.0;
    for (std::size_t dim = 0; dim < d; ++dim) {
      const std::size_t cat =
          good[dim].categorical ? category_index_of(specs[dim], u[dim]) : 0;
      score += std::log(good[dim].density(u[dim], cat)) -
               std::log(bad[dim].density(u[dim], cat));
    }
    if (score > best_score) {
      best_score = score;
      best_u = std::move(u);
    }
  }
  return space.from_unit_cube(best_u);
}

NsgaSampler::NsgaSampler(NsgaConfig config) : config_(std::move(config)) {
  if (config_.population_size < 2)
    throw Error(Errc::unknown_sampler, "NSGA-II population_size must be >= 2");
  if (config_.crossover_prob < 0.0 || config_.crossover_prob > 1.0)
    throw Error(Errc::unknown_sampler, "NSGA-II crossover_prob must be in [0,1]");
  if (config_.mutation_prob > 1.0)
    throw Error(Errc::unknown_sampler, "NSGA-II mutation_prob must be in [0,1]");
}

namespace {

struct RankedPool {
  std::vector<const Trial*> trials;
  std::vector<std::size_t> rank;
  std::vector<double> crowding;
};

RankedPool rank_pool(std::vector<const Trial*> trials,
                     const std::vector<Direction>& directions) {
  RankedPool pool;
  pool.trials = std::move(trials);
  std::vector<std::vector<double>> objectives;
  objectives.reserve(pool.trials.size());
  for (const auto* t : pool.trials) objectives.push_back(t->values);
  const auto fronts = nondominated_sort(objectives, directions);
  pool.rank.assign(pool.trials.size(), 0);
  pool.crowding.assign(pool.trials.size(), 0.0);
  for (std::size_t k = 0; k < fronts.size(); ++k) {
    std::vector<std::vector<double>> front_objs;
    front_objs.reserve(fronts[k].size());
    for (const auto idx : fronts[k]) front_objs.push_back(objectives[idx]);
    const auto dist = crowding_distance(front_objs);
    for (std::size_t i = 0; i < fronts[k].size(); ++i) {
      pool.rank[fronts[k][i]] = k;
      pool.crowding[fronts[k][i]] = dist[i];
    }
  }
  return pool;
}

// (rank asc, crowding desc, id asc): the deterministic survival order.
bool survival_less(const RankedPool& pool, std::size_t a, std::size_t b) {
  if (pool.rank[a] != pool.rank[b]) return pool.rank[a] < pool.rank[b];
  if (pool.crowding[a] != pool.crowding[b]) return pool.crowding[a] > pool.crowding[b];
  return pool.trials[a]->id < pool.trials[b]->id;
}

std::vector<const Trial*> select_elites(const std::vector<const Trial*>& window,
                                        const std::vector<Direction>& directions,
                                        std::size_t count) {
  if (window.empty() || count == 0) return {};
  RankedPool pool = rank_pool(window, directions);
  std::vector<std::size_t> order(pool.trials.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return survival_less(pool, a, b); });
  std::vector<const Trial*> out;
  for (std::size_t i = 0; i < std::min(count, order.size()); ++i)
    out.push_back(pool.trials[order[i]]);
  return out;
}

double sbx_child(double a, double b, double eta, Rng& rng) {
  const double u = rng.uniform();
  double beta;
  if (u <= 0.5) {
    beta = std::pow(2.0 * u, 1.0 / (eta + 1.0));
  } else {
    beta = std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0));
  }
  const double c1 = 0.5 * ((1.0 + beta) * a + (1.0 - beta) * b);
  const double c2 = 0.5 * ((1.0 - beta) * a + (1.0 + beta) * b);
  return rng.uniform() < 0.5 ? c1 : c2;
}

double polynomial_mutate(double x, double eta, Rng& rng) {
  const double u = rng.uniform();
  double delta;
  if (u < 0.5) {
    delta = std::pow(2.0 * u, 1.0 / (eta + 1.0)) - 1.0;
  } else {
    delta = 1.0 - std::pow(2.0 * (1.0 - u), 1.0 / (eta + 1.0));
  }
  return x + delta;
}

}  // namespace

ParamMap NsgaSampler::suggest(const SearchSpace& space, const std::vector<Trial>& history,
                              const std::vector<Direction>& directions, Rng& rng) {
  std::vector<const Trial*> complete;
  for (const auto& t : history) {
    if (t.state == TrialState::Complete) complete.push_back(&t);
  }
  std::sort(complete.begin(), complete.end(),
            [](const Trial* a, const Trial* b) { return a->id < b->id; });

  const auto pop = static_cast<std::size_t>(config_.population_size);
  if (complete.size() < pop) return random_suggest(space, rng);

  // Generation window: last block of population_size completes, plus the
  // elite half of the block before it.
  std::vector<const Trial*> window(complete.end() - static_cast<std::ptrdiff_t>(pop),
                                   complete.end());
  const std::size_t preceding_len = std::min(complete.size() - pop, pop);
  if (preceding_len > 0) {
    std::vector<const Trial*> preceding(
        complete.end() - static_cast<std::ptrdiff_t>(pop + preceding_len),
        complete.end() - static_cast<std::ptrdiff_t>(pop));
    const auto elites = select_elites(preceding, directions, std::max<std::size_t>(1, pop / 2));
    window.insert(window.end(), elites.begin(), elites.end());
  }

  RankedPool pool = rank_pool(window, directions);

  const auto tournament = [&]() -> const Trial* {
    const std::size_t a = rng.index(pool.trials.size());
    std::size_t b = rng.index(pool.trials.size());
    if (pool.trials.size() > 1) {
      while (b == a) b = rng.index(pool.trials.size());
    }
    return pool.trials[survival_less(pool, a, b) ? a : b];
  };
  const Trial* parent_a = tournament();
  const Trial* parent_b = tournament();

  const auto& specs = space.specs();
  const std::size_t d = specs.size();
  auto child = space.to_unit_cube(parent_a->params);
  const auto other = space.to_unit_cube(parent_b->params);

  if (rng.uniform() < config_.crossover_prob) {
    for (std::size_t dim = 0; dim < d; ++dim) {
      if (std::holds_alternative<CategoricalSet>(specs[dim].kind)) {
        if (rng.uniform() < 0.5) child[dim] = other[dim];
      } else {
        child[dim] = sbx_child(child[dim], other[dim], config_.eta_crossover, rng);
      }
    }
  }

  const double mutation_prob =
      config_.mutation_prob >= 0.0 ? config_.mutation_prob
                                   : 1.0 / static_cast<double>(std::max<std::size_t>(1, d));
  for (std::size_t dim = 0; dim < d; ++dim) {
    if (rng.uniform() >= mutation_prob) continue;
    if (const auto* cat = std::get_if<CategoricalSet>(&specs[dim].kind)) {
      const auto idx = rng.index(cat->choices.size());
      child[dim] = encode_unit(specs[dim], cat->choices[idx]);
    } else {
      child[dim] = polynomial_mutate(child[dim], config_.eta_mutation, rng);
    }
  }

  for (auto& u : child) u = std::clamp(u, 0.0, 1.0);
  return space.from_unit_cube(child);
}

namespace {

NsgaConfig nsga_config_from_json(const ojson& j) {
  NsgaConfig c;
  if (j.contains("population_size")) c.population_size = j.at("population_size").get<int>();
  if (j.contains("crossover_prob")) c.crossover_prob = j.at("crossover_prob").get<double>();
  if (j.contains("mutation_prob")) c.mutation_prob = j.at("mutation_prob").get<double>();
  if (j.contains("eta_crossover")) c.eta_crossover = j.at("eta_crossover").get<double>();
  if (j.contains("eta_mutation")) c.eta_mutation = j.at("eta_mutation").get<double>();
  return c;
}

TpeConfig tpe_config_from_json(const ojson& j) {
  TpeConfig c;
  if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
  if (j.contains("n_startup")) c.n_startup = j.at("n_startup").get<int>();
  if (j.contains("n_candidates")) c.n_candidates = j.at("n_candidates").get<int>();
  if (j.contains("kde_bandwidth_rule"))
    c.kde_bandwidth_rule = j.at("kde_bandwidth_rule").get<std::string>();
  return c;
}

}  // namespace

std::unique_ptr<Sampler> make_sampler(const std::string& identifier) {
  return make_sampler(identifier, ojson::object());
}

std::unique_ptr<Sampler> make_sampler(const std::string& identifier, const ojson& config) {
  if (identifier == "RandomSampler") return std::make_unique<RandomSampler>();
  if (identifier == "TPESampler")
    return std::make_unique<TpeSampler>(tpe_config_from_json(config));
  if (identifier == "NSGAIISampler")
    return std::make_unique<NsgaSampler>(nsga_config_from_json(config));
  throw Error(Errc::unknown_sampler, "unknown sampler '" + identifier + "'");
}

}  // namespace parex
