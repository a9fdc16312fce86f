#include "parex/fanova.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace parex {

double RegressionTree::predict(std::span<const double> x) const {
  int node = 0;
  while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(node)];
    node = x[static_cast<std::size_t>(n.dim)] < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

namespace {

struct TreeBuilder {
  const std::vector<std::vector<double>>& X;
  const std::vector<double>& y;
  const ForestConfig& config;
  Rng& rng;
  std::vector<TreeNode> nodes;

  int build(std::vector<std::size_t> rows, int depth) {
    double sum = 0.0;
    for (const auto r : rows) sum += y[r];
    const double mean = sum / static_cast<double>(rows.size());

    bool constant = true;
    for (const auto r : rows) {
      if (y[r] != y[rows.front()]) {
        constant = false;
        break;
      }
    }

    const auto leaf = [&]() {
      nodes.push_back(TreeNode{-1, 0.0, -1, -1, mean});
      return static_cast<int>(nodes.size()) - 1;
    };

    if (constant || depth >= config.max_depth ||
        rows.size() < 2 * static_cast<std::size_t>(config.min_samples_leaf) ||
        rows.size() < 2) {
      return leaf();
    }

    const std::size_t d = X.front().size();
    const auto n_features = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::ceil(config.feature_subsample * static_cast<double>(d))));
    std::vector<std::size_t> dims(d);
    std::iota(dims.begin(), dims.end(), 0);
    for (std::size_t i = 0; i < n_features; ++i) {
      const std::size_t j = i + rng.index(d - i);
      std::swap(dims[i], dims[j]);
    }
    dims.resize(n_features);
    std::sort(dims.begin(), dims.end());

    int best_dim = -1;
    double best_threshold = 0.0;
    double best_score = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(rows.size());
    for (const std::size_t dim : dims) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return X[rows[a]][dim] < X[rows[b]][dim];
      });

      // Prefix sums over y sorted by this dimension; split score is the
      // summed left+right SSE, computed from the moments.
      double left_sum = 0.0;
      double left_sq = 0.0;
      double total_sum = 0.0;
      double total_sq = 0.0;
      for (const auto i : order) {
        total_sum += y[rows[i]];
        total_sq += y[rows[i]] * y[rows[i]];
      }
      const auto min_leaf = static_cast<std::size_t>(config.min_samples_leaf);
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const double yi = y[rows[order[i]]];
        left_sum += yi;
        left_sq += yi * yi;
        const double xa = X[rows[order[i]]][dim];
        const double xb = X[rows[order[i + 1]]][dim];
        if (xa == xb) continue;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = order.size() - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double right_sum = total_sum - left_sum;
        const double right_sq = total_sq - left_sq;
        const double sse_left = left_sq - left_sum * left_sum / static_cast<double>(n_left);
        const double sse_right =
            right_sq - right_sum * right_sum / static_cast<double>(n_right);
        const double score = sse_left + sse_right;
        if (score < best_score) {
          best_score = score;
          best_dim = static_cast<int>(dim);
          best_threshold = 0.5 * (xa + xb);
        }
      }
    }

    if (best_dim < 0) return leaf();

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (const auto r : rows) {
      (X[r][static_cast<std::size_t>(best_dim)] < best_threshold ? left_rows : right_rows)
          .push_back(r);
    }
    if (left_rows.empty() || right_rows.empty()) return leaf();

    const int index = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{best_dim, best_threshold, -1, -1, 0.0});
    const int left = build(std::move(left_rows), depth + 1);
    const int right = build(std::move(right_rows), depth + 1);
    nodes[static_cast<std::size_t>(index)].left = left;
    nodes[static_cast<std::size_t>(index)].right = right;
    return index;
  }
};

struct LeafCell {
  double value = 0.0;
  double volume = 1.0;
  std::vector<double> lo;
  std::vector<double> hi;
};

void collect_leaves(const RegressionTree& tree, int node, std::vector<double>& lo,
                    std::vector<double>& hi, std::vector<LeafCell>& out) {
  const auto& n = tree.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) {
    LeafCell cell;
    cell.value = n.value;
    cell.lo = lo;
    cell.hi = hi;
    cell.volume = 1.0;
    for (std::size_t d = 0; d < lo.size(); ++d) cell.volume *= hi[d] - lo[d];
    out.push_back(std::move(cell));
    return;
  }
  const auto dim = static_cast<std::size_t>(n.dim);
  const double saved_hi = hi[dim];
  hi[dim] = n.threshold;
  collect_leaves(tree, n.left, lo, hi, out);
  hi[dim] = saved_hi;
  const double saved_lo = lo[dim];
  lo[dim] = n.threshold;
  collect_leaves(tree, n.right, lo, hi, out);
  lo[dim] = saved_lo;
}

std::vector<LeafCell> leaves_of(const RegressionTree& tree) {
  std::vector<double> lo(tree.dimension, 0.0);
  std::vector<double> hi(tree.dimension, 1.0);
  std::vector<LeafCell> out;
  collect_leaves(tree, 0, lo, hi, out);
  return out;
}

}  // namespace

Forest fit_forest(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                  const ForestConfig& config, Rng& rng) {
  if (X.size() != y.size() || X.size() < 2)
    throw Error(Errc::insufficient_data, "forest fitting needs at least 2 rows");
  for (const double v : y) {
    if (!std::isfinite(v))
      throw Error(Errc::non_finite_value, "forest targets must be finite");
  }
  if (config.n_trees < 1)
    throw Error(Errc::insufficient_data, "forest needs at least one tree");

  Forest forest;
  forest.config = config;
  forest.dimension = X.front().size();
  forest.trees.reserve(static_cast<std::size_t>(config.n_trees));
  const std::size_t n = X.size();
  for (int t = 0; t < config.n_trees; ++t) {
    std::vector<std::size_t> rows(n);
    if (config.bootstrap) {
      for (auto& r : rows) r = rng.index(n);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    TreeBuilder builder{X, y, config, rng, {}};
    builder.build(std::move(rows), 0);
    RegressionTree tree;
    tree.nodes = std::move(builder.nodes);
    tree.dimension = forest.dimension;
    // build() appends children after their parent, but the parent entry is
    // created first, so the root is always node 0.
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

double tree_mean(const RegressionTree& tree) {
  double mean = 0.0;
  for (const auto& leaf : leaves_of(tree)) mean += leaf.volume * leaf.value;
  return mean;
}

double tree_total_variance(const RegressionTree& tree) {
  double mean = 0.0;
  double second = 0.0;
  for (const auto& leaf : leaves_of(tree)) {
    mean += leaf.volume * leaf.value;
    second += leaf.volume * leaf.value * leaf.value;
  }
  return std::max(0.0, second - mean * mean);
}

double tree_marginal_variance(const RegressionTree& tree, std::size_t dim) {
  const auto leaves = leaves_of(tree);

  // Breakpoints of the dim partition: every split threshold on this dim.
  std::vector<double> breaks{0.0, 1.0};
  for (const auto& n : tree.nodes) {
    if (!n.is_leaf() && static_cast<std::size_t>(n.dim) == dim)
      breaks.push_back(n.threshold);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  // Sweep the segments, maintaining the sum of value * volume-perpendicular
  // for the leaves whose dim-interval covers the segment.  Interval bounds
  // and breakpoints share the same exact double values, so the event
  // comparisons are exact.
  struct Event {
    double coord;
    double weight;  // +w at interval start, -w at interval end
  };
  std::vector<Event> events;
  events.reserve(leaves.size() * 2);
  for (const auto& leaf : leaves) {
    const double width = leaf.hi[dim] - leaf.lo[dim];
    if (width <= 0.0) continue;
    const double w = leaf.value * (leaf.volume / width);
    events.push_back({leaf.lo[dim], w});
    events.push_back({leaf.hi[dim], -w});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.coord != b.coord) return a.coord < b.coord;
    return a.weight < b.weight;  // removals first
  });

  double active = 0.0;
  std::size_t e = 0;
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    while (e < events.size() && events[e].coord <= breaks[s]) {
      active += events[e].weight;
      ++e;
    }
    const double len = breaks[s + 1] - breaks[s];
    mean += len * active;
    second += len * active * active;
  }
  return std::max(0.0, second - mean * mean);
}

FanovaConfig fanova_config_from_json(const ojson& j) {
  FanovaConfig c;
  if (j.contains("n_trees")) c.forest.n_trees = j.at("n_trees").get<int>();
  if (j.contains("max_depth")) c.forest.max_depth = j.at("max_depth").get<int>();
  if (j.contains("min_samples_leaf"))
    c.forest.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  if (j.contains("feature_subsample"))
    c.forest.feature_subsample = j.at("feature_subsample").get<double>();
  if (j.contains("bootstrap")) c.forest.bootstrap = j.at("bootstrap").get<bool>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

ImportanceReport importances(const std::vector<Trial>& trials, const SearchSpace& space,
                             int objective_index, const FanovaConfig& config) {
  std::vector<const Trial*> usable;
  for (const auto& t : trials) {
    if (t.state == TrialState::Complete) usable.push_back(&t);
  }
  if (usable.size() < 2)
    throw Error(Errc::insufficient_data, "importance computation needs >= 2 completed trials");
  // Canonical order by id keeps the report invariant under trial
  // permutation; the forest seed is keyed to the trial count, not the order.
  std::sort(usable.begin(), usable.end(),
            [](const Trial* a, const Trial* b) { return a->id < b->id; });

  std::vector<std::vector<double>> X;
  std::vector<double> y;
  X.reserve(usable.size());
  y.reserve(usable.size());
  for (const auto* t : usable) {
    if (objective_index < 0 || static_cast<std::size_t>(objective_index) >= t->values.size())
      throw Error(Errc::dimension_mismatch, "objective index out of range");
    X.push_back(space.to_unit_cube(t->params));
    y.push_back(t->values[static_cast<std::size_t>(objective_index)]);
  }

  ImportanceReport report;
  report.trial_count = static_cast<std::int64_t>(usable.size());
  report.objective_index = objective_index;

  const bool degenerate =
      std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); });
  std::vector<double> mean_fraction(space.dimension(), 0.0);
  if (degenerate) {
    report.degenerate = true;
  } else {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(usable.size())));
    const Forest forest = fit_forest(X, y, config.forest, rng);
    for (const auto& tree : forest.trees) {
      const double total = tree_total_variance(tree);
      if (total <= 0.0) continue;
      for (std::size_t d = 0; d < space.dimension(); ++d)
        mean_fraction[d] += tree_marginal_variance(tree, d) / total;
    }
    for (auto& f : mean_fraction) f /= static_cast<double>(forest.trees.size());
  }

  report.entries.reserve(space.dimension());
  for (std::size_t d = 0; d < space.dimension(); ++d)
    report.entries.emplace_back(space.specs()[d].name, mean_fraction[d]);
  std::sort(report.entries.begin(), report.entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return report;
}

}  // namespace parex
