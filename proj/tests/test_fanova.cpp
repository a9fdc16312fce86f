#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "parex/fanova.hpp"

using namespace parex;

namespace {

RegressionTree single_split_tree(int dim, double threshold, double left_value,
                                 double right_value) {
  RegressionTree tree;
  tree.dimension = 2;
  tree.nodes.push_back(TreeNode{dim, threshold, 1, 2, 0.0});
  tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, left_value});
  tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, right_value});
  return tree;
}

RegressionTree constant_tree(double value) {
  RegressionTree tree;
  tree.dimension = 2;
  tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, value});
  return tree;
}

// Random valid partition tree: every split threshold stays inside the cell
// it splits, so the structure mirrors what fitting produces.
int grow_random(RegressionTree& tree, std::vector<double>& lo, std::vector<double>& hi,
                int depth, Rng& rng) {
  const bool leaf = depth >= 4 || rng.uniform() < 0.35;
  if (leaf) {
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, rng.normal()});
    return static_cast<int>(tree.nodes.size()) - 1;
  }
  const auto dim = rng.index(lo.size());
  const double threshold = lo[dim] + (0.2 + 0.6 * rng.uniform()) * (hi[dim] - lo[dim]);
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(TreeNode{static_cast<int>(dim), threshold, -1, -1, 0.0});

  const double saved_hi = hi[dim];
  hi[dim] = threshold;
  const int left = grow_random(tree, lo, hi, depth + 1, rng);
  hi[dim] = saved_hi;
  const double saved_lo = lo[dim];
  lo[dim] = threshold;
  const int right = grow_random(tree, lo, hi, depth + 1, rng);
  lo[dim] = saved_lo;

  tree.nodes[static_cast<std::size_t>(index)].left = left;
  tree.nodes[static_cast<std::size_t>(index)].right = right;
  return index;
}

RegressionTree random_tree(std::size_t dims, Rng& rng) {
  RegressionTree tree;
  tree.dimension = dims;
  std::vector<double> lo(dims, 0.0);
  std::vector<double> hi(dims, 1.0);
  grow_random(tree, lo, hi, 0, rng);
  return tree;
}

struct Moments {
  double mean = 0.0;
  double m2 = 0.0;  // central second moment
  double m4 = 0.0;  // central fourth moment
};

Moments central_moments(const std::vector<double>& xs) {
  Moments m;
  for (const double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (const double x : xs) {
    const double d = x - m.mean;
    m.m2 += d * d;
    m.m4 += d * d * d * d;
  }
  m.m2 /= static_cast<double>(xs.size());
  m.m4 /= static_cast<double>(xs.size());
  return m;
}

}  // namespace

TEST_CASE("constant tree has zero variance everywhere") {
  const auto tree = constant_tree(3.7);
  CHECK(tree_mean(tree) == doctest::Approx(3.7));
  CHECK(tree_total_variance(tree) == doctest::Approx(0.0));
  CHECK(tree_marginal_variance(tree, 0) == doctest::Approx(0.0));
  CHECK(tree_marginal_variance(tree, 1) == doctest::Approx(0.0));
}

TEST_CASE("single split at 0.5 with leaves 0/1 is a Bernoulli(0.5)") {
  const auto tree = single_split_tree(0, 0.5, 0.0, 1.0);
  CHECK(tree_mean(tree) == doctest::Approx(0.5));
  CHECK(tree_total_variance(tree) == doctest::Approx(0.25));
  CHECK(tree_marginal_variance(tree, 0) == doctest::Approx(0.25));
  CHECK(tree_marginal_variance(tree, 1) == doctest::Approx(0.0));
}

TEST_CASE("step-function target with one depth-1 tree splits at the step") {
  Rng rng(4);
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  for (int i = 0; i < 400; ++i) {
    X.push_back({rng.uniform(), rng.uniform()});
    y.push_back(X.back()[0] < 0.55 ? 0.0 : 1.0);
  }
  ForestConfig config;
  config.n_trees = 1;
  config.max_depth = 1;
  config.bootstrap = false;
  config.feature_subsample = 1.0;
  Rng fit_rng(1);
  const Forest forest = fit_forest(X, y, config, fit_rng);
  REQUIRE(forest.trees.size() == 1);
  const auto& root = forest.trees[0].nodes[0];
  CHECK_FALSE(root.is_leaf());
  CHECK(root.dim == 0);
  CHECK(root.threshold == doctest::Approx(0.55).epsilon(0.02));
}

TEST_CASE("forests are identical across runs under a fixed seed") {
  Rng rng(12);
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  for (int i = 0; i < 200; ++i) {
    X.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    y.push_back(std::sin(X.back()[0]) + rng.uniform() * 0.1);
  }
  ForestConfig config;
  config.n_trees = 64;
  Rng r1(999);
  Rng r2(999);
  const Forest a = fit_forest(X, y, config, r1);
  const Forest b = fit_forest(X, y, config, r2);
  REQUIRE(a.trees.size() == b.trees.size());
  Rng probe(5);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> x{probe.uniform(), probe.uniform(), probe.uniform()};
    for (std::size_t t = 0; t < a.trees.size(); ++t)
      CHECK(a.trees[t].predict(x) == b.trees[t].predict(x));
  }
}

TEST_CASE("exact tree moments match a seeded Monte-Carlo oracle within 3 sigma") {
  Rng tree_rng(2718);
  Rng mc_rng(314159);
  for (int instance = 0; instance < 20; ++instance) {
    const auto tree = random_tree(2, tree_rng);

    constexpr int kOuter = 10000;  // x_j strata
    constexpr int kInner = 100;    // x_{-j} draws per stratum -> 1e6 total
    std::vector<double> all_values;
    all_values.reserve(kOuter * kInner);

    // Total mean and variance from the pooled sample.
    struct MarginalEstimate {
      std::vector<double> a_hat;
      double noise = 0.0;  // mean of s_i^2 / M
      std::vector<double> noise_terms;
    };
    std::vector<MarginalEstimate> marginal(2);
    for (auto& m : marginal) {
      m.a_hat.reserve(kOuter);
      m.noise_terms.reserve(kOuter);
    }

    for (std::size_t dim = 0; dim < 2; ++dim) {
      for (int i = 0; i < kOuter; ++i) {
        const double xj = mc_rng.uniform();
        double sum = 0.0;
        double sq = 0.0;
        for (int k = 0; k < kInner; ++k) {
          std::vector<double> x(2);
          x[dim] = xj;
          x[1 - dim] = mc_rng.uniform();
          const double f = tree.predict(x);
          sum += f;
          sq += f * f;
          if (dim == 0) all_values.push_back(f);
        }
        const double mean = sum / kInner;
        const double var_unbiased = std::max(0.0, (sq - kInner * mean * mean) / (kInner - 1));
        marginal[dim].a_hat.push_back(mean);
        marginal[dim].noise_terms.push_back(var_unbiased / kInner);
      }
    }

    // Total variance check.
    const auto pooled = central_moments(all_values);
    const double exact_mean = tree_mean(tree);
    const double exact_var = tree_total_variance(tree);
    const auto n_pooled = static_cast<double>(all_values.size());
    const double se_mean = std::sqrt(pooled.m2 / n_pooled);
    CHECK(std::abs(exact_mean - pooled.mean) <= 3.0 * se_mean + 1e-12);
    const double se_var = std::sqrt(std::max(0.0, pooled.m4 - pooled.m2 * pooled.m2) / n_pooled);
    CHECK(std::abs(exact_var - pooled.m2) <= 3.0 * se_var + 1e-12);

    // Marginal variance checks, noise-debiased.
    for (std::size_t dim = 0; dim < 2; ++dim) {
      const auto moments = central_moments(marginal[dim].a_hat);
      double mean_noise = 0.0;
      for (const double t : marginal[dim].noise_terms) mean_noise += t;
      mean_noise /= static_cast<double>(marginal[dim].noise_terms.size());
      const double estimate =
          moments.m2 * kOuter / (kOuter - 1.0) - mean_noise;  // unbiased sample var

      const auto noise_moments = central_moments(marginal[dim].noise_terms);
      const double se =
          std::sqrt(std::max(0.0, moments.m4 - moments.m2 * moments.m2) / kOuter) +
          std::sqrt(noise_moments.m2 / kOuter);
      const double exact = tree_marginal_variance(tree, dim);
      CHECK(std::abs(exact - estimate) <= 3.0 * se + 1e-9);
    }
  }
}

TEST_CASE("first-order components never exceed the total variance") {
  Rng tree_rng(555);
  for (int instance = 0; instance < 50; ++instance) {
    const auto tree = random_tree(3, tree_rng);
    const double total = tree_total_variance(tree);
    double sum = 0.0;
    for (std::size_t dim = 0; dim < 3; ++dim) sum += tree_marginal_variance(tree, dim);
    CHECK(sum <= total + 1e-9);
  }
}

namespace {

SearchSpace unit_square() {
  SearchSpace space;
  space.add(ParamSpec::continuous("x1", 0.0, 1.0));
  space.add(ParamSpec::continuous("x2", 0.0, 1.0));
  return space;
}

std::vector<Trial> sampled_trials(const SearchSpace& space, int count,
                                  const std::function<double(double, double)>& f,
                                  std::uint64_t seed) {
  std::vector<Trial> trials;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    Trial t;
    t.id = i;
    t.state = TrialState::Complete;
    t.params = {{"x1", rng.uniform()}, {"x2", rng.uniform()}};
    t.values = {f(std::get<double>(t.params.at("x1")), std::get<double>(t.params.at("x2")))};
    trials.push_back(std::move(t));
  }
  return trials;
}

// Brute-force grid-marginal oracle over an explicit function: first-order
// fraction of dim j from midpoint-rule marginals.
std::pair<double, double> grid_first_order_fractions(
    const std::function<double(double, double)>& f, int grid) {
  std::vector<double> a1(grid, 0.0), a2(grid, 0.0);
  double mean = 0.0, second = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double x1 = (i + 0.5) / grid;
    for (int j = 0; j < grid; ++j) {
      const double x2 = (j + 0.5) / grid;
      const double v = f(x1, x2);
      a1[i] += v;
      a2[j] += v;
      mean += v;
      second += v * v;
    }
  }
  const double cells = static_cast<double>(grid) * grid;
  mean /= cells;
  second /= cells;
  const double total = second - mean * mean;
  double v1 = 0.0, v2 = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double m1 = a1[i] / grid - mean;
    const double m2 = a2[i] / grid - mean;
    v1 += m1 * m1;
    v2 += m2 * m2;
  }
  return {v1 / grid / total, v2 / grid / total};
}

}  // namespace

TEST_CASE("grid-marginal oracle confirms the analytic additive targets") {
  const auto f = [](double x1, double x2) { return x1 + 0.1 * x2; };
  const auto [f1, f2] = grid_first_order_fractions(f, 400);
  // Var = 1/12 + 0.01/12; the x1 share is 100/101.
  CHECK(f1 == doctest::Approx(100.0 / 101.0).epsilon(1e-3));
  CHECK(f2 == doctest::Approx(1.0 / 101.0).epsilon(1e-2));
}

TEST_CASE("importances: single active dimension dominates") {
  const auto space = unit_square();
  const auto trials =
      sampled_trials(space, 300, [](double x1, double) { return x1 * x1; }, 77);
  const auto report = importances(trials, space, 0);
  REQUIRE(report.entries.size() == 2);
  CHECK(report.entries[0].first == "x1");
  CHECK(report.entries[0].second >= 0.95);
  CHECK(report.entries[1].second <= 0.05);
  CHECK(report.trial_count == 300);
  CHECK_FALSE(report.degenerate);
}

TEST_CASE("importances: additive 100:1 mixture lands in the banded targets") {
  const auto space = unit_square();
  const auto trials =
      sampled_trials(space, 300, [](double x1, double x2) { return x1 + 0.1 * x2; }, 123);
  const auto report = importances(trials, space, 0);
  REQUIRE(report.entries.size() == 2);
  CHECK(report.entries[0].first == "x1");
  // Analytic fractions are 0.990 / 0.0099; the forest sits within +-0.05.
  CHECK(report.entries[0].second == doctest::Approx(100.0 / 101.0).epsilon(0.055));
  CHECK(report.entries[1].second <= 1.0 / 101.0 + 0.05);
  double sum = 0.0;
  for (const auto& [name, value] : report.entries) {
    CHECK(value >= 0.0);
    sum += value;
  }
  CHECK(sum <= 1.0 + 1e-9);
}

TEST_CASE("importances are invariant under trial permutation") {
  const auto space = unit_square();
  auto trials =
      sampled_trials(space, 120, [](double x1, double x2) { return x1 + 0.3 * x2; }, 9);
  const auto baseline = importances(trials, space, 0);
  Rng rng(1);
  for (int shuffle = 0; shuffle < 3; ++shuffle) {
    for (std::size_t i = trials.size(); i > 1; --i)
      std::swap(trials[i - 1], trials[rng.index(i)]);
    CHECK(importances(trials, space, 0) == baseline);
  }
}

TEST_CASE("affine target transforms leave importances unchanged") {
  const auto space = unit_square();
  const auto base =
      sampled_trials(space, 200, [](double x1, double x2) { return x1 + 0.2 * x2; }, 41);
  auto scaled = base;
  for (auto& t : scaled) t.values[0] = 3.7 * t.values[0] - 11.0;

  const auto r1 = importances(base, space, 0);
  const auto r2 = importances(scaled, space, 0);
  REQUIRE(r1.entries.size() == r2.entries.size());
  for (std::size_t i = 0; i < r1.entries.size(); ++i) {
    CHECK(r1.entries[i].first == r2.entries[i].first);
    CHECK(std::abs(r1.entries[i].second - r2.entries[i].second) < 1e-6);
  }
}

TEST_CASE("constant targets yield the flagged all-zero report") {
  const auto space = unit_square();
  const auto trials = sampled_trials(space, 50, [](double, double) { return 4.2; }, 3);
  const auto report = importances(trials, space, 0);
  CHECK(report.degenerate);
  for (const auto& [name, value] : report.entries) CHECK(value == 0.0);
  // Ties break alphabetically.
  CHECK(report.entries[0].first == "x1");
  CHECK(report.entries[1].first == "x2");
}

TEST_CASE("importances require at least two usable trials") {
  const auto space = unit_square();
  const auto trials = sampled_trials(space, 1, [](double x1, double) { return x1; }, 3);
  try {
    importances(trials, space, 0);
    FAIL("expected InsufficientData");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::insufficient_data);
  }
}

TEST_CASE("constant-target forest predicts the constant everywhere") {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  Rng rng(8);
  for (int i = 0; i < 40; ++i) {
    X.push_back({rng.uniform(), rng.uniform()});
    y.push_back(2.5);
  }
  ForestConfig config;
  config.n_trees = 8;
  Rng fit_rng(2);
  const Forest forest = fit_forest(X, y, config, fit_rng);
  for (const auto& tree : forest.trees) {
    CHECK(tree.predict(std::vector<double>{0.1, 0.9}) == doctest::Approx(2.5));
    CHECK(tree_total_variance(tree) == doctest::Approx(0.0));
  }
}
