#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "parex/importance.hpp"
#include "parex/paramspace.hpp"
#include "parex/trialstore.hpp"

namespace parex {

// Piecewise-constant regression tree over [0,1]^d.  Internal nodes split one
// dimension at a unit-cube threshold; leaf cells partition the cube exactly,
// so means and variances under the uniform distribution have closed forms.
struct TreeNode {
  int dim = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return dim < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  std::size_t dimension = 0;

  double predict(std::span<const double> x) const;
};

struct ForestConfig {
  int n_trees = 64;
  int max_depth = 64;
  int min_samples_leaf = 1;
  double feature_subsample = 0.8;  // fraction of dims considered per split
  bool bootstrap = true;
};

struct Forest {
  std::vector<RegressionTree> trees;
  ForestConfig config;
  std::size_t dimension = 0;
};

// Greedy variance-reduction trees on bootstrap resamples with per-split
// feature subsampling; deterministic under a fixed rng seed.
Forest fit_forest(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                  const ForestConfig& config, Rng& rng);

// Exact moments of the piecewise-constant prediction under uniform [0,1]^d,
// computed from leaf cell volumes and values (no sampling).
double tree_mean(const RegressionTree& tree);
double tree_total_variance(const RegressionTree& tree);

// Variance of the dim-j marginal a_j(x_j) = E[prediction | x_j], exact on
// the dim-j partition induced by the leaf cells.
double tree_marginal_variance(const RegressionTree& tree, std::size_t dim);

struct FanovaConfig {
  ForestConfig forest;
  std::uint64_t seed = 0;
};

FanovaConfig fanova_config_from_json(const ojson& j);

// Encodes completed trials to the unit cube, fits the forest and averages
// the per-tree first-order variance fractions V_j / V.  Trees with zero
// total variance contribute zero.  All-equal targets yield the flagged
// all-zero report instead of dividing by zero.
ImportanceReport importances(const std::vector<Trial>& trials, const SearchSpace& space,
                             int objective_index, const FanovaConfig& config = {});

}  // namespace parex
