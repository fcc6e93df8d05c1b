// Independent reference computations and generators shared by the tests.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "xpd/attribution.hpp"
#include "xpd/dataset.hpp"
#include "xpd/gbdt.hpp"
#include "xpd/trees.hpp"

namespace oracle {

// Cover-weighted expectation of a tree given that only features in `known`
// are observed: known features follow x, unknown ones average their children
// by cover. This is the set function path-dependent TreeSHAP is defined on.
inline double cond_expectation(const xpd::Tree& tree, std::span<const double> x, const std::vector<bool>& known,
                               int node = 0) {
  const auto& n = tree.node(static_cast<std::size_t>(node));
  if (n.is_leaf()) return n.value;
  const auto f = static_cast<std::size_t>(n.feature);
  if (known[f]) return cond_expectation(tree, x, known, x[f] < n.threshold ? n.left : n.right);
  const auto& l = tree.node(static_cast<std::size_t>(n.left));
  const auto& r = tree.node(static_cast<std::size_t>(n.right));
  return (l.cover * cond_expectation(tree, x, known, n.left) + r.cover * cond_expectation(tree, x, known, n.right)) /
         n.cover;
}

// Shapley values by explicit subset enumeration:
// phi_i = sum_{S without i} |S|! (d-|S|-1)! / d! * (v(S+i) - v(S)).
inline std::vector<double> shapley_enumerate(std::size_t d, const std::function<double(const std::vector<bool>&)>& v) {
  const std::size_t masks = std::size_t{1} << d;
  std::vector<double> value(masks);
  std::vector<bool> member(d);
  for (std::size_t m = 0; m < masks; ++m) {
    for (std::size_t j = 0; j < d; ++j) member[j] = (m >> j) & 1u;
    value[m] = v(member);
  }
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t k = 1; k <= d; ++k) fact[k] = fact[k - 1] * static_cast<double>(k);
  std::vector<double> phi(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t m = 0; m < masks; ++m) {
      if ((m >> i) & 1u) continue;
      const auto s = static_cast<std::size_t>(std::popcount(m));
      phi[i] += fact[s] * fact[d - s - 1] / fact[d] * (value[m | (std::size_t{1} << i)] - value[m]);
    }
  }
  return phi;
}

// Path-dependent Shapley values of an ensemble, summed over trees and scaled
// by the learning rate.
inline std::vector<double> path_dependent_shapley(const xpd::GbdtModel& model, std::span<const double> x) {
  const std::size_t d = model.n_features;
  std::vector<double> phi(d, 0.0);
  for (const auto& tree : model.trees) {
    const auto part = shapley_enumerate(d, [&](const std::vector<bool>& s) { return cond_expectation(tree, x, s); });
    for (std::size_t j = 0; j < d; ++j) phi[j] += model.learning_rate * part[j];
  }
  return phi;
}

// Full Cartesian grid: every feature takes values 0..levels[j]-1
// independently. On such a background the empirical feature distribution is
// exactly a product distribution.
inline xpd::Dataset product_grid(const std::vector<int>& levels) {
  const std::size_t d = levels.size();
  std::size_t n = 1;
  for (int l : levels) n *= static_cast<std::size_t>(l);
  xpd::Matrix x(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t rest = r;
    for (std::size_t j = 0; j < d; ++j) {
      x(r, j) = static_cast<double>(rest % static_cast<std::size_t>(levels[j]));
      rest /= static_cast<std::size_t>(levels[j]);
    }
  }
  std::vector<int> y(n, 0);
  y[0] = 1;
  std::vector<xpd::FeatureMeta> meta(d);
  for (std::size_t j = 0; j < d; ++j) meta[j].name = "f" + std::to_string(j);
  return xpd::Dataset(std::move(x), std::move(y), std::move(meta));
}

// Random tree over integer-grid features. Every split lies strictly inside
// the region that reaches its node, so no node is empty, and covers are the
// number of grid rows reaching each node. Features may repeat along a path.
inline xpd::Tree random_grid_tree(std::mt19937_64& rng, const std::vector<int>& levels, std::size_t max_leaves) {
  struct Region {
    std::vector<int> lo, hi;  // inclusive grid index bounds per feature
  };
  const std::size_t d = levels.size();
  std::vector<xpd::TreeNode> nodes(1);
  std::vector<Region> regions(1);
  regions[0].lo.assign(d, 0);
  regions[0].hi.resize(d);
  for (std::size_t j = 0; j < d; ++j) regions[0].hi[j] = levels[j] - 1;
  std::vector<int> open{0};
  std::uniform_int_distribution<std::size_t> leaves_dist(1, max_leaves);
  const std::size_t target = leaves_dist(rng);
  std::size_t leaves = 1;
  while (leaves < target && !open.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
    const std::size_t slot = pick(rng);
    const int id = open[slot];
    const Region reg = regions[static_cast<std::size_t>(id)];
    std::vector<std::size_t> splittable;
    for (std::size_t j = 0; j < d; ++j) {
      if (reg.hi[j] > reg.lo[j]) splittable.push_back(j);
    }
    if (splittable.empty()) {
      open.erase(open.begin() + static_cast<std::ptrdiff_t>(slot));
      continue;
    }
    const std::size_t f = splittable[std::uniform_int_distribution<std::size_t>(0, splittable.size() - 1)(rng)];
    const int cut = std::uniform_int_distribution<int>(reg.lo[f] + 1, reg.hi[f])(rng);  // left gets [lo, cut-1]
    const int left = static_cast<int>(nodes.size());
    nodes.resize(nodes.size() + 2);
    Region lr = reg, rr = reg;
    lr.hi[f] = cut - 1;
    rr.lo[f] = cut;
    regions.push_back(lr);
    regions.push_back(rr);
    auto& n = nodes[static_cast<std::size_t>(id)];
    n.feature = static_cast<int>(f);
    n.threshold = static_cast<double>(cut) - 0.5;
    n.left = left;
    n.right = left + 1;
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(slot));
    open.push_back(left);
    open.push_back(left + 1);
    ++leaves;
  }
  std::normal_distribution<double> value(0.0, 1.0);
  // Children always have larger indices, so a reverse sweep fills covers.
  for (std::size_t i = nodes.size(); i-- > 0;) {
    auto& n = nodes[i];
    if (n.is_leaf()) {
      n.value = value(rng);
      double count = 1.0;
      for (std::size_t j = 0; j < d; ++j) count *= regions[i].hi[j] - regions[i].lo[j] + 1;
      n.cover = count;
    } else {
      n.cover = nodes[static_cast<std::size_t>(n.left)].cover + nodes[static_cast<std::size_t>(n.right)].cover;
    }
  }
  return xpd::Tree(std::move(nodes));
}

// Random tree over continuous features with arbitrary positive leaf covers.
inline xpd::Tree random_tree(std::mt19937_64& rng, std::size_t d, std::size_t max_leaves) {
  std::vector<xpd::TreeNode> nodes(1);
  std::vector<int> open{0};
  std::uniform_int_distribution<std::size_t> leaves_dist(1, max_leaves);
  std::uniform_int_distribution<std::size_t> feature(0, d - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t target = leaves_dist(rng);
  for (std::size_t leaves = 1; leaves < target; ++leaves) {
    const std::size_t slot = std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng);
    const int id = open[slot];
    const int left = static_cast<int>(nodes.size());
    nodes.resize(nodes.size() + 2);
    auto& n = nodes[static_cast<std::size_t>(id)];
    n.feature = static_cast<int>(feature(rng));
    n.threshold = normal(rng);
    n.left = left;
    n.right = left + 1;
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(slot));
    open.push_back(left);
    open.push_back(left + 1);
  }
  std::uniform_real_distribution<double> cover(0.5, 50.0);
  for (std::size_t i = nodes.size(); i-- > 0;) {
    auto& n = nodes[i];
    if (n.is_leaf()) {
      n.value = normal(rng);
      n.cover = cover(rng);
    } else {
      n.cover = nodes[static_cast<std::size_t>(n.left)].cover + nodes[static_cast<std::size_t>(n.right)].cover;
    }
  }
  return xpd::Tree(std::move(nodes));
}

inline xpd::GbdtModel wrap_trees(std::vector<xpd::Tree> trees, std::size_t d, double base, double lr) {
  xpd::GbdtModel m;
  m.base_score = base;
  m.learning_rate = lr;
  m.trees = std::move(trees);
  m.n_features = d;
  for (std::size_t j = 0; j < d; ++j) m.feature_names.push_back("f" + std::to_string(j));
  return m;
}

}  // namespace oracle
