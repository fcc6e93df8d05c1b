#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "xpd/trees.hpp"

using namespace xpd;

namespace {

Matrix column(std::vector<double> v) {
  const std::size_t n = v.size();
  return Matrix(n, 1, std::move(v));
}

void check_covers(const Tree& t) {
  for (const auto& n : t.nodes()) {
    if (n.is_leaf()) {
      CHECK(std::isfinite(n.value));
      continue;
    }
    const double sum = t.node(static_cast<std::size_t>(n.left)).cover + t.node(static_cast<std::size_t>(n.right)).cover;
    CHECK(n.cover == doctest::Approx(sum).epsilon(1e-12));
  }
}

double hand_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  const double g = gl + gr, h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma;
}

}  // namespace

TEST_CASE("binmap: two distinct values, quantiles, constant column") {
  const auto two = build_binmap(column({0, 1, 1, 0, 1}));
  REQUIRE(two.edges(0).size() == 1);
  CHECK(two.bins(0) == 2);
  CHECK(two.edges(0)[0] > 0.0);
  CHECK(two.edges(0)[0] < 1.0);
  CHECK(two.bin(0, 0.0) == 0);
  CHECK(two.bin(0, 1.0) == 1);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(1000);
  for (auto& x : v) x = u(rng);
  const auto q = build_binmap(column(v), 4);
  REQUIRE(q.edges(0).size() == 3);
  std::sort(v.begin(), v.end());
  CHECK(std::abs(q.edges(0)[0] - v[249]) < 0.01);
  CHECK(std::abs(q.edges(0)[1] - v[499]) < 0.01);
  CHECK(std::abs(q.edges(0)[2] - v[749]) < 0.01);

  const auto constant = build_binmap(column({2, 2, 2}));
  CHECK(constant.edges(0).empty());
  CHECK(constant.bins(0) == 1);
}

TEST_CASE("binmap: k distinct values below max_bins give k bins, strictly increasing edges") {
  std::vector<double> v;
  for (int r = 0; r < 5; ++r) {
    for (int k = 0; k < 40; ++k) v.push_back(k * 0.25);
  }
  const auto m = build_binmap(column(v), 256);
  CHECK(m.bins(0) == 40);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  std::vector<double> w(5000);
  for (auto& x : w) x = nd(rng);
  const auto m2 = build_binmap(column(w), 256);
  CHECK(m2.bins(0) <= 256);
  for (std::size_t i = 1; i < m2.edges(0).size(); ++i) CHECK(m2.edges(0)[i] > m2.edges(0)[i - 1]);
  // every value lands in exactly one bin and binning preserves order
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (w[i] < w[i - 1]) CHECK(m2.bin(0, w[i]) <= m2.bin(0, w[i - 1]));
  }
  CHECK_THROWS(build_binmap(column(w), 1));
  CHECK_THROWS(build_binmap(column(w), 257));
}

TEST_CASE("fit_tree: equal gradients give a single leaf") {
  const auto x = column({0, 1, 2, 3});
  const BinMap map = build_binmap(x);
  const BinnedMatrix b(x, map);
  std::vector<GradPair> g(4, {0.5, 1.0});
  TreeParams p;
  p.lambda = 0.0;
  const auto t = fit_tree(b, g, p);
  REQUIRE(t.size() == 1);
  CHECK(t.root().value == doctest::Approx(-0.5));
  CHECK(t.root().cover == 4.0);
}

TEST_CASE("fit_tree: two-row split") {
  const auto x = column({0, 1});
  const BinMap map = build_binmap(x);
  const BinnedMatrix b(x, map);
  std::vector<GradPair> g{{-1.0, 1.0}, {1.0, 1.0}};
  TreeParams p;
  p.lambda = 0.0;
  p.gamma = 0.0;
  const auto t = fit_tree(b, g, p);
  REQUIRE(t.size() == 3);
  CHECK(t.root().cover == 2.0);
  const std::vector<double> r0{0.0}, r1{1.0};
  CHECK(predict_tree(t, r0) == 1.0);
  CHECK(predict_tree(t, r1) == -1.0);
  check_covers(t);
}

TEST_CASE("fit_tree: four-row gains match hand enumeration") {
  // Two features; every candidate split is scored with the gain formula by hand.
  Matrix x(4, 2, std::vector<double>{0, 3, 1, 1, 2, 0, 3, 2});
  const std::vector<GradPair> g{{-2.0, 1.0}, {-1.0, 0.5}, {1.5, 1.0}, {0.5, 2.0}};
  const double lambda = 1.0;
  const BinMap map = build_binmap(x);
  const BinnedMatrix b(x, map);

  double best = -1e300;
  std::size_t best_f = 0;
  double best_thr = 0.0;
  for (std::size_t f = 0; f < 2; ++f) {
    for (double thr : map.edges(f)) {
      double gl = 0, hl = 0, gr = 0, hr = 0;
      for (std::size_t i = 0; i < 4; ++i) {
        if (x(i, f) < thr) {
          gl += g[i].g;
          hl += g[i].h;
        } else {
          gr += g[i].g;
          hr += g[i].h;
        }
      }
      const double gain = hand_gain(gl, hl, gr, hr, lambda, 0.0);
      CHECK(split_gain(gl, hl, gr, hr, lambda, 0.0) == doctest::Approx(gain).epsilon(1e-14));
      if (gain > best) {
        best = gain;
        best_f = f;
        best_thr = thr;
      }
    }
  }
  TreeParams p;
  p.lambda = lambda;
  p.max_depth = 1;
  p.min_child_weight = 0.0;
  const auto t = fit_tree(b, g, p);
  REQUIRE(t.size() == 3);
  CHECK(t.root().feature == static_cast<int>(best_f));
  CHECK(t.root().threshold == best_thr);
  double gl = 0, hl = 0, gr = 0, hr = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (x(i, best_f) < best_thr) {
      gl += g[i].g;
      hl += g[i].h;
    } else {
      gr += g[i].g;
      hr += g[i].h;
    }
  }
  CHECK(t.node(static_cast<std::size_t>(t.root().left)).value == doctest::Approx(-gl / (hl + lambda)));
  CHECK(t.node(static_cast<std::size_t>(t.root().right)).value == doctest::Approx(-gr / (hr + lambda)));
  CHECK(leaf_weight(gl, hl, lambda) == doctest::Approx(-gl / (hl + lambda)));
}

TEST_CASE("predict_tree routing") {
  CHECK(predict_tree(Tree::leaf(0.3, 1.0), std::vector<double>{123.0}) == 0.3);
  TreeNode root;
  root.feature = 0;
  root.threshold = 0.5;
  root.left = 1;
  root.right = 2;
  root.cover = 2;
  TreeNode l, r;
  l.value = -1;
  l.cover = 1;
  r.value = 1;
  r.cover = 1;
  const Tree t({root, l, r});
  CHECK(predict_tree(t, std::vector<double>{0.7}) == 1.0);
  CHECK(predict_tree(t, std::vector<double>{0.2}) == -1.0);
  CHECK(predict_tree(t, std::vector<double>{0.5}) == 1.0);
}

TEST_CASE("fit_tree: gain ties go to the lowest feature") {
  Matrix x(6, 3);
  for (std::size_t i = 0; i < 6; ++i) {
    x(i, 0) = 0.0;  // constant: no split
    x(i, 1) = static_cast<double>(i);
    x(i, 2) = static_cast<double>(i);
  }
  std::vector<GradPair> g;
  for (std::size_t i = 0; i < 6; ++i) g.push_back({i < 3 ? -1.0 : 1.0, 1.0});
  const BinMap map = build_binmap(x);
  const BinnedMatrix b(x, map);
  const auto t = fit_tree(b, g, TreeParams{});
  CHECK(t.root().feature == 1);
}

TEST_CASE("fit_tree: stopping rules") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  Matrix x(300, 4);
  std::vector<GradPair> g(300);
  for (std::size_t i = 0; i < 300; ++i) {
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = nd(rng);
    g[i] = {nd(rng) + (x(i, 0) > 0 ? 1.0 : -1.0), 0.25};
  }
  const BinMap map = build_binmap(x);
  const BinnedMatrix b(x, map);

  TreeParams big_gamma;
  big_gamma.gamma = 1e9;
  CHECK(fit_tree(b, g, big_gamma).size() == 1);

  TreeParams shallow;
  shallow.max_depth = 2;
  const auto t = fit_tree(b, g, shallow);
  CHECK(t.depth() <= 2);
  check_covers(t);

  TreeParams heavy;
  heavy.min_child_weight = 40.0;  // each row has h = 0.25
  const auto th = fit_tree(b, g, heavy);
  for (const auto& n : th.nodes()) CHECK(n.cover >= 40.0);

  TreeParams only3;
  only3.allowed_features = {3};
  for (const auto& n : fit_tree(b, g, only3).nodes()) {
    if (!n.is_leaf()) CHECK(n.feature == 3);
  }

  TreeParams leaves;
  leaves.max_leaves = 3;
  leaves.max_depth = 10;
  CHECK(fit_tree(b, g, leaves).leaves() <= 3);

  CHECK_THROWS(fit_tree(b, std::vector<GradPair>(10), TreeParams{}));
}

TEST_CASE("fit_tree is invariant to row permutation") {
  // Dyadic gradients make every histogram sum exact, so order cannot matter.
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> small(-8, 8);
  std::uniform_int_distribution<int> hsmall(1, 8);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 200;
    Matrix x(n, 5);
    std::vector<GradPair> g(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < 5; ++j) x(i, j) = std::round(nd(rng) * 8.0) / 8.0;
      g[i] = {small(rng) / 8.0, hsmall(rng) / 8.0};
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix xp(n, 5);
    std::vector<GradPair> gp(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < 5; ++j) xp(i, j) = x(perm[i], j);
      gp[i] = g[perm[i]];
    }
    const BinMap m1 = build_binmap(x);
    const BinMap m2 = build_binmap(xp);
    REQUIRE(m1 == m2);
    const auto t1 = fit_tree(BinnedMatrix(x, m1), g, TreeParams{});
    const auto t2 = fit_tree(BinnedMatrix(xp, m2), gp, TreeParams{});
    CHECK(t1 == t2);
    check_covers(t1);
  }
}
