#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "xpd/attribution.hpp"
#include "xpd/ebm.hpp"

using namespace xpd;

namespace {

Tree stump(int feature, double threshold, double lv, double rv, double lc, double rc) {
  TreeNode root;
  root.feature = feature;
  root.threshold = threshold;
  root.left = 1;
  root.right = 2;
  root.cover = lc + rc;
  TreeNode l, r;
  l.value = lv;
  l.cover = lc;
  r.value = rv;
  r.cover = rc;
  return Tree({root, l, r});
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("single-feature stump") {
  const auto m = oracle::wrap_trees({stump(0, 0.5, -1.0, 1.0, 50, 50)}, 1, 0.0, 1.0);
  const auto a = tree_shap(m, std::vector<double>{0.7});
  CHECK(a.phi[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(a.base_value == 0.0);
  CHECK(a.model_margin == 1.0);
}

TEST_CASE("symmetric AND tree gives equal attributions") {
  // x0 >= 0.5 and x1 >= 0.5 -> 1, else 0, equal covers at every split
  const std::vector<TreeNode> nodes{
      {0, 0.5, 1, 2, 0.0, 4.0}, {1, 0.5, 3, 4, 0.0, 2.0}, {1, 0.5, 5, 6, 0.0, 2.0}, {-1, 0.0, -1, -1, 0.0, 1.0},
      {-1, 0.0, -1, -1, 0.0, 1.0}, {-1, 0.0, -1, -1, 0.0, 1.0}, {-1, 0.0, -1, -1, 1.0, 1.0}};
  const auto m = oracle::wrap_trees({Tree(nodes)}, 2, 0.0, 1.0);
  const auto a = tree_shap(m, std::vector<double>{1.0, 1.0});
  CHECK(a.phi[0] == doctest::Approx(a.phi[1]).epsilon(1e-15));
  CHECK(a.phi[0] + a.phi[1] + a.base_value == doctest::Approx(1.0));
  CHECK(a.base_value == doctest::Approx(0.25));
}

TEST_CASE("tree_shap matches the path-dependent enumeration oracle on random ensembles") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    const std::size_t trees = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    std::vector<Tree> ts;
    for (std::size_t t = 0; t < trees; ++t) ts.push_back(oracle::random_tree(rng, d, 16));
    const auto m = oracle::wrap_trees(std::move(ts), d, nd(rng), 0.3);
    std::vector<double> x(d);
    for (auto& v : x) v = nd(rng);
    const auto a = tree_shap(m, x);
    worst = std::max(worst, max_abs_diff(a.phi, oracle::path_dependent_shapley(m, x)));
    double base = m.base_score;
    for (const auto& t : m.trees) base += m.learning_rate * oracle::cond_expectation(t, x, std::vector<bool>(d, false));
    CHECK(a.base_value == doctest::Approx(base).epsilon(1e-12));
    const double total = std::accumulate(a.phi.begin(), a.phi.end(), a.base_value);
    CHECK(std::abs(total - gbdt_margin(m, x)) <= 1e-9);
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("tree_shap matches interventional brute force on product backgrounds") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    const std::vector<int> levels(d, 3);
    const auto bg = oracle::product_grid(levels);
    std::vector<Tree> ts;
    for (int t = 0; t < 2; ++t) ts.push_back(oracle::random_grid_tree(rng, levels, 16));
    const auto m = oracle::wrap_trees(std::move(ts), d, 0.1, 0.5);
    std::vector<double> x(d);
    for (auto& v : x) v = static_cast<double>(std::uniform_int_distribution<int>(0, 2)(rng));
    const auto a = tree_shap(m, x);
    const auto b = brute_force_shapley(gbdt_margin_fn(m), bg, x);
    CHECK(max_abs_diff(a.phi, b.phi) <= 1e-9);
    CHECK(a.base_value == doctest::Approx(b.base_value).epsilon(1e-12));
  }
}

TEST_CASE("brute force: dummy and linear cases, errors") {
  const auto bg = oracle::product_grid({2, 3, 2});
  const std::vector<double> x{1.0, 2.0, 0.0};
  const auto c = brute_force_shapley([](std::span<const double>) { return 3.0; }, bg, x);
  for (double v : c.phi) CHECK(v == 0.0);
  CHECK(c.base_value == 3.0);

  const std::vector<double> w{0.5, -2.0, 1.5};
  auto linear = [&](std::span<const double> r) { return w[0] * r[0] + w[1] * r[1] + w[2] * r[2]; };
  const auto l = brute_force_shapley(linear, bg, x);
  const auto mean = column_means(bg.x());
  for (std::size_t j = 0; j < 3; ++j) CHECK(l.phi[j] == doctest::Approx(w[j] * (x[j] - mean[j])).epsilon(1e-12));

  const Dataset empty(Matrix(0, 3), {}, {{"a"}, {"b"}, {"c"}});
  CHECK_THROWS(brute_force_shapley(linear, empty, x));
  const auto wide = oracle::product_grid(std::vector<int>(13, 1));
  CHECK_THROWS(brute_force_shapley([](std::span<const double>) { return 0.0; }, wide, std::vector<double>(13, 0.0)));
}

TEST_CASE("tree_shap rejects a zero root cover and gives unused features zero") {
  auto bad = oracle::wrap_trees({stump(0, 0.5, -1.0, 1.0, 0, 0)}, 2, 0.0, 1.0);
  CHECK_THROWS_AS(tree_shap(bad, std::vector<double>{0.0, 0.0}), ModelError);
  const auto m = oracle::wrap_trees({stump(0, 0.5, -1.0, 1.0, 30, 70), stump(2, 0.0, 0.2, -0.4, 5, 5)}, 3, 0.0, 1.0);
  const auto a = tree_shap(m, std::vector<double>{0.1, 9.0, -1.0});
  CHECK(a.phi[1] == 0.0);
}

TEST_CASE("ebm attribution closed form and its tree-ensemble twin") {
  EbmModel m;
  m.binmap = BinMap(std::vector<std::vector<double>>{{0.5}});
  m.shapes = {{-1.0, 1.0}};
  m.bin_counts = {{4, 4}};
  m.intercept = 0.25;
  m.feature_names = {"x"};
  const auto a = ebm_attribution(m, std::vector<double>{0.7});
  CHECK(a.phi[0] == 1.0);
  CHECK(a.base_value == 0.25);
  CHECK(a.model_margin == 1.25);
  auto zero = m;
  zero.shapes = {{0.0, 0.0}};
  CHECK(ebm_attribution(zero, std::vector<double>{3.0}).phi[0] == 0.0);

  const auto ds = synthesize(2000, 6, 21, 0.02);
  const auto s = stratified_split(ds, {}, 42);
  EbmConfig cfg;
  cfg.max_cycles = 80;
  const auto fitted = ebm_fit(ds.subset(s.train), ds.subset(s.valid), cfg);
  const auto twin = ebm_as_tree_ensemble(fitted);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 1.5);
  double worst = 0.0;
  for (int i = 0; i < 300; ++i) {
    std::vector<double> x(6);
    for (auto& v : x) v = nd(rng);
    const auto e = ebm_attribution(fitted, x);
    const auto t = tree_shap(twin, x);
    worst = std::max(worst, max_abs_diff(e.phi, t.phi));
    CHECK(std::abs(e.base_value - t.base_value) <= 1e-9);
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("attribution_matrix assembly and ranking") {
  const auto m = oracle::wrap_trees({stump(0, 0.5, -1.0, 1.0, 50, 50), stump(1, 0.0, 3.0, -3.0, 20, 80)}, 2, 0.0, 1.0);
  const auto attribute = gbdt_attributor(m);
  Matrix one(1, 2, std::vector<double>{0.7, 1.0});
  const auto single = attribution_matrix(attribute, one);
  REQUIRE(single.rows() == 1);
  const auto direct = tree_shap(m, one.row(0));
  CHECK(single.phi(0, 0) == direct.phi[0]);
  CHECK(single.phi(0, 1) == direct.phi[1]);
  CHECK(single.base_values[0] == direct.base_value);

  Matrix dup(4, 2, std::vector<double>{0.7, 1.0, 0.2, -1.0, 0.7, 1.0, 0.2, -1.0});
  set_worker_count(3);
  const auto am = attribution_matrix(attribute, dup);
  set_worker_count(1);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(am.phi(0, j) == am.phi(2, j));
    CHECK(am.phi(1, j) == am.phi(3, j));
  }
  const auto imp = am.mean_abs();
  for (std::size_t j = 0; j < 2; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) s += std::abs(am.phi(i, j));
    CHECK(imp[j] == doctest::Approx(s / 4.0));
  }
  CHECK(am.ranking() == std::vector<std::size_t>{1, 0});
}
