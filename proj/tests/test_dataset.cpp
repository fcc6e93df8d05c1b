#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "test_util.hpp"
#include "xpd/dataset.hpp"

using namespace xpd;

namespace {

Dataset labelled(std::size_t pos, std::size_t neg) {
  const std::size_t n = pos + neg;
  Matrix x(n, 1);
  std::vector<int> y(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i);
    y[i] = i < pos ? 1 : 0;
  }
  return Dataset(std::move(x), std::move(y), {{"a", FeatureKind::Numeric, false}});
}

std::size_t count_pos(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::size_t c = 0;
  for (auto i : idx) c += static_cast<std::size_t>(ds.y()[i]);
  return c;
}

}  // namespace

TEST_CASE("load_csv parses header, kinds and labels") {
  testutil::TempDir dir;
  testutil::write_file(dir / "a.csv", "f1,f2,label\n0.5,1,1\n0.2,0,0\n");
  const auto ds = load_csv(dir / "a.csv", "label");
  CHECK(ds.rows() == 2);
  CHECK(ds.cols() == 2);
  CHECK(ds.meta()[0].kind == FeatureKind::Numeric);
  CHECK(ds.meta()[1].kind == FeatureKind::Binary);
  CHECK(ds.y() == std::vector<int>{1, 0});
  CHECK(ds.x()(0, 0) == 0.5);
  CHECK(ds.feature_names() == std::vector<std::string>{"f1", "f2"});
}

TEST_CASE("load_csv maps -1/1 labels and reads the label column anywhere") {
  testutil::TempDir dir;
  testutil::write_file(dir / "a.csv", "y,f1\n-1,3\n1,4\n");
  const auto ds = load_csv(dir / "a.csv", "y");
  CHECK(ds.y() == std::vector<int>{0, 1});
  CHECK(ds.cols() == 1);
}

TEST_CASE("load_csv errors name the row and column") {
  testutil::TempDir dir;
  testutil::write_file(dir / "a.csv", "f1,f2,label\n0.5,1,1\n0.2,,0\n");
  try {
    load_csv(dir / "a.csv", "label");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("f2") != std::string::npos);
  }
  testutil::write_file(dir / "b.csv", "f1,label\n0.5,2\n");
  CHECK_THROWS_AS(load_csv(dir / "b.csv", "label"), DataError);
  testutil::write_file(dir / "c.csv", "f1,f1,label\n0.5,1,1\n");
  CHECK_THROWS_AS(load_csv(dir / "c.csv", "label"), DataError);
  testutil::write_file(dir / "d.csv", "f1,label\n0.5,1\n");
  CHECK_THROWS_AS(load_csv(dir / "d.csv", "target"), DataError);
  CHECK_THROWS_AS(load_csv(dir / "d.csv", "label", {"nope"}), DataError);
  CHECK_THROWS_AS(load_csv(dir / "missing.csv", "label"), DataError);
}

TEST_CASE("csv round trip is bit exact") {
  testutil::TempDir dir;
  const auto ds = synthesize(200, 7, 11, 0.1);
  write_csv(ds, dir / "s.csv");
  std::vector<std::string> actionable;
  for (const auto& m : ds.meta()) {
    if (m.actionable) actionable.push_back(m.name);
  }
  const auto back = load_csv(dir / "s.csv", "label", actionable);
  CHECK(back == ds);
}

TEST_CASE("stratified split of 5/5 rows at 60/20/20") {
  const auto ds = labelled(5, 5);
  const auto s = stratified_split(ds, {0.6, 0.2, 0.2}, 42);
  CHECK(s.train.size() == 6);
  CHECK(s.valid.size() == 2);
  CHECK(s.test.size() == 2);
  CHECK(count_pos(ds, s.train) == 3);
  CHECK(count_pos(ds, s.valid) == 1);
  CHECK(count_pos(ds, s.test) == 1);
  CHECK(stratified_split(ds, {0.6, 0.2, 0.2}, 42) == s);
}

TEST_CASE("stratified split rejects bad ratios and degenerate classes") {
  const auto ds = labelled(5, 5);
  CHECK_THROWS_AS(stratified_split(ds, {0.5, 0.5, 0.5}, 1), ConfigError);
  CHECK_THROWS_AS(stratified_split(ds, {0.8, 0.2, 0.0}, 1), ConfigError);
  CHECK_THROWS_AS(stratified_split(labelled(0, 10), {0.6, 0.2, 0.2}, 1), DataError);
  CHECK_THROWS_AS(stratified_split(labelled(1, 10), {0.2, 0.4, 0.4}, 1), DataError);
}

TEST_CASE("stratified split is a partition with per-class counts within one of target") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t pos = std::uniform_int_distribution<std::size_t>(3, 300)(rng);
    const std::size_t neg = std::uniform_int_distribution<std::size_t>(3, 300)(rng);
    const auto ds = labelled(pos, neg);
    const std::uint64_t seed = rng();
    const auto s = stratified_split(ds, {0.6, 0.2, 0.2}, seed);
    std::vector<std::size_t> all;
    for (const auto* part : {&s.train, &s.valid, &s.test}) {
      CHECK(std::is_sorted(part->begin(), part->end()));
      all.insert(all.end(), part->begin(), part->end());
    }
    std::sort(all.begin(), all.end());
    REQUIRE(all.size() == ds.rows());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
    const double ratios[3] = {0.6, 0.2, 0.2};
    const std::vector<std::size_t>* parts[3] = {&s.train, &s.valid, &s.test};
    for (int p = 0; p < 3; ++p) {
      const double pos_target = ratios[p] * static_cast<double>(pos);
      const double neg_target = ratios[p] * static_cast<double>(neg);
      const auto got_pos = static_cast<double>(count_pos(ds, *parts[p]));
      const auto got_neg = static_cast<double>(parts[p]->size()) - got_pos;
      CHECK(std::abs(got_pos - pos_target) <= 1.0);
      CHECK(std::abs(got_neg - neg_target) <= 1.0);
    }
  }
}

TEST_CASE("synthesize shape, balance, metadata and determinism") {
  const auto ds = synthesize(1000, 18, 7, 0.0);
  CHECK(ds.rows() == 1000);
  CHECK(ds.cols() == 18);
  const double rate = static_cast<double>(ds.positives()) / 1000.0;
  CHECK(rate >= 0.35);
  CHECK(rate <= 0.65);
  for (std::size_t j = 0; j < 18; ++j) {
    CHECK(ds.meta()[j].name == "f" + std::to_string(j));
    CHECK(ds.meta()[j].actionable == (j < 6));
  }
  std::size_t binary = 0;
  for (const auto& m : ds.meta()) binary += m.kind == FeatureKind::Binary;
  CHECK(binary == 4);  // round(0.2 * 18)
  CHECK(synthesize(1000, 18, 7, 0.0) == ds);
  CHECK_FALSE(synthesize(1000, 18, 8, 0.0).x() == ds.x());
  CHECK_THROWS_AS(synthesize(19, 4, 1, 0.0), ConfigError);
  CHECK_THROWS_AS(synthesize(100, 1, 1, 0.0), ConfigError);
  CHECK_THROWS_AS(synthesize(100, 4, 1, 1.0), ConfigError);
}

TEST_CASE("registry matches the twelve published table shapes") {
  const auto& r = registry();
  CHECK(r.size() == 12);
  CHECK(registry_entry("ds_600K11").n_instances == 662591);
  CHECK(registry_entry("ds_600K11").n_features == 10);
  CHECK(registry_entry("ds_11K89").n_instances == 11481);
  CHECK(registry_entry("ds_11K89").n_features == 89);
  CHECK(registry_entry("ds_11055").n_features == 31);
  CHECK_THROWS(registry_entry("nope"));
}

TEST_CASE("column statistics") {
  Matrix x(4, 2, std::vector<double>{1, 0, 2, 0, 3, 0, 4, 0});
  CHECK(column_means(x) == std::vector<double>{2.5, 0.0});
  const auto sd = column_stds(x);
  CHECK(sd[0] == doctest::Approx(std::sqrt(1.25)));
  CHECK(sd[1] == 0.0);
}
