#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "fiatnet/bpt.hpp"

using namespace fiatnet;

namespace {

AngleAnnotation intervals(std::vector<AngularRegion> r) { return AngleAnnotation::from_intervals(r); }

std::vector<int> labels_of(const AngleAnnotation& a) { return {a.labels.begin(), a.labels.end()}; }

RegionClassifier constant_classifier(double p) {
  return [p](const BpTree&, std::span<const int>) { return p; };
}

}  // namespace

TEST_CASE("ceil-split tree with min width 4") {
  const BpTree t = BpTree::build(4);
  CHECK(t.size() == 255);
  CHECK(t.leaf_count() == 128);
  CHECK(t.depth() == 7);
  const std::vector<std::set<int>> widths = {{360}, {180}, {90}, {45}, {23, 22}, {12, 11}, {6, 5}, {3, 2}};
  for (const BptNode& n : t.nodes()) {
    CHECK(widths[n.level].count(n.region.width()) == 1);
    if (n.is_leaf()) {
      CHECK(n.level == 7);
      CHECK(n.region.width() < 4);
    } else {
      const BptNode& l = t.node(n.left);
      const BptNode& r = t.node(n.right);
      CHECK(l.region.start == n.region.start);
      CHECK(l.region.end == r.region.start);
      CHECK(r.region.end == n.region.end);
      CHECK(l.region.width() == (n.region.width() + 1) / 2);
      CHECK(n.left > 0);
      CHECK(l.parent == r.parent);
    }
  }
}

TEST_CASE("tree extremes") {
  const BpTree one = BpTree::build(1);
  CHECK(one.leaf_count() == 360);
  for (const BptNode& n : one.nodes()) {
    if (n.is_leaf()) CHECK(n.region.width() == 1);
  }
  // the root is not narrower than 360, so it still splits once
  const BpTree wide = BpTree::build(360);
  CHECK(wide.size() == 3);
  CHECK(wide.leaf_count() == 2);
  CHECK(BpTree::build(361 - 180).size() == 3);
  CHECK_THROWS_AS(BpTree::build(0), Error);
  CHECK_THROWS_AS(BpTree::build(361), Error);
}

TEST_CASE("node labels") {
  AngleAnnotation a;
  CHECK(label_node(a, {0, 90}) == NodeLabel::kNegative);
  a = intervals({{10, 14}});
  CHECK(label_node(a, {0, 90}, 4) == NodeLabel::kPositive);
  CHECK(label_node(a, {0, 90}, 5) == NodeLabel::kNegative);
  a = intervals({{0, 3}});
  CHECK(label_node(a, {0, 3}, 4) == NodeLabel::kNegative);
  CHECK(fa_fraction(a, {0, 6}) == 0.5);
}

TEST_CASE("annotation construction") {
  const AngleAnnotation a = intervals({{100, 140}, {130, 150}});
  CHECK(a.total() == 50);
  CHECK(AngleAnnotation::from_labels(labels_of(a)).labels == a.labels);
  CHECK_THROWS_AS(AngleAnnotation::from_labels(std::vector<int>(359)), Error);
  CHECK_THROWS_AS(intervals({{10, 5}}), Error);
  CHECK_THROWS_AS(intervals({{350, 361}}), Error);
}

TEST_CASE("path enumeration") {
  const BpTree tree = BpTree::build(4);
  SUBCASE("all negative gives the root alone") {
    const auto paths = enumerate_paths(tree.labeled(AngleAnnotation{}));
    REQUIRE(paths.size() == 1);
    CHECK(paths[0] == BptPath{0});
  }
  SUBCASE("all positive gives one path per structural leaf") {
    std::vector<int> all(kAngles, 1);
    const auto paths = enumerate_paths(tree.labeled(AngleAnnotation::from_labels(all)));
    CHECK(paths.size() == 128);
    for (const BptPath& p : paths) CHECK(p.size() == 8);
  }
  SUBCASE("paths stop at the first negative node") {
    const AngleAnnotation a = intervals({{10, 40}});
    const BpTree labeled = tree.labeled(a);
    const auto paths = enumerate_paths(labeled);
    for (const BptPath& p : paths) {
      CHECK(p.front() == 0);
      for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        CHECK(labeled.node(p[i]).label == NodeLabel::kPositive);
        CHECK(labeled.node(p[i + 1]).parent == p[i]);
      }
      const BptNode& last = labeled.node(p.back());
      CHECK((last.label == NodeLabel::kNegative || last.is_leaf()));
      if (a.count(last.region) == 0) CHECK(a.count(labeled.node(last.parent).region) >= 4);
    }
  }
}

TEST_CASE("path sampling is uniform and seeded") {
  std::vector<BptPath> single = {{0}};
  CHECK(sample_path(single, 3) == BptPath{0});
  std::vector<BptPath> none;
  CHECK_THROWS_AS(sample_path(none, 3), Error);

  std::vector<int> all(kAngles, 1);
  const auto paths = enumerate_paths(BpTree::build(4).labeled(AngleAnnotation::from_labels(all)));
  Rng rng(42);
  std::map<const BptPath*, int> hits;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++hits[&sample_path(paths, rng)];
  const double expected = static_cast<double>(draws) / paths.size();
  double chi2 = 0.0;
  for (const BptPath& p : paths) chi2 += (hits[&p] - expected) * (hits[&p] - expected) / expected;
  // 127 degrees of freedom: mean 127, sd ~16
  CHECK(chi2 < 127.0 + 4.0 * 16.0);

  Rng r1(9), r2(9);
  for (int i = 0; i < 20; ++i) CHECK(&sample_path(paths, r1) == &sample_path(paths, r2));
}

TEST_CASE("inference search with constant classifiers") {
  const BpTree tree = BpTree::build(4);
  const SearchResult zero = inference_search(tree, constant_classifier(0.0));
  CHECK(zero.visited == 1);
  for (double c : zero.confidence) CHECK(c == 0.0);
  const SearchResult one = inference_search(tree, constant_classifier(1.0));
  CHECK(one.visited == tree.size());
  for (double c : one.confidence) CHECK(c == 1.0);
  CHECK_THROWS_AS(inference_search(tree, constant_classifier(1.5)), Error);
  CHECK_THROWS_AS(inference_search(tree, constant_classifier(NAN)), Error);
}

TEST_CASE("stop rule at the alpha boundary") {
  const BpTree tree = BpTree::build(4);
  // root: stop iff 1 - p > 1 - 4/360, i.e. p < 1/90
  CHECK(inference_search(tree, constant_classifier(1.0 / 90.0 - 1e-9)).visited == 1);
  CHECK(inference_search(tree, constant_classifier(1.0 / 90.0 + 1e-9)).visited > 1);
}

TEST_CASE("presence oracle reproduces a 30 degree annotation") {
  const BpTree tree = BpTree::build(4);
  const AngleAnnotation a = intervals({{100, 130}});
  const SearchResult r = inference_search(tree, presence_oracle(a));
  const std::vector<int> out = threshold_labels(r.confidence);
  int errors = 0;
  for (int d = 0; d < kAngles; ++d) errors += out[d] != a.labels[d];
  // only mixed leaves around the two interval ends may differ
  CHECK(errors <= 4);
  CHECK(r.visited < tree.size() / 4);
}

TEST_CASE("threshold labels") {
  CHECK(threshold_labels(std::vector<double>{0.49, 0.5, 0.9}) == std::vector<int>{0, 1, 1});
  CHECK(threshold_labels(std::vector<double>{0.3, 0.2}, 0.25) == std::vector<int>{1, 0});
}

TEST_CASE("noise suppression, isolated short runs") {
  std::vector<int> l(kAngles, 0);
  l[50] = 1;
  for (int v : suppress_noise(l)) CHECK(v == 0);

  std::vector<int> run(kAngles, 0);
  for (int d = 200; d < 230; ++d) run[d] = 1;
  CHECK(suppress_noise(run) == run);

  std::vector<int> pair(kAngles, 0);
  pair[10] = pair[11] = 1;
  pair[14] = pair[15] = 1;
  CHECK(suppress_noise(pair) == pair);

  std::vector<int> seam(kAngles, 0);
  seam[359] = seam[0] = 1;
  for (int v : suppress_noise(seam)) CHECK(v == 0);

  std::vector<int> all(kAngles, 1);
  CHECK(suppress_noise(all) == all);

  // a short run beside a long one is kept
  std::vector<int> near = run;
  near[233] = 1;
  CHECK(suppress_noise(near) == near);
}

TEST_CASE("noise suppression, isolated pairs") {
  std::vector<int> l(kAngles, 0);
  l[10] = l[13] = 1;
  for (int v : suppress_noise(l, 4, NoiseRule::kIsolatedPairs)) CHECK(v == 0);
  std::vector<int> far(kAngles, 0);
  far[10] = far[20] = 1;
  CHECK(suppress_noise(far, 4, NoiseRule::kIsolatedPairs) == far);
  std::vector<int> single(kAngles, 0);
  single[10] = 1;
  CHECK(suppress_noise(single, 4, NoiseRule::kIsolatedPairs) == single);
}
