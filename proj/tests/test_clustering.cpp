#include <algorithm>
#include <map>
#include <vector>

#include "doctest.h"
#include "fiatnet/clustering.hpp"
#include "support/oracles.hpp"

using namespace fiatnet;

namespace {

ClusterAssignment blocks(std::vector<int> sizes) {
  ClusterAssignment a;
  for (std::size_t c = 0; c < sizes.size(); ++c) a.cluster_of.insert(a.cluster_of.end(), sizes[c], static_cast<int>(c));
  a.centroids.resize(sizes.size());
  return a;
}

Image smooth_frame(double phase) {
  Image img(kAngles, kUnfoldedCols);
  for (int a = 0; a < kAngles; ++a) {
    for (int j = 0; j < kUnfoldedCols; ++j) img.at(a, j) = 0.5 + 0.3 * std::sin(0.05 * j + phase) * std::cos(0.02 * a);
  }
  return img;
}

}  // namespace

TEST_CASE("cosine distance") {
  CHECK(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{1, 0}) == 0.0);
  CHECK(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{0, 3}) == doctest::Approx(1.0));
  CHECK(cosine_distance(std::vector<double>{1, 1}, std::vector<double>{-2, -2}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(cosine_distance(std::vector<double>{0, 0}, std::vector<double>{1, 0}), Error);
  CHECK_THROWS_AS(cosine_distance(std::vector<double>{1}, std::vector<double>{1, 0}), Error);
}

TEST_CASE("agglomerative clustering worked examples") {
  const std::vector<std::vector<double>> one = {{0.3, 0.4}};
  CHECK(agglomerate(one, 0.3).count() == 1);

  const std::vector<std::vector<double>> v = {{1, 0}, {1, 0}, {0, 1}};
  const ClusterAssignment a = agglomerate(v, 0.5);
  CHECK(a.count() == 2);
  CHECK(a.cluster_of == std::vector<int>{0, 0, 1});
  CHECK(agglomerate(v, 2.0).count() == 1);
  CHECK(agglomerate(v, 0.0).count() == 2);

  const Dendrogram d = build_dendrogram(v);
  REQUIRE(d.merges.size() == 2);
  CHECK(d.merges[0].a == 0);
  CHECK(d.merges[0].b == 1);
  CHECK(d.merges[0].distance == 0.0);
  CHECK(d.merges[1].distance == doctest::Approx(1.0));
  CHECK(d.merges[1].size == 3);
  CHECK(d.monotone());

  CHECK_THROWS_AS(agglomerate(v, 2.5), Error);
  const std::vector<std::vector<double>> zero = {{1, 0}, {0, 0}};
  CHECK_THROWS_AS(build_dendrogram(zero), Error);
}

TEST_CASE("clusters of separated directions") {
  Rng rng(3);
  std::vector<std::vector<double>> v;
  std::vector<int> truth;
  for (int i = 0; i < 30; ++i) {
    const int c = i % 3;
    std::vector<double> x(3, 0.0);
    x[c] = 1.0;
    for (double& e : x) e += 0.05 * uniform01(rng);
    v.push_back(x);
    truth.push_back(c);
  }
  const ClusterAssignment a = agglomerate(v, 0.3);
  CHECK(a.count() == 3);
  CHECK(cluster_purity(a.cluster_of, truth) == 1.0);
  // clusters are numbered by their smallest frame index
  CHECK(a.cluster_of[0] == 0);
  CHECK(a.cluster_of[1] == 1);
  CHECK(a.cluster_of[2] == 2);
}

TEST_CASE("cluster purity") {
  CHECK(cluster_purity(std::vector<int>{0, 0, 1, 1}, std::vector<int>{5, 5, 5, 6}) == 0.75);
  CHECK(cluster_purity(std::vector<int>{0, 0, 0}, std::vector<int>{1, 2, 3}) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(cluster_purity(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST_CASE("stratified batches") {
  SUBCASE("four equal clusters give two frames each") {
    const auto batches = stratified_batches(blocks({100, 100, 100, 100}), 8, 1000, 5);
    for (const auto& b : batches) {
      std::vector<int> per(4, 0);
      for (int i : b) ++per[i / 100];
      CHECK(per == std::vector<int>{2, 2, 2, 2});
    }
  }
  SUBCASE("three clusters give a rotating (3,3,2) split") {
    const auto batches = stratified_batches(blocks({50, 60, 70}), 8, 30, 5);
    std::vector<int> short_cluster_hits(3, 0);
    for (const auto& b : batches) {
      std::vector<int> per(3, 0);
      for (int i : b) ++per[i < 50 ? 0 : i < 110 ? 1 : 2];
      std::vector<int> sorted = per;
      std::sort(sorted.begin(), sorted.end());
      CHECK(sorted == std::vector<int>{2, 3, 3});
      for (int c = 0; c < 3; ++c) short_cluster_hits[c] += per[c] == 2;
    }
    CHECK(short_cluster_hits == std::vector<int>{10, 10, 10});
  }
  SUBCASE("batch size 9 over three clusters") {
    for (const auto& b : stratified_batches(blocks({100, 100, 100}), 9, 50, 1)) {
      std::vector<int> per(3, 0);
      for (int i : b) ++per[i / 100];
      CHECK(per == std::vector<int>{3, 3, 3});
    }
  }
  SUBCASE("one cluster covers frames uniformly") {
    const auto batches = stratified_batches(blocks({40}), 8, 500, 2);
    std::vector<int> hits(40, 0);
    for (const auto& b : batches) {
      CHECK(b.size() == 8);
      for (int i : b) ++hits[i];
    }
    // each reshuffled pass uses every frame once: 4000 draws over 40 frames
    for (int h : hits) CHECK(h == 100);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(stratified_batches(blocks({5, 5, 5}), 2, 1, 1), Error);
    CHECK(stratified_batches(blocks({5, 5}), 4, 3, 9) == stratified_batches(blocks({5, 5}), 4, 3, 9));
  }
}

TEST_CASE("autoencoder embedding") {
  const Autoencoder ae = Autoencoder::init(16, 4);
  const Image f = smooth_frame(0.3);
  const std::vector<double> e1 = embed(ae, f);
  const std::vector<double> e2 = embed(ae, f);
  CHECK(e1.size() == 16);
  CHECK(e1 == e2);
  CHECK(cosine_distance(e1, embed(ae, Image(f))) == 0.0);
  const nn::Var r = ae_reconstruct(ae, f);
  CHECK(r->value.shape == std::vector<int>{1, kAngles, kUnfoldedCols});
}

TEST_CASE("autoencoder training") {
  const std::vector<Image> same(4, smooth_frame(0.0));
  AutoencoderConfig cfg;
  cfg.latent = 8;
  cfg.epochs = 40;
  cfg.batch_size = 4;
  cfg.lr = 3e-3;
  cfg.seed = 1;
  std::vector<AutoencoderEpoch> log;
  train_autoencoder(same, cfg, [&](const AutoencoderEpoch& e) { log.push_back(e); });
  REQUIRE(log.size() == 40);
  CHECK(log.back().reconstruction < 0.01);
  CHECK(log.back().reconstruction < log.front().reconstruction);

  SUBCASE("zero lambda reports the pure reconstruction loss") {
    cfg.lambda = 0.0;
    cfg.epochs = 2;
    train_autoencoder(same, cfg, [&](const AutoencoderEpoch& e) { CHECK(e.loss == e.reconstruction); });
  }
  SUBCASE("a heavy penalty shrinks the weights") {
    cfg.epochs = 5;
    cfg.lambda = 0.0;
    const Autoencoder free = train_autoencoder(same, cfg);
    cfg.lambda = 1e6;
    const Autoencoder tight = train_autoencoder(same, cfg);
    double n_free = 0.0, n_tight = 0.0;
    for (const nn::Var& w : free.regularized()) {
      for (double v : w->value.data) n_free += v * v;
    }
    for (const nn::Var& w : tight.regularized()) {
      for (double v : w->value.data) n_tight += v * v;
    }
    CHECK(n_tight < n_free);
  }
  CHECK_THROWS_AS(train_autoencoder(std::vector<Image>(1, smooth_frame(0.0)), cfg), Error);
}
