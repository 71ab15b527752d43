#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fiatnet/neural.hpp"
#include "support/attention_oracle.hpp"

using namespace fiatnet;
using nn::Tensor;
using nn::Var;

namespace {

Var mat_leaf(const oracle::Mat& m) {
  Tensor t({static_cast<int>(m.size()), static_cast<int>(m[0].size())});
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m[0].size(); ++j) t.data[i * m[0].size() + j] = m[i][j];
  }
  return nn::leaf(t);
}

oracle::Mat identity(int c) {
  oracle::Mat m(c, oracle::Vec(c, 0.0));
  for (int i = 0; i < c; ++i) m[i][i] = 1.0;
  return m;
}

oracle::Mat weights_of(const Var& w) { return oracle::to_mat(w->value); }

ModalityImages random_images(std::uint64_t seed) {
  ModalityImages images;
  for (int m = 0; m < kModalities; ++m) images[m] = oracle::random_image(kAngles, kUnfoldedCols, seed + m);
  return images;
}

}  // namespace

TEST_CASE("encoder shapes and zero input") {
  const FiatNet net = FiatNet::init({8, 2, true}, 1);
  const Var out = encode(net.encoders[kOF], nn::constant(Tensor({1, kUnfoldedCols, 45}, 0.0)));
  CHECK(out->value.shape == std::vector<int>{8, 16, 45});
  for (double v : out->value.data) CHECK(v == 0.0);

  const Image img = oracle::random_image(kAngles, kUnfoldedCols, 2);
  const Var x = nn::constant(region_tensor(img, {10, 55}));
  CHECK(encode(net.encoders[kGI], x)->value == encode(net.encoders[kGI], x)->value);
  CHECK(encode(net.encoders[kGI], nn::constant(region_tensor(img, {7, 8})))->value.shape == std::vector<int>{8, 16, 1});
  CHECK_THROWS_AS(encode(net.encoders[kOF], nn::constant(Tensor({2, 4, 4}))), Error);
}

TEST_CASE("region tensor puts the angle along the width") {
  const Image img = oracle::random_image(kAngles, kUnfoldedCols, 3);
  const Tensor t = region_tensor(img, {100, 104});
  CHECK(t.shape == std::vector<int>{1, kUnfoldedCols, 4});
  CHECK(t.data[5 * 4 + 2] == img.at(102, 5));
  CHECK_THROWS_AS(region_tensor(img, {350, 361}), Error);
}

TEST_CASE("pooling examples") {
  CHECK(nn::pool_mean(nn::constant(Tensor({3, 2, 5}, 0.7)))->value.data == std::vector<double>(3, 0.7));
  Tensor one({2, 3, 4}, 0.0);
  one.data[12 + 5] = 6.0;
  CHECK(nn::pool_mean(nn::constant(one))->value.data == std::vector<double>{0.0, 0.5});
  const Tensor t({2, 2, 2}, 0.0);
  Tensor v = t;
  v.data = {1, 2, 3, 4, -1, 0, 5, 8};
  CHECK(nn::pool_mean(nn::constant(v))->value.data == std::vector<double>{2.5, 3.0});
}

TEST_CASE("level self-attention") {
  SUBCASE("one level is the identity") {
    Rng rng(1);
    const Var f = nn::constant(oracle::random_tensor({4, 16, 9}, rng));
    const LevelAttentionParams p{mat_leaf(identity(4)), mat_leaf(identity(4))};
    const LevelAttentionOutput out = level_self_attention(std::span(&f, 1), p, 2);
    CHECK(out.maps[0]->value == f->value);
    CHECK(out.weights[0]->value.data == std::vector<double>{1.0, 1.0});
  }
  SUBCASE("zero Q and K average the resized maps") {
    Rng rng(2);
    std::vector<Var> maps;
    for (int w : {8, 4, 2}) maps.push_back(nn::constant(oracle::random_tensor({2, 3, w}, rng)));
    const oracle::Mat zero(2, oracle::Vec(2, 0.0));
    const LevelAttentionOutput out = level_self_attention(maps, {mat_leaf(zero), mat_leaf(zero)}, 1);
    for (int i = 0; i < 3; ++i) {
      for (double w : out.weights[i]->value.data) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
      const int h = maps[i]->value.dim(1), wd = maps[i]->value.dim(2);
      Tensor mean(maps[i]->value.shape, 0.0);
      for (const Var& m : maps) {
        const Tensor r = nn::resize_bilinear(m, h, wd)->value;
        for (std::size_t k = 0; k < r.size(); ++k) mean.data[k] += r.data[k] / 3.0;
      }
      CHECK(oracle::max_abs_diff(out.maps[i]->value, mean) < 1e-12);
    }
  }
  SUBCASE("hand-set 2-d features match the scalar oracle") {
    const oracle::Mat Q = {{0.5, -1.0}, {2.0, 0.25}};
    const oracle::Mat K = {{1.5, 0.0}, {-0.5, 1.0}};
    const std::vector<oracle::Vec> l = {{1.0, 2.0}, {-1.0, 0.5}, {0.3, -0.7}};
    std::vector<Var> maps;
    std::vector<Tensor> tensors;
    for (const auto& v : l) {
      Tensor t({2, 1, 1});
      t.data = v;
      tensors.push_back(t);
      maps.push_back(nn::constant(t));
    }
    const LevelAttentionOutput out = level_self_attention(maps, {mat_leaf(Q), mat_leaf(K)}, 1);
    for (int i = 0; i < 3; ++i) {
      const oracle::Mat w = oracle::level_weights(tensors, Q, K, 1, i);
      for (int j = 0; j < 3; ++j) CHECK(std::abs(weights_of(out.weights[i])[0][j] - w[0][j]) < 1e-12);
      for (int c = 0; c < 2; ++c) {
        double expect = 0.0;
        for (int j = 0; j < 3; ++j) expect += w[0][j] * l[j][c];
        CHECK(std::abs(out.maps[i]->value.data[c] - expect) < 1e-12);
      }
    }
  }
  SUBCASE("single requested level matches the full computation") {
    Rng rng(3);
    std::vector<Var> maps;
    for (int w : {12, 6, 3}) maps.push_back(nn::constant(oracle::random_tensor({4, 2, w}, rng)));
    const FiatNet net = FiatNet::init({4, 2, true}, 7);
    const LevelAttentionOutput all = level_self_attention(maps, net.level[0], 2);
    const LevelAttentionOutput last = level_self_attention(maps, net.level[0], 2, 2);
    REQUIRE(last.maps.size() == 1);
    CHECK(last.maps[0]->value == all.maps[2]->value);
  }
}

TEST_CASE("modality cross-attention") {
  SUBCASE("equal keys give uniform weights and the mean value map") {
    Rng rng(4);
    std::vector<Var> maps;
    std::vector<Tensor> tensors;
    const Tensor base = oracle::random_tensor({4, 2, 3}, rng);
    for (int m = 0; m < kModalities; ++m) {
      // same channel means, different spatial layout
      Tensor t = base;
      if (m % 2 == 1) {
        for (int c = 0; c < 4; ++c) std::reverse(t.data.begin() + c * 6, t.data.begin() + (c + 1) * 6);
      }
      tensors.push_back(t);
      maps.push_back(nn::constant(t));
    }
    const FiatNet net = FiatNet::init({4, 2, true}, 5);
    const CrossAttentionOutput out = modality_cross_attention(maps, net.cross, 2);
    for (double w : out.weights->value.data) CHECK(w == doctest::Approx(0.25).epsilon(1e-14));
    Tensor mean(base.shape, 0.0);
    for (const Tensor& t : tensors) {
      for (std::size_t k = 0; k < t.size(); ++k) mean.data[k] += t.data[k] / 4.0;
    }
    // W_v starts as the identity
    CHECK(oracle::max_abs_diff(out.map->value, mean) < 1e-12);
  }
  SUBCASE("saturated weights select the OF map") {
    std::vector<Var> maps;
    Tensor of({4, 1, 2}, 0.0);
    of.data = {1.0, 1.0, 0.2, -0.4, 0.0, 0.0, 0.1, 0.3};
    maps.push_back(nn::constant(of));
    for (int m = 1; m < kModalities; ++m) {
      Tensor t({4, 1, 2}, 0.0);
      t.data = {0.0, 0.0, 0.5 * m, 0.1, 0.3, -0.2 * m, 0.0, 0.4};
      maps.push_back(nn::constant(t));
    }
    oracle::Mat big = identity(4);
    big[0][0] = 2000.0;
    const ModalityAttentionParams p{mat_leaf(big), mat_leaf(identity(4)), mat_leaf(identity(4))};
    const CrossAttentionOutput out = modality_cross_attention(maps, p, 1);
    CHECK(out.weights->value.data[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(oracle::max_abs_diff(out.map->value, of) < 1e-12);
  }
  SUBCASE("random small tensors match the scalar oracle") {
    Rng rng(6);
    std::vector<Var> maps;
    std::vector<Tensor> tensors;
    for (int m = 0; m < kModalities; ++m) {
      tensors.push_back(oracle::random_tensor({4, 2, 3}, rng));
      maps.push_back(nn::constant(tensors.back()));
    }
    const Tensor wq = oracle::random_tensor({4, 4}, rng), wk = oracle::random_tensor({4, 4}, rng),
                 wv = oracle::random_tensor({4, 4}, rng);
    const ModalityAttentionParams p{nn::leaf(wq), nn::leaf(wk), nn::leaf(wv)};
    for (int heads : {1, 2, 4}) {
      oracle::Mat w;
      const Tensor expect =
          oracle::cross_attention(tensors, oracle::to_mat(wq), oracle::to_mat(wk), oracle::to_mat(wv), heads, &w);
      const CrossAttentionOutput out = modality_cross_attention(maps, p, heads);
      CHECK(oracle::max_abs_diff(out.map->value, expect) < 1e-12);
      for (int h = 0; h < heads; ++h) {
        for (int m = 0; m < kModalities; ++m) CHECK(std::abs(weights_of(out.weights)[h][m] - w[h][m]) < 1e-12);
      }
    }
  }
  SUBCASE("shape mismatch") {
    std::vector<Var> maps(4, nn::constant(Tensor({4, 2, 3})));
    maps[2] = nn::constant(Tensor({4, 2, 4}));
    const FiatNet net = FiatNet::init({4, 2, true}, 5);
    CHECK_THROWS_AS(modality_cross_attention(maps, net.cross, 2), Error);
  }
}

TEST_CASE("classification head and loss") {
  const Var fused = nn::constant(Tensor({2, 3, 4}, 0.5));
  const HeadParams zero{nn::leaf(Tensor({1, 2})), nn::leaf(Tensor({1}))};
  CHECK(classify(fused, zero)->value.data[0] == 0.5);
  HeadParams sat{nn::leaf(Tensor({1, 2})), nn::leaf(Tensor({1}, 50.0))};
  CHECK(classify(fused, sat)->value.data[0] == doctest::Approx(1.0).epsilon(1e-15));
  Tensor w({1, 2});
  w.data = {0.4, -1.2};
  const HeadParams small{nn::leaf(w), nn::leaf(Tensor({1}, 0.1))};
  CHECK(classify(fused, small)->value.data[0] == doctest::Approx(1.0 / (1.0 + std::exp(-(0.2 - 0.6 + 0.1)))));

  const std::vector<double> half = {0.5};
  CHECK(path_loss(nn::constant(Tensor({1}, 0.5)), half)->value.data[0] == doctest::Approx(std::log(2.0)));
  Tensor p({2});
  p.data = {0.9, 0.2};
  const std::vector<double> gt = {1.0, 0.0};
  CHECK(path_loss(nn::constant(p), gt)->value.data[0] == doctest::Approx(-std::log(0.9) - std::log(0.8)));
  CHECK(path_loss(nn::constant(p), gt)->value.data[0] == doctest::Approx(0.3285).epsilon(1e-4));
  Tensor exact({2});
  exact.data = {1.0, 0.0};
  CHECK(path_loss(nn::constant(exact), gt)->value.data[0] < 1e-6);
}

TEST_CASE("path predictions and targets") {
  const FiatNet net = FiatNet::init({4, 2, true}, 3);
  const ModalityImages images = random_images(30);
  const BpTree tree = BpTree::build(4);
  FeatureCache cache(images);
  const std::vector<int> path = {0, 1, 3, 7};
  const Var all = path_predictions(net, cache, tree, path);
  CHECK(all->value.shape == std::vector<int>{4});
  for (double v : all->value.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  const Var last = path_predictions(net, cache, tree, path, true);
  CHECK(last->value.data[0] == doctest::Approx(all->value.data[3]).epsilon(1e-14));

  const AngleAnnotation a = AngleAnnotation::from_intervals(std::vector<AngularRegion>{{0, 45}});
  CHECK(path_targets(tree, path, a) == std::vector<double>{0.125, 0.25, 0.5, 1.0});
}

TEST_CASE("whole-frame predictions") {
  const FiatNet net = FiatNet::init({4, 2, false}, 3);
  const Var p = frame_predictions(net, random_images(40));
  CHECK(p->value.shape == std::vector<int>{kAngles});
  const std::vector<double> conf = predict_confidence(net, random_images(40));
  CHECK(conf == p->value.data);
}

TEST_CASE("model parameters and freezing") {
  const FiatNet net = FiatNet::init({8, 4, true}, 9);
  const nn::ParamList params = net.parameters();
  CHECK(params.size() == 4 * 6 + 4 * 2 + 5);
  CHECK(params.front().first == "encoder.of.w1");
  CHECK(params.back().first == "head.b");
  for (const auto& [name, v] : params) CHECK(v->requires_grad);
  const FiatNet f = net.frozen();
  const nn::ParamList fp = f.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK_FALSE(fp[i].second->requires_grad);
    CHECK(fp[i].second->value == params[i].second->value);
  }
  CHECK(FiatNet::init({8, 4, true}, 9).parameters()[3].second->value == params[3].second->value);
  CHECK_THROWS_AS(FiatNet::init({6, 4, true}, 1), Error);
}

TEST_CASE("learning-rate schedule") {
  CHECK(nn::poly_lr(1e-4, 0, 100) == 1e-4);
  CHECK(nn::poly_lr(1e-4, 100, 100) == 0.0);
  CHECK(nn::poly_lr(1e-4, 50, 100) == doctest::Approx(1e-4 * std::pow(0.5, 0.9)));
}

TEST_CASE("training with zero learning rate leaves the weights unchanged") {
  std::vector<TrainingSample> samples(1);
  samples[0].images = random_images(50);
  samples[0].annotation = AngleAnnotation::from_intervals(std::vector<AngularRegion>{{30, 80}});
  const std::vector<int> clusters = {0};
  const ModelConfig mc{4, 2, true};
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 1;
  tc.lr0 = 0.0;
  tc.seed = 4;
  int entries = 0;
  const FiatNet trained = train(samples, clusters, mc, tc, [&](const TrainLogEntry& e) {
    ++entries;
    CHECK(std::isfinite(e.loss));
  });
  CHECK(entries == 1);
  const FiatNet initial = FiatNet::init(mc, derive_seed(tc.seed, 1));
  const nn::ParamList a = trained.parameters(), b = initial.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].second->value == b[i].second->value);

  tc.epochs = 0;
  CHECK_THROWS_AS(train(samples, clusters, mc, tc), Error);
  tc.epochs = 1;
  CHECK_THROWS_AS(train(samples, std::vector<int>{}, mc, tc), Error);
}

TEST_CASE("inference search over a model visits at most the tree") {
  const FiatNet net = FiatNet::init({4, 2, true}, 12);
  int visited = 0;
  const std::vector<double> conf = predict_confidence(net, random_images(60), 4, 4, &visited);
  CHECK(conf.size() == kAngles);
  CHECK(visited >= 1);
  CHECK(visited <= 255);
}
