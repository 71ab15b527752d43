#include "fiatnet/verify.hpp"

#include "fiatnet/neural.hpp"
#include "fiatnet/rng.hpp"

namespace fiatnet {
namespace {

using nn::Tensor;
using nn::Var;

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = scale * normal(rng);
  return t;
}

Var sum_all(std::vector<Var> scalars) {
  const Var joined = nn::concat(scalars);
  return nn::weighted_sum(joined, Tensor(joined->value.shape, 1.0));
}

GradCheckEntry run(std::string name, const std::function<Var()>& fn, const std::vector<Var>& wrt, double eps) {
  int count = 0;
  for (const Var& v : wrt) count += static_cast<int>(v->value.size());
  return {std::move(name), grad_check(fn, wrt, eps), count};
}

}  // namespace

std::vector<GradCheckEntry> standard_grad_checks(std::uint64_t seed, int channels, int levels, double eps) {
  Rng rng(derive_seed(seed, 0x6C));
  std::vector<GradCheckEntry> out;
  const int heads = channels % 4 == 0 ? 4 : 1;

  {
    const Var v = nn::leaf(random_tensor({5}, rng));
    const Var w = nn::leaf(random_tensor({5, 3}, rng));
    const Tensor r = random_tensor({3}, rng);
    out.push_back(run("linear", [&] { return nn::weighted_sum(nn::vecmat(v, w), r); }, {v, w}, eps));
  }
  {
    ModelConfig mc{channels, heads, true};
    const FiatNet net = FiatNet::init(mc, seed);
    const EncoderParams& e = net.encoders[kOF];
    // nonzero biases keep ReLU inputs away from the kink at zero
    for (const Var& b : {e.b1, e.b2, e.b3}) b->value = random_tensor(b->value.shape, rng, 0.1);
    const Var region = nn::leaf(random_tensor({1, 16, 7}, rng));
    const Tensor r = random_tensor({channels, 2, 7}, rng);
    out.push_back(run(
        "encode", [&] { return nn::weighted_sum(encode(e, region), r); }, {region, e.w1, e.b1, e.w2, e.b2, e.w3, e.b3},
        eps));
  }
  {
    std::vector<Var> maps;
    for (int i = 0; i < levels; ++i) maps.push_back(nn::leaf(random_tensor({channels, 2, 9 >> i}, rng)));
    LevelAttentionParams p{nn::leaf(random_tensor({channels, channels}, rng, 0.5)),
                           nn::leaf(random_tensor({channels, channels}, rng, 0.5))};
    std::vector<Tensor> r;
    for (const Var& f : maps) r.push_back(random_tensor(f->value.shape, rng));
    std::vector<Var> wrt = maps;
    wrt.push_back(p.q);
    wrt.push_back(p.k);
    out.push_back(run(
        "level_self_attention",
        [&] {
          const LevelAttentionOutput a = level_self_attention(maps, p, heads);
          std::vector<Var> parts;
          for (std::size_t i = 0; i < a.maps.size(); ++i) parts.push_back(nn::weighted_sum(a.maps[i], r[i]));
          return sum_all(parts);
        },
        wrt, eps));
  }
  {
    std::vector<Var> maps;
    for (int m = 0; m < kModalities; ++m) maps.push_back(nn::leaf(random_tensor({channels, 2, 5}, rng)));
    ModalityAttentionParams p{nn::leaf(random_tensor({channels, channels}, rng, 0.5)),
                              nn::leaf(random_tensor({channels, channels}, rng, 0.5)),
                              nn::leaf(random_tensor({channels, channels}, rng, 0.5))};
    const Tensor r = random_tensor({channels, 2, 5}, rng);
    std::vector<Var> wrt = maps;
    wrt.insert(wrt.end(), {p.wq, p.wk, p.wv});
    out.push_back(run(
        "modality_cross_attention", [&] { return nn::weighted_sum(modality_cross_attention(maps, p, heads).map, r); },
        wrt, eps));
  }
  {
    const Var fused = nn::leaf(random_tensor({channels, 2, 5}, rng));
    HeadParams head{nn::leaf(random_tensor({1, channels}, rng)), nn::leaf(random_tensor({1}, rng))};
    const Tensor r = random_tensor({1}, rng);
    out.push_back(
        run("classify", [&] { return nn::weighted_sum(classify(fused, head), r); }, {fused, head.w, head.b}, eps));
  }
  {
    const Var fused = nn::leaf(random_tensor({channels, 2, 6}, rng));
    const Var w = nn::leaf(random_tensor({1, channels}, rng));
    const Var b = nn::leaf(random_tensor({1}, rng));
    const Tensor r = random_tensor({6}, rng);
    out.push_back(run(
        "column_head", [&] { return nn::weighted_sum(nn::sigmoid(nn::column_linear(fused, w, b)), r); }, {fused, w, b},
        eps));
  }
  {
    const Var logits = nn::leaf(random_tensor({levels}, rng));
    std::vector<double> labels;
    for (int i = 0; i < levels; ++i) labels.push_back(uniform01(rng));
    out.push_back(run("path_loss", [&] { return path_loss(nn::sigmoid(logits), labels); }, {logits}, eps));
  }
  {
    ModelConfig mc{channels, heads, true};
    const FiatNet net = FiatNet::init(mc, derive_seed(seed, 1));
    ModalityImages images;
    for (Image& img : images) {
      img = Image(kAngles, kUnfoldedCols);
      for (double& v : img.px) v = uniform01(rng);
    }
    const BpTree tree = BpTree::build(4);
    std::vector<int> path{0};
    while (static_cast<int>(path.size()) < levels && !tree.node(path.back()).is_leaf()) {
      path.push_back(tree.node(path.back()).left);
    }
    std::vector<double> labels;
    for (std::size_t i = 0; i < path.size(); ++i) labels.push_back(uniform01(rng));
    // encoder outputs are fixed here: on full-size frames many ReLU inputs sit
    // within eps of zero, which central differences cannot resolve
    std::vector<Var> wrt;
    for (const auto& [name, v] : net.parameters()) {
      if (name.rfind("encoder.", 0) != 0) wrt.push_back(v);
    }
    FeatureCache cache(images);
    out.push_back(
        run("full_path", [&] { return path_loss(path_predictions(net, cache, tree, path), labels); }, wrt, eps));
  }
  return out;
}

}  // namespace fiatnet
