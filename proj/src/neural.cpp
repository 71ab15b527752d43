#include "fiatnet/neural.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "fiatnet/clustering.hpp"

namespace fiatnet {
namespace {

using nn::Tensor;
using nn::Var;

Var gaussian_leaf(std::vector<int> shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = stddev * normal(rng);
  return nn::leaf(std::move(t));
}

Var zeros_leaf(std::vector<int> shape) { return nn::leaf(Tensor(std::move(shape))); }

Var freeze(const Var& v) { return nn::constant(v->value); }

EncoderParams init_encoder(int channels, Rng& rng) {
  auto he = [](int fan_in) { return std::sqrt(2.0 / (9.0 * fan_in)); };
  return {gaussian_leaf({8, 1, 3, 3}, he(1), rng),          zeros_leaf({8}),
          gaussian_leaf({16, 8, 3, 3}, he(8), rng),         zeros_leaf({16}),
          gaussian_leaf({channels, 16, 3, 3}, he(16), rng), zeros_leaf({channels})};
}

void require_shape(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kShapeMismatch, what);
}

}  // namespace

std::string_view modality_name(int m) {
  static constexpr std::string_view kNames[kModalities] = {"of", "gi", "lgi", "bmi"};
  return (m >= 0 && m < kModalities) ? kNames[m] : "?";
}

FiatNet FiatNet::init(const ModelConfig& config, std::uint64_t seed) {
  if (config.channels < 1 || config.heads < 1 || config.channels % config.heads != 0) {
    throw Error(ErrorCode::kConfig, "channel count " + std::to_string(config.channels) +
                                        " must be a positive multiple of the head count " +
                                        std::to_string(config.heads));
  }
  const int c = config.channels;
  const double inv = 1.0 / std::sqrt(static_cast<double>(c));
  FiatNet net;
  net.config = config;
  Rng rng(derive_seed(seed, 0x4E4E));
  for (int m = 0; m < kModalities; ++m) net.encoders[m] = init_encoder(c, rng);
  for (int m = 0; m < kModalities; ++m) {
    net.level[m] = {gaussian_leaf({c, c}, inv, rng), gaussian_leaf({c, c}, inv, rng)};
  }
  Tensor identity({c, c});
  for (int i = 0; i < c; ++i) identity.data[static_cast<std::size_t>(i) * c + i] = 1.0;
  net.cross = {gaussian_leaf({c, c}, inv, rng), gaussian_leaf({c, c}, inv, rng), nn::leaf(identity)};
  net.head = {gaussian_leaf({1, c}, 0.1 * inv, rng), zeros_leaf({1})};
  return net;
}

nn::ParamList FiatNet::parameters() const {
  nn::ParamList out;
  for (int m = 0; m < kModalities; ++m) {
    const std::string p = "encoder." + std::string(modality_name(m)) + ".";
    const EncoderParams& e = encoders[m];
    out.insert(
        out.end(),
        {{p + "w1", e.w1}, {p + "b1", e.b1}, {p + "w2", e.w2}, {p + "b2", e.b2}, {p + "w3", e.w3}, {p + "b3", e.b3}});
  }
  for (int m = 0; m < kModalities; ++m) {
    const std::string p = "level." + std::string(modality_name(m)) + ".";
    out.emplace_back(p + "q", level[m].q);
    out.emplace_back(p + "k", level[m].k);
  }
  out.insert(
      out.end(),
      {{"cross.wq", cross.wq}, {"cross.wk", cross.wk}, {"cross.wv", cross.wv}, {"head.w", head.w}, {"head.b", head.b}});
  return out;
}

FiatNet FiatNet::frozen() const {
  FiatNet f;
  f.config = config;
  for (int m = 0; m < kModalities; ++m) {
    const EncoderParams& e = encoders[m];
    f.encoders[m] = {freeze(e.w1), freeze(e.b1), freeze(e.w2), freeze(e.b2), freeze(e.w3), freeze(e.b3)};
    f.level[m] = {freeze(level[m].q), freeze(level[m].k)};
  }
  f.cross = {freeze(cross.wq), freeze(cross.wk), freeze(cross.wv)};
  f.head = {freeze(head.w), freeze(head.b)};
  return f;
}

Tensor region_tensor(const Image& image, AngularRegion region) {
  require_shape(image.rows == kAngles && region.start >= 0 && region.end <= kAngles && region.width() >= 1,
                "region outside the angular axis of a 360-row image");
  const int w = region.width();
  Tensor t({1, image.cols, w});
  for (int a = 0; a < w; ++a) {
    const auto row = image.row(region.start + a);
    for (int r = 0; r < image.cols; ++r) t.data[static_cast<std::size_t>(r) * w + a] = row[r];
  }
  return t;
}

Var encode(const EncoderParams& p, const Var& region) {
  const Tensor& x = region->value;
  if (!(x.rank() == 3 && x.dim(0) == 1 && x.dim(1) >= 1 && x.dim(2) >= 1))
    require_shape(false, "encoder expects a [1,H,W] region, got " + nn::shape_string(x.shape));
  Var h = nn::relu(nn::conv3x3(region, p.w1, p.b1, 2, 1));
  h = nn::relu(nn::conv3x3(h, p.w2, p.b2, 2, 1));
  return nn::relu(nn::conv3x3(h, p.w3, p.b3, 2, 1));
}

LevelAttentionOutput level_self_attention(std::span<const Var> features, const LevelAttentionParams& p, int heads,
                                          int only) {
  const int m = static_cast<int>(features.size());
  require_shape(m >= 1, "self-attention needs at least one level");
  require_shape(only < m, "requested level outside the path");
  const Tensor& f0 = features[0]->value;
  require_shape(f0.rank() == 3, "feature maps must be [C,H,W]");
  for (const Var& f : features) {
    if (!(f->value.rank() == 3 && f->value.dim(0) == f0.dim(0) && f->value.dim(1) == f0.dim(1)))
      require_shape(false, "feature maps differ in C or H: " + nn::shape_string(f->value.shape) + " vs " +
                               nn::shape_string(f0.shape));
  }
  std::vector<Var> keys;
  std::vector<Var> queries;
  for (const Var& f : features) {
    const Var l = nn::pool_mean(f);
    queries.push_back(nn::vecmat(l, p.q));
    keys.push_back(nn::vecmat(l, p.k));
  }
  LevelAttentionOutput out;
  for (int i = only < 0 ? 0 : only; i < (only < 0 ? m : only + 1); ++i) {
    const Var w = nn::softmax_rows(nn::head_scores(queries[i], keys, heads, 1.0));
    const int h = features[i]->value.dim(1);
    const int width = features[i]->value.dim(2);
    out.maps.push_back(nn::mix_resized(w, features, heads, h, width));
    out.weights.push_back(w);
  }
  return out;
}

CrossAttentionOutput modality_cross_attention(std::span<const Var> maps, const ModalityAttentionParams& p, int heads) {
  require_shape(maps.size() == kModalities, "cross-attention expects one map per modality");
  const Tensor& ref = maps[kOF]->value;
  for (const Var& f : maps) {
    if (!(f->value.shape == ref.shape))
      require_shape(false, "modality maps differ in shape: " + nn::shape_string(f->value.shape) + " vs " +
                               nn::shape_string(ref.shape));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(ref.dim(0)));
  const Var query = nn::vecmat(nn::pool_mean(maps[kOF]), p.wq);
  std::vector<Var> keys;
  std::vector<Var> values;
  for (const Var& f : maps) {
    keys.push_back(nn::vecmat(nn::pool_mean(f), p.wk));
    values.push_back(nn::conv1x1(f, p.wv));
  }
  const Var w = nn::softmax_rows(nn::head_scores(query, keys, heads, scale));
  return {nn::mix_heads(w, values, heads), w};
}

Var classify(const Var& fused, const HeadParams& head) {
  return nn::sigmoid(nn::linear(nn::pool_mean(fused), head.w, head.b));
}

Var path_loss(const Var& predictions, std::span<const double> labels) { return nn::bce(predictions, labels, false); }

Var FeatureCache::get(const FiatNet& model, const BpTree& tree, int node, int modality) {
  if (cache_.size() != static_cast<std::size_t>(tree.size())) cache_.assign(tree.size(), {});
  Var& slot = cache_[node][modality];
  if (!slot) {
    const Var region = nn::constant(region_tensor((*images_)[modality], tree.node(node).region));
    slot = encode(model.encoders[modality], region);
  }
  return slot;
}

Var path_predictions(const FiatNet& model, FeatureCache& features, const BpTree& tree, std::span<const int> path,
                     bool last_only) {
  require_shape(!path.empty(), "empty path");
  const int heads = model.config.heads;
  const int only = last_only ? static_cast<int>(path.size()) - 1 : -1;
  std::array<LevelAttentionOutput, kModalities> attended;
  for (int m = 0; m < kModalities; ++m) {
    std::vector<Var> maps;
    for (int node : path) maps.push_back(features.get(model, tree, node, m));
    attended[m] = level_self_attention(maps, model.level[m], heads, only);
  }
  std::vector<Var> preds;
  for (std::size_t i = 0; i < attended[0].maps.size(); ++i) {
    const std::array<Var, kModalities> per_level{attended[0].maps[i], attended[1].maps[i], attended[2].maps[i],
                                                 attended[3].maps[i]};
    preds.push_back(classify(modality_cross_attention(per_level, model.cross, heads).map, model.head));
  }
  return nn::concat(preds);
}

Var frame_predictions(const FiatNet& model, const ModalityImages& images) {
  std::array<Var, kModalities> maps;
  for (int m = 0; m < kModalities; ++m) {
    const Var f = encode(model.encoders[m], nn::constant(region_tensor(images[m], {0, kAngles})));
    maps[m] = level_self_attention(std::span(&f, 1), model.level[m], model.config.heads).maps[0];
  }
  const Var fused = modality_cross_attention(maps, model.cross, model.config.heads).map;
  return nn::sigmoid(nn::column_linear(fused, model.head.w, model.head.b));
}

std::vector<double> path_targets(const BpTree& tree, std::span<const int> path, const AngleAnnotation& annotation) {
  std::vector<double> t;
  t.reserve(path.size());
  for (int node : path) t.push_back(fa_fraction(annotation, tree.node(node).region));
  return t;
}

FiatNet train(std::span<const TrainingSample> samples, std::span<const int> cluster_of, const ModelConfig& model,
              const TrainConfig& config, const std::function<void(const TrainLogEntry&)>& log) {
  if (samples.empty()) throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  if (config.epochs < 1) throw Error(ErrorCode::kConfig, "epochs must be at least 1");
  if (config.batch_size < 1) throw Error(ErrorCode::kConfig, "batch size must be at least 1");
  if (cluster_of.size() != samples.size()) {
    throw Error(ErrorCode::kLengthMismatch, "cluster assignment does not cover the training set");
  }

  FiatNet net = FiatNet::init(model, derive_seed(config.seed, 1));
  nn::Optimizer optimizer(net.parameters(), config.optimizer);

  ClusterAssignment assignment;
  assignment.cluster_of.assign(cluster_of.begin(), cluster_of.end());
  int clusters = 0;
  for (int c : cluster_of) clusters = std::max(clusters, c + 1);
  assignment.centroids.resize(static_cast<std::size_t>(clusters));
  BatchSampler sampler(assignment, config.batch_size, derive_seed(config.seed, 2));

  const BpTree tree = BpTree::build(config.min_width);
  std::vector<std::vector<BptPath>> paths;
  if (model.partition) {
    for (const TrainingSample& s : samples) paths.push_back(enumerate_paths(tree.labeled(s.annotation, config.alpha)));
  }
  Rng path_rng(derive_seed(config.seed, 3));

  const long per_epoch = (static_cast<long>(samples.size()) + config.batch_size - 1) / config.batch_size;
  const long total = per_epoch * config.epochs;
  long t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (long it = 0; it < per_epoch; ++it, ++t) {
      const std::vector<int> batch = sampler.next();
      const double lr = nn::poly_lr(config.lr0, t, total, config.poly_power);
      const double weight = 1.0 / static_cast<double>(batch.size());
      double loss_sum = 0.0;
      for (int idx : batch) {
        const TrainingSample& s = samples[idx];
        Var loss;
        if (model.partition) {
          const BptPath& path = sample_path(paths[idx], path_rng);
          FeatureCache cache(s.images);
          loss = path_loss(path_predictions(net, cache, tree, path), path_targets(tree, path, s.annotation));
        } else {
          const std::vector<double> target(s.annotation.labels.begin(), s.annotation.labels.end());
          loss = nn::bce(frame_predictions(net, s.images), target, true);
        }
        const double value = loss->value.data[0];
        if (!std::isfinite(value)) {
          throw Error(ErrorCode::kDivergenceDetected,
                      "non-finite loss at epoch " + std::to_string(epoch) + ", iteration " + std::to_string(t));
        }
        nn::backward(loss, weight);
        loss_sum += value;
      }
      optimizer.step(lr);
      if (log) log({epoch, t, loss_sum * weight, lr});
    }
    spdlog::debug("epoch {} done", epoch);
  }
  return net;
}

std::vector<double> predict_confidence(const FiatNet& model, const ModalityImages& images, int alpha, int min_width,
                                       int* visited) {
  const FiatNet net = model.frozen();
  if (!net.config.partition) {
    const Var p = frame_predictions(net, images);
    if (visited) *visited = 1;
    return p->value.data;
  }
  const BpTree tree = BpTree::build(min_width);
  FeatureCache cache(images);
  const RegionClassifier classifier = [&](const BpTree& t, std::span<const int> path) {
    return path_predictions(net, cache, t, path, true)->value.data[0];
  };
  SearchResult result = inference_search(tree, classifier, alpha);
  if (visited) *visited = result.visited;
  return std::move(result.confidence);
}

double grad_check(const std::function<Var()>& scalar_fn, std::span<const Var> wrt, double eps) {
  for (const Var& v : wrt) v->grad = Tensor();
  nn::backward(scalar_fn());
  double worst = 0.0;
  for (const Var& v : wrt) {
    const Tensor analytic = v->grad.size() == v->value.size() ? v->grad : Tensor(v->value.shape);
    for (std::size_t i = 0; i < v->value.size(); ++i) {
      const double original = v->value.data[i];
      v->value.data[i] = original + eps;
      const double up = scalar_fn()->value.data[0];
      v->value.data[i] = original - eps;
      const double down = scalar_fn()->value.data[0];
      v->value.data[i] = original;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic.data[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  for (const Var& v : wrt) v->grad = Tensor();
  return worst;
}

}  // namespace fiatnet
