#include "fiatnet/clustering.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace fiatnet {
namespace {

using nn::Tensor;
using nn::Var;

constexpr int kBottleneckCh = 32;
constexpr int kBottleneckH = 45;
constexpr int kBottleneckW = 16;

Var gaussian_leaf(std::vector<int> shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = stddev * normal(rng);
  return nn::leaf(std::move(t));
}

Var zeros_leaf(std::vector<int> shape) { return nn::leaf(Tensor(std::move(shape))); }

Var freeze(const Var& v) { return nn::constant(v->value); }

Tensor frame_tensor(const Image& frame) {
  if (frame.rows != kAngles || frame.cols != kUnfoldedCols) {
    throw Error(ErrorCode::kShapeMismatch, "autoencoder expects 360x128 frames, got " + std::to_string(frame.rows) +
                                               "x" + std::to_string(frame.cols));
  }
  Tensor t({1, frame.rows, frame.cols});
  t.data = frame.px;
  return t;
}

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

}  // namespace

Autoencoder Autoencoder::init(int latent, std::uint64_t seed) {
  if (latent < 1) throw Error(ErrorCode::kConfig, "latent size must be positive");
  Rng rng(derive_seed(seed, 0xAE));
  auto he = [](int fan_in) { return std::sqrt(2.0 / fan_in); };
  const int bottleneck = kBottleneckCh * kBottleneckH * kBottleneckW;
  Autoencoder ae;
  ae.latent = latent;
  ae.ew1 = gaussian_leaf({8, 1, 3, 3}, he(9), rng);
  ae.eb1 = zeros_leaf({8});
  ae.ew2 = gaussian_leaf({16, 8, 3, 3}, he(72), rng);
  ae.eb2 = zeros_leaf({16});
  ae.ew3 = gaussian_leaf({32, 16, 3, 3}, he(144), rng);
  ae.eb3 = zeros_leaf({32});
  ae.ewl = gaussian_leaf({latent, kBottleneckCh}, std::sqrt(1.0 / kBottleneckCh), rng);
  ae.ebl = zeros_leaf({latent});
  ae.dwl = gaussian_leaf({bottleneck, latent}, std::sqrt(1.0 / latent), rng);
  ae.dbl = zeros_leaf({bottleneck});
  ae.dw3 = gaussian_leaf({32, 16, 3, 3}, he(72), rng);
  ae.db3 = zeros_leaf({16});
  ae.dw2 = gaussian_leaf({16, 8, 3, 3}, he(36), rng);
  ae.db2 = zeros_leaf({8});
  ae.dw1 = gaussian_leaf({8, 1, 3, 3}, std::sqrt(1.0 / 18.0), rng);
  ae.db1 = zeros_leaf({1});
  return ae;
}

nn::ParamList Autoencoder::parameters() const {
  return {{"encoder.w1", ew1}, {"encoder.b1", eb1}, {"encoder.w2", ew2}, {"encoder.b2", eb2},
          {"encoder.w3", ew3}, {"encoder.b3", eb3}, {"encoder.wl", ewl}, {"encoder.bl", ebl},
          {"decoder.wl", dwl}, {"decoder.bl", dbl}, {"decoder.w3", dw3}, {"decoder.b3", db3},
          {"decoder.w2", dw2}, {"decoder.b2", db2}, {"decoder.w1", dw1}, {"decoder.b1", db1}};
}

std::vector<Var> Autoencoder::regularized() const { return {ew1, ew2, ew3, ewl, dwl, dw3, dw2, dw1}; }

Autoencoder Autoencoder::frozen() const {
  Autoencoder f;
  f.latent = latent;
  Var* dst[] = {&f.ew1, &f.eb1, &f.ew2, &f.eb2, &f.ew3, &f.eb3, &f.ewl, &f.ebl,
                &f.dwl, &f.dbl, &f.dw3, &f.db3, &f.dw2, &f.db2, &f.dw1, &f.db1};
  const nn::ParamList src = parameters();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = freeze(src[i].second);
  return f;
}

Var ae_encode(const Autoencoder& ae, const Image& frame) {
  Var h = nn::constant(frame_tensor(frame));
  h = nn::relu(nn::conv3x3(h, ae.ew1, ae.eb1, 2, 2));
  h = nn::relu(nn::conv3x3(h, ae.ew2, ae.eb2, 2, 2));
  h = nn::relu(nn::conv3x3(h, ae.ew3, ae.eb3, 2, 2));
  return nn::linear(nn::pool_mean(h), ae.ewl, ae.ebl);
}

Var ae_reconstruct(const Autoencoder& ae, const Image& frame) {
  Var h = nn::relu(nn::linear(ae_encode(ae, frame), ae.dwl, ae.dbl));
  h = nn::reshape(h, {kBottleneckCh, kBottleneckH, kBottleneckW});
  h = nn::relu(nn::conv_transpose3x3(h, ae.dw3, ae.db3, 90, 32, 2, 2));
  h = nn::relu(nn::conv_transpose3x3(h, ae.dw2, ae.db2, 180, 64, 2, 2));
  return nn::conv_transpose3x3(h, ae.dw1, ae.db1, kAngles, kUnfoldedCols, 2, 2);
}

Autoencoder train_autoencoder(std::span<const Image> frames, const AutoencoderConfig& config,
                              const std::function<void(const AutoencoderEpoch&)>& log) {
  if (frames.size() < 2) throw Error(ErrorCode::kEmptyDataset, "autoencoder training needs at least two frames");
  if (!(config.lambda >= 0.0)) throw Error(ErrorCode::kConfig, "lambda must be non-negative");
  if (config.epochs < 0 || config.batch_size < 1) throw Error(ErrorCode::kConfig, "bad epoch or batch setting");

  Autoencoder ae = Autoencoder::init(config.latent, config.seed);
  nn::Optimizer optimizer(ae.parameters(), config.optimizer);
  const std::vector<Var> weights = ae.regularized();
  std::vector<Tensor> targets;
  targets.reserve(frames.size());
  for (const Image& f : frames) targets.push_back(frame_tensor(f));

  std::vector<int> order(frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(derive_seed(config.seed, 0xBA7C));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    double recon_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Var loss = nn::mse(ae_reconstruct(ae, frames[order[k]]), targets[order[k]]);
        if (!std::isfinite(loss->value.data[0])) {
          throw Error(ErrorCode::kDivergenceDetected, "autoencoder loss became non-finite");
        }
        nn::backward(loss, weight);
        recon_sum += loss->value.data[0];
      }
      if (config.lambda > 0.0) nn::backward(nn::sum_squares(weights), config.lambda);
      optimizer.step(config.lr);
    }
    if (log) {
      double reg = 0.0;
      for (const Var& w : weights) {
        for (double v : w->value.data) reg += v * v;
      }
      const double recon = recon_sum / static_cast<double>(frames.size());
      log({epoch, recon, recon + config.lambda * reg});
    }
  }
  return ae;
}

std::vector<double> embed(const Autoencoder& ae, const Image& frame) {
  return ae_encode(ae.frozen(), frame)->value.data;
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorCode::kLengthMismatch, "vectors differ in dimension");
  const double nu = std::sqrt(dot(u, u));
  const double nv = std::sqrt(dot(v, v));
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::kZeroVector, "cosine distance of a zero vector");
  return std::clamp(1.0 - dot(u, v) / (nu * nv), 0.0, 2.0);
}

bool Dendrogram::monotone() const {
  for (std::size_t k = 1; k < merges.size(); ++k) {
    if (merges[k].distance < merges[k - 1].distance) return false;
  }
  return true;
}

Dendrogram build_dendrogram(std::span<const std::vector<double>> vectors) {
  const int n = static_cast<int>(vectors.size());
  if (n < 1) throw Error(ErrorCode::kEmptyDataset, "nothing to cluster");
  for (const auto& v : vectors) {
    if (v.size() != vectors[0].size()) throw Error(ErrorCode::kLengthMismatch, "vectors differ in dimension");
    if (dot(v, v) == 0.0) throw Error(ErrorCode::kZeroVector, "zero embedding vector");
  }
  const int ids = 2 * n - 1;
  std::vector<std::vector<double>> centroid(ids);
  std::vector<int> size(ids, 0);
  std::vector<double> dist(static_cast<std::size_t>(ids) * ids, 0.0);
  auto d = [&](int a, int b) -> double& { return dist[static_cast<std::size_t>(a) * ids + b]; };

  std::vector<int> active(n);
  for (int i = 0; i < n; ++i) {
    active[i] = i;
    centroid[i] = vectors[i];
    size[i] = 1;
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) d(a, b) = d(b, a) = cosine_distance(centroid[a], centroid[b]);
  }

  Dendrogram out;
  out.leaves = n;
  for (int next = n; next < ids; ++next) {
    // active stays sorted by id, so the first strict minimum is the lowest pair
    int best_a = -1;
    int best_b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double v = d(active[i], active[j]);
        if (v < best) {
          best = v;
          best_a = active[i];
          best_b = active[j];
        }
      }
    }
    const int sa = size[best_a];
    const int sb = size[best_b];
    std::vector<double> c(centroid[best_a].size());
    for (std::size_t k = 0; k < c.size(); ++k) {
      c[k] = (sa * centroid[best_a][k] + sb * centroid[best_b][k]) / (sa + sb);
    }
    centroid[next] = std::move(c);
    size[next] = sa + sb;
    out.merges.push_back({best_a, best_b, best, sa + sb});
    std::erase(active, best_a);
    std::erase(active, best_b);
    for (int other : active) d(other, next) = d(next, other) = cosine_distance(centroid[other], centroid[next]);
    active.push_back(next);
  }
  if (!out.monotone()) spdlog::warn("centroid linkage produced a non-monotone dendrogram; cutting at first crossing");
  return out;
}

ClusterAssignment cut_dendrogram(const Dendrogram& dendrogram, std::span<const std::vector<double>> vectors,
                                 double cut_distance) {
  if (!(cut_distance >= 0.0 && cut_distance <= 2.0)) {
    throw Error(ErrorCode::kBadRange, "cut distance must lie in [0, 2]");
  }
  const int n = dendrogram.leaves;
  if (static_cast<int>(vectors.size()) != n) throw Error(ErrorCode::kLengthMismatch, "dendrogram/vector mismatch");
  // union-find over cluster ids
  std::vector<int> parent(2 * n - 1);
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  for (std::size_t k = 0; k < dendrogram.merges.size(); ++k) {
    const auto& m = dendrogram.merges[k];
    if (m.distance > cut_distance) break;
    parent[m.a] = parent[m.b] = n + static_cast<int>(k);
  }
  auto root = [&](int i) {
    while (parent[i] != i) i = parent[i];
    return i;
  };
  ClusterAssignment out;
  out.cluster_of.resize(n);
  std::map<int, int> canonical;
  for (int i = 0; i < n; ++i) {
    const auto [it, fresh] = canonical.emplace(root(i), static_cast<int>(canonical.size()));
    out.cluster_of[i] = it->second;
  }
  out.centroids.assign(canonical.size(), std::vector<double>(vectors.empty() ? 0 : vectors[0].size(), 0.0));
  std::vector<int> counts(canonical.size(), 0);
  for (int i = 0; i < n; ++i) {
    auto& c = out.centroids[out.cluster_of[i]];
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += vectors[i][k];
    ++counts[out.cluster_of[i]];
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (double& v : out.centroids[c]) v /= counts[c];
  }
  return out;
}

ClusterAssignment agglomerate(std::span<const std::vector<double>> vectors, double cut_distance) {
  return cut_dendrogram(build_dendrogram(vectors), vectors, cut_distance);
}

ClusterAssignment single_cluster(int frames) {
  ClusterAssignment a;
  a.cluster_of.assign(static_cast<std::size_t>(frames), 0);
  a.centroids.resize(1);
  return a;
}

BatchSampler::BatchSampler(const ClusterAssignment& assignment, int batch_size, std::uint64_t seed)
    : batch_size_(batch_size), rng_(seed) {
  const int k = assignment.count();
  if (k < 1 || assignment.cluster_of.empty()) throw Error(ErrorCode::kEmptyDataset, "no clusters to sample from");
  if (batch_size < k) {
    throw Error(ErrorCode::kBatchTooSmall,
                "batch size " + std::to_string(batch_size) + " is smaller than the " + std::to_string(k) + " clusters");
  }
  members_.resize(k);
  for (std::size_t i = 0; i < assignment.cluster_of.size(); ++i) {
    const int c = assignment.cluster_of[i];
    if (c < 0 || c >= k) throw Error(ErrorCode::kLengthMismatch, "cluster id out of range");
    members_[c].push_back(static_cast<int>(i));
  }
  for (const auto& m : members_) {
    if (m.empty()) throw Error(ErrorCode::kEmptyCollection, "empty cluster in assignment");
  }
  queues_.resize(k);
  cursor_.assign(k, 0);
  for (int c = 0; c < k; ++c) {
    queues_[c] = members_[c];
    shuffle(queues_[c], rng_);
  }
}

std::vector<int> BatchSampler::next() {
  const int k = static_cast<int>(members_.size());
  const int base = batch_size_ / k;
  const int extra = batch_size_ % k;
  std::vector<int> quota(k, base);
  for (int e = 0; e < extra; ++e) ++quota[(batch_index_ * extra + e) % k];
  std::vector<int> batch;
  batch.reserve(batch_size_);
  for (int c = 0; c < k; ++c) {
    for (int q = 0; q < quota[c]; ++q) {
      if (cursor_[c] == queues_[c].size()) {
        queues_[c] = members_[c];
        shuffle(queues_[c], rng_);
        cursor_[c] = 0;
      }
      batch.push_back(queues_[c][cursor_[c]++]);
    }
  }
  ++batch_index_;
  return batch;
}

std::vector<std::vector<int>> stratified_batches(const ClusterAssignment& assignment, int batch_size, int count,
                                                 std::uint64_t seed) {
  BatchSampler sampler(assignment, batch_size, seed);
  std::vector<std::vector<int>> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(sampler.next());
  return out;
}

double cluster_purity(std::span<const int> cluster_of, std::span<const int> classes) {
  if (cluster_of.size() != classes.size()) throw Error(ErrorCode::kLengthMismatch, "purity inputs differ in length");
  if (cluster_of.empty()) throw Error(ErrorCode::kEmptyCollection, "purity of an empty set");
  std::map<int, std::map<int, int>> table;
  for (std::size_t i = 0; i < cluster_of.size(); ++i) ++table[cluster_of[i]][classes[i]];
  long majority = 0;
  for (const auto& [cluster, counts] : table) {
    int best = 0;
    for (const auto& [cls, n] : counts) best = std::max(best, n);
    majority += best;
  }
  return static_cast<double>(majority) / static_cast<double>(cluster_of.size());
}

}  // namespace fiatnet
