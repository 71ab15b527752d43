#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fiatnet/nn/ops.hpp"
#include "fiatnet/nn/optim.hpp"
#include "fiatnet/rng.hpp"

namespace fiatnet {

/// Convolutional autoencoder over 360x128 frames.
/// Encoder: three stride-2 3x3 convolutions (1 -> 8 -> 16 -> 32) with ReLU,
/// global average pooling, linear map to the latent size. The decoder
/// mirrors it: linear to 32x45x16, then three stride-2 transposed convolutions.
struct Autoencoder {
  int latent = 64;
  nn::Var ew1, eb1, ew2, eb2, ew3, eb3, ewl, ebl;
  nn::Var dwl, dbl, dw3, db3, dw2, db2, dw1, db1;

  static Autoencoder init(int latent, std::uint64_t seed);
  nn::ParamList parameters() const;
  /// Weight tensors that enter the L2 regularizer (biases excluded).
  std::vector<nn::Var> regularized() const;
  Autoencoder frozen() const;
};

struct AutoencoderConfig {
  int latent = 64;
  double lambda = 1e-6;
  int epochs = 10;
  int batch_size = 8;
  double lr = 1e-3;
  nn::OptimizerConfig optimizer{nn::OptimizerKind::kAdam};
  std::uint64_t seed = 0;
};

struct AutoencoderEpoch {
  int epoch = 0;
  double reconstruction = 0.0;  ///< mean per-frame MSE
  double loss = 0.0;            ///< reconstruction + lambda * sum of squared weights
};

/// Mini-batch minimization of MSE + lambda * sum w^2. Needs at least two frames.
Autoencoder train_autoencoder(std::span<const Image> frames, const AutoencoderConfig& config,
                              const std::function<void(const AutoencoderEpoch&)>& log = {});

nn::Var ae_encode(const Autoencoder& ae, const Image& frame);
nn::Var ae_reconstruct(const Autoencoder& ae, const Image& frame);

/// Latent vector of one frame (deterministic encoder forward pass).
std::vector<double> embed(const Autoencoder& ae, const Image& frame);

/// 1 - u.v / (|u| |v|); throws ZeroVector when either norm is zero.
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// Merge list; cluster ids 0..n-1 are the inputs, merge k creates id n + k.
struct Dendrogram {
  struct Merge {
    int a = 0;
    int b = 0;
    double distance = 0.0;
    int size = 0;
  };
  int leaves = 0;
  std::vector<Merge> merges;
  /// True when merge distances never decrease.
  bool monotone() const;
};

struct ClusterAssignment {
  std::vector<int> cluster_of;  ///< per frame; clusters numbered by their smallest frame index
  std::vector<std::vector<double>> centroids;
  int count() const { return static_cast<int>(centroids.size()); }
};

/// Centroid-linkage clustering under cosine distance; ties go to the lowest
/// (idA, idB) pair.
Dendrogram build_dendrogram(std::span<const std::vector<double>> vectors);

/// Clusters formed by the merges made before the first merge whose distance
/// exceeds cut_distance.
ClusterAssignment cut_dendrogram(const Dendrogram& dendrogram, std::span<const std::vector<double>> vectors,
                                 double cut_distance);

ClusterAssignment agglomerate(std::span<const std::vector<double>> vectors, double cut_distance);

/// Every frame in cluster 0.
ClusterAssignment single_cluster(int frames);

/// Endless stream of stratified batches: floor(B/K) frames from every
/// cluster plus B mod K extra slots handed out round-robin (rotating with the
/// batch index). Each cluster draws from its own shuffled queue and reshuffles
/// when exhausted.
class BatchSampler {
 public:
  BatchSampler(const ClusterAssignment& assignment, int batch_size, std::uint64_t seed);
  std::vector<int> next();

 private:
  std::vector<std::vector<int>> members_;
  std::vector<std::vector<int>> queues_;
  std::vector<std::size_t> cursor_;
  int batch_size_;
  long batch_index_ = 0;
  Rng rng_;
};

std::vector<std::vector<int>> stratified_batches(const ClusterAssignment& assignment, int batch_size, int count,
                                                 std::uint64_t seed);

/// Fraction of frames whose cluster's majority class matches their own class.
double cluster_purity(std::span<const int> cluster_of, std::span<const int> classes);

}  // namespace fiatnet
