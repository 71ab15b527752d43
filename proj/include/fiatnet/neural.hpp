#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "fiatnet/bpt.hpp"
#include "fiatnet/nn/ops.hpp"
#include "fiatnet/nn/optim.hpp"

namespace fiatnet {

/// Input images of one frame: the unfolded frame and its three auxiliary images.
enum Modality : int { kOF = 0, kGI = 1, kLGI = 2, kBMI = 3 };
inline constexpr int kModalities = 4;
std::string_view modality_name(int m);

using ModalityImages = std::array<Image, kModalities>;

/// Three 3x3 convolutions 1 -> 8 -> 16 -> C, stride 2 on the radial axis only.
struct EncoderParams {
  nn::Var w1, b1, w2, b2, w3, b3;
};

/// q = l Q, k = l K for pooled level features l.
struct LevelAttentionParams {
  nn::Var q, k;
};

/// Cross-modality attention; wv is applied as a 1x1 convolution.
struct ModalityAttentionParams {
  nn::Var wq, wk, wv;
};

/// sigmoid(w pool(f) + b); w is [outputs, C].
struct HeadParams {
  nn::Var w, b;
};

struct ModelConfig {
  int channels = 32;
  int heads = 4;
  /// false selects the whole-frame variant: root level only, the head
  /// applied to every angular column for 360 outputs.
  bool partition = true;
};

struct FiatNet {
  ModelConfig config;
  std::array<EncoderParams, kModalities> encoders;
  std::array<LevelAttentionParams, kModalities> level;
  ModalityAttentionParams cross;
  HeadParams head;

  static FiatNet init(const ModelConfig& config, std::uint64_t seed);

  /// Every trainable tensor, in serialization order.
  nn::ParamList parameters() const;
  /// Deep copy whose parameters do not record gradients.
  FiatNet frozen() const;
};

/// Region [start, end) of a 360x128 image as a [1][128][width] tensor
/// (radial axis first, angle along the width).
nn::Tensor region_tensor(const Image& image, AngularRegion region);

nn::Var encode(const EncoderParams& p, const nn::Var& region);

struct LevelAttentionOutput {
  std::vector<nn::Var> maps;     ///< f'_i, same shapes as the inputs
  std::vector<nn::Var> weights;  ///< per level i: [heads, m], rows sum to 1
};

/// f'_i = sum_j w'_ij h(f_j), h the bilinear resize onto f_i's grid; each
/// head owns a contiguous channel group. With `only >= 0` just level `only`
/// is produced (the outputs then hold a single entry).
LevelAttentionOutput level_self_attention(std::span<const nn::Var> features, const LevelAttentionParams& p, int heads,
                                          int only = -1);

struct CrossAttentionOutput {
  nn::Var map;      ///< f''_i
  nn::Var weights;  ///< [heads, 4] over modalities
};

/// Query from the OF modality, keys and values from all four; scores scaled by 1/sqrt(C).
CrossAttentionOutput modality_cross_attention(std::span<const nn::Var> maps, const ModalityAttentionParams& p,
                                              int heads);

nn::Var classify(const nn::Var& fused, const HeadParams& head);

/// Sum over levels of binary cross-entropy; labels may be soft.
nn::Var path_loss(const nn::Var& predictions, std::span<const double> labels);

/// Caches encoder outputs of one frame by node index.
class FeatureCache {
 public:
  explicit FeatureCache(const ModalityImages& images) : images_(&images) {}
  nn::Var get(const FiatNet& model, const BpTree& tree, int node, int modality);

 private:
  const ModalityImages* images_;
  std::vector<std::array<nn::Var, kModalities>> cache_;
};

/// Level-wise FA probabilities [m] for the nodes of `path`, or [1] for the
/// last node only when `last_only` is set.
nn::Var path_predictions(const FiatNet& model, FeatureCache& features, const BpTree& tree, std::span<const int> path,
                         bool last_only = false);

/// Whole-frame variant: 360 per-degree probabilities from the shared head
/// applied to each column of the fused root map (radial axis averaged).
nn::Var frame_predictions(const FiatNet& model, const ModalityImages& images);

/// Soft training target of each node on a path: the FA fraction of its region.
std::vector<double> path_targets(const BpTree& tree, std::span<const int> path, const AngleAnnotation& annotation);

struct TrainingSample {
  ModalityImages images;
  AngleAnnotation annotation;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double lr0 = 1e-4;
  double poly_power = 0.9;
  nn::OptimizerConfig optimizer;
  int alpha = 4;
  int min_width = 4;
  std::uint64_t seed = 0;
};

struct TrainLogEntry {
  int epoch = 0;
  long iteration = 0;
  double loss = 0.0;  ///< mean per-frame loss over the batch
  double lr = 0.0;
};

/// Stratified mini-batch training; `cluster_of` maps each sample to its
/// cluster (all zeros disables stratification).
FiatNet train(std::span<const TrainingSample> samples, std::span<const int> cluster_of, const ModelConfig& model,
              const TrainConfig& config, const std::function<void(const TrainLogEntry&)>& log = {});

/// Per-degree confidences of one frame: BPT search for the partition model,
/// direct outputs for the whole-frame model.
std::vector<double> predict_confidence(const FiatNet& model, const ModalityImages& images, int alpha = 4,
                                       int min_width = 4, int* visited = nullptr);

/// Largest relative deviation between reverse-mode and central-difference
/// gradients of a scalar function over every element of `wrt`.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
double grad_check(const std::function<nn::Var()>& scalar_fn, std::span<const nn::Var> wrt, double eps = 1e-5);

}  // namespace fiatnet
