#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fiatnet/common.hpp"
#include "fiatnet/rng.hpp"

namespace fiatnet {

/// Half-open degree range [start, end).
struct AngularRegion {
  int start = 0;
  int end = kAngles;

  int width() const { return end - start; }
  bool operator==(const AngularRegion&) const = default;
};

/// Per-degree FA labels (1 = FA).
struct AngleAnnotation {
  std::vector<std::uint8_t> labels = std::vector<std::uint8_t>(kAngles, 0);

  static AngleAnnotation from_labels(std::span<const int> values);
  /// Union of half-open [start, end) degree intervals.
  static AngleAnnotation from_intervals(std::span<const AngularRegion> intervals);

  int count(AngularRegion region) const;
  int total() const { return count({0, kAngles}); }
};

enum class NodeLabel { kUnlabeled, kPositive, kNegative };

struct BptNode {
  AngularRegion region;
  int level = 0;
  int parent = -1;
  int left = -1;
  int right = -1;
  NodeLabel label = NodeLabel::kUnlabeled;

  bool is_leaf() const { return left < 0; }
};

/// Binary partition of [0, 360): a node of width w splits at start + ceil(w/2);
/// nodes narrower than min_width (or of width 1) are leaves. Node 0 is the root
/// and children always follow their parent in storage order.
class BpTree {
 public:
  static BpTree build(int min_width = 4);

  int min_width() const { return min_width_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const BptNode& node(int i) const { return nodes_[i]; }
  std::span<const BptNode> nodes() const { return nodes_; }
  int depth() const;
  int leaf_count() const;

  /// Copy with every node labeled against `annotation`.
  BpTree labeled(const AngleAnnotation& annotation, int alpha = 4) const;

 private:
  std::vector<BptNode> nodes_;
  int min_width_ = 4;
};

/// Negative iff the region holds fewer than alpha FA degrees.
NodeLabel label_node(const AngleAnnotation& annotation, AngularRegion region, int alpha = 4);

/// Fraction of FA degrees inside the region.
double fa_fraction(const AngleAnnotation& annotation, AngularRegion region);

/// Node indices from the root to a terminal node.
using BptPath = std::vector<int>;

/// Root-to-terminal paths of a labeled tree; descent stops at Negative nodes
/// and at structural leaves. Left subtree first.
std::vector<BptPath> enumerate_paths(const BpTree& labeled_tree);

const BptPath& sample_path(std::span<const BptPath> paths, Rng& rng);
const BptPath& sample_path(std::span<const BptPath> paths, std::uint64_t seed);

/// FA probability for the last node of `path` (path[0] is the root).
using RegionClassifier = std::function<double(const BpTree& tree, std::span<const int> path)>;

struct SearchResult {
  std::vector<double> confidence = std::vector<double>(kAngles, 0.0);
  int visited = 0;
  std::vector<int> stop_nodes;  ///< nodes whose probability was written to their angles
};

/// Depth-first search: a node of width L with FA probability p stops when
/// (1 - p) > 1 - alpha / L or when it is a structural leaf; otherwise both
/// children are searched.
SearchResult inference_search(const BpTree& tree, const RegionClassifier& classifier, int alpha = 4);

/// Classifier that reports 1 when the region contains any FA degree.
RegionClassifier presence_oracle(const AngleAnnotation& annotation);

enum class NoiseRule {
  kIsolatedShortRuns,  ///< drop runs shorter than min_run with > min_run negatives on both sides
  kIsolatedPairs,      ///< drop two single-degree positives <= min_run apart, isolated from the rest
};

std::vector<int> threshold_labels(std::span<const double> confidence, double threshold = 0.5);

/// Circular noise suppression on binary per-degree labels.
std::vector<int> suppress_noise(std::span<const int> labels, int min_run = 4,
                                NoiseRule rule = NoiseRule::kIsolatedShortRuns);

}  // namespace fiatnet
