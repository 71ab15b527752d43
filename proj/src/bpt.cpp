#include "fiatnet/bpt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fiatnet {

AngleAnnotation AngleAnnotation::from_labels(std::span<const int> values) {
  if (values.size() != static_cast<std::size_t>(kAngles)) {
    throw Error(ErrorCode::kLengthMismatch, "annotation needs 360 labels, got " + std::to_string(values.size()));
  }
  AngleAnnotation ann;
  for (int a = 0; a < kAngles; ++a) {
    if (values[a] != 0 && values[a] != 1) throw Error(ErrorCode::kLengthMismatch, "annotation labels must be 0 or 1");
    ann.labels[a] = static_cast<std::uint8_t>(values[a]);
  }
  return ann;
}

AngleAnnotation AngleAnnotation::from_intervals(std::span<const AngularRegion> intervals) {
  AngleAnnotation ann;
  for (const AngularRegion& r : intervals) {
    if (r.start < 0 || r.end > kAngles || r.start >= r.end) {
      throw Error(ErrorCode::kSpecOutOfBounds,
                  "interval [" + std::to_string(r.start) + ", " + std::to_string(r.end) + ") is not inside [0, 360)");
    }
    std::fill(ann.labels.begin() + r.start, ann.labels.begin() + r.end, std::uint8_t{1});
  }
  return ann;
}

int AngleAnnotation::count(AngularRegion region) const {
  int n = 0;
  for (int a = region.start; a < region.end; ++a) n += labels[a];
  return n;
}

BpTree BpTree::build(int min_width) {
  if (min_width < 1 || min_width > kAngles) {
    throw Error(ErrorCode::kBadMinWidth, "min width must lie in [1, 360], got " + std::to_string(min_width));
  }
  BpTree tree;
  tree.min_width_ = min_width;
  tree.nodes_.push_back(BptNode{AngularRegion{0, kAngles}, 0, -1, -1, -1, NodeLabel::kUnlabeled});
  for (std::size_t i = 0; i < tree.nodes_.size(); ++i) {
    const BptNode parent = tree.nodes_[i];
    const int w = parent.region.width();
    if (w < min_width || w < 2) continue;
    const int mid = parent.region.start + (w + 1) / 2;
    const int left = static_cast<int>(tree.nodes_.size());
    tree.nodes_.push_back(BptNode{{parent.region.start, mid}, parent.level + 1, static_cast<int>(i), -1, -1, {}});
    tree.nodes_.push_back(BptNode{{mid, parent.region.end}, parent.level + 1, static_cast<int>(i), -1, -1, {}});
    tree.nodes_[i].left = left;
    tree.nodes_[i].right = left + 1;
  }
  return tree;
}

int BpTree::depth() const {
  int d = 0;
  for (const BptNode& n : nodes_) d = std::max(d, n.level);
  return d;
}

int BpTree::leaf_count() const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(), [](const BptNode& n) { return n.is_leaf(); }));
}

BpTree BpTree::labeled(const AngleAnnotation& annotation, int alpha) const {
  BpTree out = *this;
  for (BptNode& n : out.nodes_) n.label = label_node(annotation, n.region, alpha);
  return out;
}

NodeLabel label_node(const AngleAnnotation& annotation, AngularRegion region, int alpha) {
  return annotation.count(region) < alpha ? NodeLabel::kNegative : NodeLabel::kPositive;
}

double fa_fraction(const AngleAnnotation& annotation, AngularRegion region) {
  return static_cast<double>(annotation.count(region)) / region.width();
}

std::vector<BptPath> enumerate_paths(const BpTree& tree) {
  std::vector<BptPath> paths;
  BptPath current;
  auto visit = [&](auto&& self, int idx) -> void {
    current.push_back(idx);
    const BptNode& n = tree.node(idx);
    if (n.label == NodeLabel::kNegative || n.is_leaf()) {
      paths.push_back(current);
    } else {
      self(self, n.left);
      self(self, n.right);
    }
    current.pop_back();
  };
  visit(visit, 0);
  return paths;
}

const BptPath& sample_path(std::span<const BptPath> paths, Rng& rng) {
  if (paths.empty()) throw Error(ErrorCode::kEmptyCollection, "cannot sample from an empty path collection");
  return paths[uniform_index(rng, paths.size())];
}

const BptPath& sample_path(std::span<const BptPath> paths, std::uint64_t seed) {
  Rng rng(seed);
  return sample_path(paths, rng);
}

SearchResult inference_search(const BpTree& tree, const RegionClassifier& classifier, int alpha) {
  SearchResult result;
  BptPath path;
  auto visit = [&](auto&& self, int idx) -> void {
    path.push_back(idx);
    ++result.visited;
    const BptNode& n = tree.node(idx);
    const double p = classifier(tree, path);
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw Error(ErrorCode::kClassifierFailure,
                  "classifier returned an invalid probability for node " + std::to_string(idx));
    }
    const double width = n.region.width();
    const bool negative = (1.0 - p) > 1.0 - alpha / width;
    if (negative || n.is_leaf()) {
      std::fill(result.confidence.begin() + n.region.start, result.confidence.begin() + n.region.end, p);
      result.stop_nodes.push_back(idx);
    } else {
      self(self, n.left);
      self(self, n.right);
    }
    path.pop_back();
  };
  visit(visit, 0);
  return result;
}

RegionClassifier presence_oracle(const AngleAnnotation& annotation) {
  return [annotation](const BpTree& tree, std::span<const int> path) {
    return annotation.count(tree.node(path.back()).region) > 0 ? 1.0 : 0.0;
  };
}

std::vector<int> threshold_labels(std::span<const double> confidence, double threshold) {
  std::vector<int> out(confidence.size());
  for (std::size_t i = 0; i < confidence.size(); ++i) out[i] = confidence[i] >= threshold ? 1 : 0;
  return out;
}

namespace {

struct Run {
  int start;
  int length;
};

// Positive runs in circular order; a run crossing the 359/0 seam is kept whole.
std::vector<Run> circular_runs(std::span<const int> labels) {
  const int n = static_cast<int>(labels.size());
  int origin = -1;
  for (int i = 0; i < n; ++i) {
    if (labels[i] == 0) {
      origin = i;
      break;
    }
  }
  std::vector<Run> runs;
  if (origin < 0) return runs;
  for (int k = 1; k <= n; ++k) {
    const int i = (origin + k) % n;
    if (labels[i] == 0) continue;
    if (!runs.empty() && (runs.back().start + runs.back().length) % n == i) {
      ++runs.back().length;
    } else {
      runs.push_back({i, 1});
    }
  }
  return runs;
}

}  // namespace

std::vector<int> suppress_noise(std::span<const int> labels, int min_run, NoiseRule rule) {
  std::vector<int> out(labels.begin(), labels.end());
  const int n = static_cast<int>(labels.size());
  const std::vector<Run> runs = circular_runs(labels);
  const int k = static_cast<int>(runs.size());
  if (k == 0) return out;

  auto gap_after = [&](int i) {
    const Run& a = runs[i];
    const Run& b = runs[(i + 1) % k];
    return ((b.start - (a.start + a.length)) % n + n) % n;
  };
  auto clear = [&](const Run& r) {
    for (int j = 0; j < r.length; ++j) out[(r.start + j) % n] = 0;
  };

  if (rule == NoiseRule::kIsolatedShortRuns) {
    for (int i = 0; i < k; ++i) {
      const int before = gap_after((i + k - 1) % k);
      const int after = gap_after(i);
      if (runs[i].length < min_run && before > min_run && after > min_run) clear(runs[i]);
    }
  } else {
    if (k < 2) return out;
    for (int i = 0; i < k; ++i) {
      const int j = (i + 1) % k;
      if (j == i || runs[i].length != 1 || runs[j].length != 1) continue;
      const bool close = gap_after(i) + 1 <= min_run;
      const bool isolated = gap_after((i + k - 1) % k) > min_run && gap_after(j) > min_run;
      if (close && isolated && (k > 2 || i == 0)) {
        clear(runs[i]);
        clear(runs[j]);
      }
    }
  }
  return out;
}

}  // namespace fiatnet
