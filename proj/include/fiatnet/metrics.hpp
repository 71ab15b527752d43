#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fiatnet/bpt.hpp"

namespace fiatnet {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Counts over equally long binary sequences.
ConfusionCounts confusion(std::span<const int> pred, std::span<const int> gt);

/// Pooled counts over all angles of all frames.
ConfusionCounts confusion(std::span<const std::vector<int>> pred, std::span<const AngleAnnotation> gt);

/// Ratios with a 0/0 denominator are empty, never zero.
struct Scores {
  std::optional<double> f1;
  std::optional<double> acc;
  std::optional<double> sen;
  std::optional<double> spe;
};

Scores scores(const ConfusionCounts& c);

/// Mean of each defined per-frame score (frames where a score is undefined are skipped).
Scores macro_scores(std::span<const ConfusionCounts> per_frame);

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Needs at least one sample of each class.
double auc(std::span<const double> confidence, std::span<const int> gt);

}  // namespace fiatnet
