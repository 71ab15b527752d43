#include "fiatnet/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace fiatnet {
namespace {

std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

}  // namespace

ConfusionCounts confusion(std::span<const int> pred, std::span<const int> gt) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "prediction has " + std::to_string(pred.size()) + " labels, ground truth " + std::to_string(gt.size()));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool g = gt[i] != 0;
    if (p && g)
      ++c.tp;
    else if (p)
      ++c.fp;
    else if (g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

ConfusionCounts confusion(std::span<const std::vector<int>> pred, std::span<const AngleAnnotation> gt) {
  if (pred.size() != gt.size())
    throw Error(ErrorCode::kLengthMismatch, "prediction and ground-truth frame counts differ");
  ConfusionCounts total;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    if (pred[f].size() != static_cast<std::size_t>(kAngles)) {
      throw Error(ErrorCode::kLengthMismatch, "frame " + std::to_string(f) + " prediction is not 360 labels");
    }
    const std::vector<int> g(gt[f].labels.begin(), gt[f].labels.end());
    total += confusion(pred[f], g);
  }
  return total;
}

Scores scores(const ConfusionCounts& c) {
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto tn = static_cast<double>(c.tn);
  const auto fn = static_cast<double>(c.fn);
  return Scores{ratio(2.0 * tp, 2.0 * tp + fp + fn), ratio(tp + tn, static_cast<double>(c.total())), ratio(tp, tp + fn),
                ratio(tn, tn + fp)};
}

Scores macro_scores(std::span<const ConfusionCounts> per_frame) {
  double sums[4] = {};
  int counts[4] = {};
  for (const ConfusionCounts& c : per_frame) {
    const Scores s = scores(c);
    const std::optional<double>* fields[4] = {&s.f1, &s.acc, &s.sen, &s.spe};
    for (int k = 0; k < 4; ++k) {
      if (fields[k]->has_value()) {
        sums[k] += **fields[k];
        ++counts[k];
      }
    }
  }
  return Scores{ratio(sums[0], counts[0]), ratio(sums[1], counts[1]), ratio(sums[2], counts[2]),
                ratio(sums[3], counts[3])};
}

double auc(std::span<const double> confidence, std::span<const int> gt) {
  if (confidence.size() != gt.size()) throw Error(ErrorCode::kLengthMismatch, "confidence and label counts differ");
  const std::size_t n = confidence.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return confidence[a] < confidence[b]; });

  // midranks (1-based) over tie groups
  double positive_rank_sum = 0.0;
  std::int64_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && confidence[order[j]] == confidence[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (gt[order[k]] != 0) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j;
  }
  const auto negatives = static_cast<std::int64_t>(n) - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::kSingleClass, "AUC needs at least one positive and one negative sample");
  }
  const double pos = static_cast<double>(positives);
  return (positive_rank_sum - pos * (pos + 1.0) / 2.0) / (pos * static_cast<double>(negatives));
}

}  // namespace fiatnet
