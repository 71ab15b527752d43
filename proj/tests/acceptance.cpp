// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero
// when any selected criterion fails. Usage: fiatnet_acceptance [1..9 ...]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fiatnet/auxiliary.hpp"
#include "fiatnet/bpt.hpp"
#include "fiatnet/clustering.hpp"
#include "fiatnet/io.hpp"
#include "fiatnet/metrics.hpp"
#include "fiatnet/neural.hpp"
#include "fiatnet/phantom.hpp"
#include "fiatnet/pipeline.hpp"
#include "fiatnet/preprocess.hpp"
#include "fiatnet/verify.hpp"
#include "fmt/format.h"
#include "support/attention_oracle.hpp"
#include "support/oracles.hpp"

using namespace fiatnet;
namespace fs = std::filesystem;
using nn::Tensor;
using nn::Var;

namespace {

// Tolerances and limits.
constexpr double kOracleTol = 1e-12;
constexpr double kAuxSeconds = 10.0;
constexpr double kWeightSumTol = 1e-12;
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kCleanPx = 1.0;
constexpr double kCleanFraction = 0.99;
constexpr double kNoisyPx = 2.0;
constexpr double kNoisyFraction = 0.95;
constexpr double kNoisySigma = 0.05;
constexpr double kVisitedFraction = 0.25;
constexpr int kSmallFaDegrees = 30;
constexpr int kMaxLeafWidth = 3;
constexpr double kPurity = 0.9;
constexpr double kMinF1 = 0.70;
constexpr double kF1Margin = 0.05;
constexpr double kTrainSeconds = 15.0 * 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

// ------------------------------------------------------------ 1 auxiliary

Outcome auxiliary_oracles() {
  const auto t0 = clock_type::now();
  double worst = 0.0;
  for (int f = 0; f < 50; ++f) {
    const Image img = oracle::random_image(kAngles, kUnfoldedCols, 1000 + f);
    const UnfoldedFrame uf{img, {}};
    worst = std::max(worst, oracle::max_abs_diff(gradient_image(uf).pixels, oracle::gradient_image(img)));
    for (int m : {1, 5, 9}) {
      worst =
          std::max(worst, oracle::max_abs_diff(long_range_gradient(uf, m).pixels, oracle::long_range_gradient(img, m)));
    }
    Rng rng(2000 + f);
    BorderTrace ap{std::vector<double>(kAngles), BorderKind::kAdventitiaPeriadventitia};
    for (double& r : ap.radii) r = uniform(rng, 0.0, kUnfoldedCols);
    worst = std::max(
        worst, oracle::max_abs_diff(binary_mask(uf, ap).pixels, oracle::binary_mask(kAngles, kUnfoldedCols, ap.radii)));
  }
  const double secs = seconds_since(t0);
  return {worst <= kOracleTol && secs < kAuxSeconds,
          fmt::format("max |diff| {:.3g} (tol {:g}) over 50 frames, {:.1f} s (limit {:g} s)", worst, kOracleTol, secs,
                      kAuxSeconds)};
}

// ------------------------------------------------------------ 2 attention

Var random_leaf(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  return nn::leaf(oracle::random_tensor(std::move(shape), rng, -scale, scale));
}

double row_sum_error(const Tensor& w, bool& negative) {
  double worst = 0.0;
  const int rows = w.dim(0), cols = w.dim(1);
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double v = w.data[static_cast<std::size_t>(r) * cols + c];
      if (!(v >= 0.0)) negative = true;
      s += v;
    }
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double oracle_gap(const Tensor& w, const oracle::Mat& expect) {
  double worst = 0.0;
  const oracle::Mat got = oracle::to_mat(w);
  for (std::size_t r = 0; r < got.size(); ++r) {
    for (std::size_t c = 0; c < got[r].size(); ++c) worst = std::max(worst, std::abs(got[r][c] - expect[r][c]));
  }
  return worst;
}

Outcome attention() {
  Rng rng(42);
  double sum_err = 0.0, gap = 0.0, mean_err = 0.0;
  bool negative = false, identity_exact = true, uniform_exact = true;
  const int heads = 2;
  for (int trial = 0; trial < 1000; ++trial) {
    const int c = trial % 2 ? 8 : 4;
    const int levels = 1 + static_cast<int>(uniform_index(rng, 4));
    const int h = 1 + static_cast<int>(uniform_index(rng, 4));
    int w = 1 << levels;
    std::vector<Var> maps;
    std::vector<Tensor> tensors;
    for (int l = 0; l < levels; ++l, w = (w + 1) / 2) {
      maps.push_back(random_leaf({c, h, w}, rng));
      tensors.push_back(maps.back()->value);
    }
    const double spread = trial % 3 == 0 ? 8.0 : 1.0;
    const LevelAttentionParams lp{random_leaf({c, c}, rng, spread), random_leaf({c, c}, rng, spread)};
    const LevelAttentionOutput lo = level_self_attention(maps, lp, heads);
    for (int i = 0; i < levels; ++i) {
      sum_err = std::max(sum_err, row_sum_error(lo.weights[i]->value, negative));
      gap =
          std::max(gap, oracle_gap(lo.weights[i]->value, oracle::level_weights(tensors, oracle::to_mat(lp.q->value),
                                                                               oracle::to_mat(lp.k->value), heads, i)));
    }
    if (levels == 1) {
      identity_exact = identity_exact && lo.maps[0]->value == maps[0]->value;
      for (double v : lo.weights[0]->value.data) identity_exact = identity_exact && v == 1.0;
    }

    std::vector<Var> mods;
    std::vector<Tensor> mod_tensors;
    for (int m = 0; m < kModalities; ++m) {
      mods.push_back(random_leaf({c, h, 3}, rng));
      mod_tensors.push_back(mods.back()->value);
    }
    const ModalityAttentionParams cp{random_leaf({c, c}, rng, spread), random_leaf({c, c}, rng, spread),
                                     random_leaf({c, c}, rng)};
    const CrossAttentionOutput co = modality_cross_attention(mods, cp, heads);
    oracle::Mat cw;
    const Tensor expect =
        oracle::cross_attention(mod_tensors, oracle::to_mat(cp.wq->value), oracle::to_mat(cp.wk->value),
                                oracle::to_mat(cp.wv->value), heads, &cw);
    sum_err = std::max(sum_err, row_sum_error(co.weights->value, negative));
    gap = std::max(gap, oracle_gap(co.weights->value, cw));
    gap = std::max(gap, oracle::max_abs_diff(co.map->value, expect));

    // degenerate cases: zero queries give uniform weights and plain means
    const Var zero = nn::constant(Tensor({c, c}, 0.0));
    const LevelAttentionOutput lu = level_self_attention(maps, {zero, zero}, heads);
    for (int i = 0; i < levels; ++i) {
      for (double v : lu.weights[i]->value.data) uniform_exact = uniform_exact && v == 1.0 / levels;
      Tensor mean(maps[i]->value.shape, 0.0);
      for (const Var& m : maps) {
        const Tensor r = nn::resize_bilinear(m, maps[i]->value.dim(1), maps[i]->value.dim(2))->value;
        for (std::size_t k = 0; k < r.size(); ++k) mean.data[k] += r.data[k] / levels;
      }
      mean_err = std::max(mean_err, oracle::max_abs_diff(lu.maps[i]->value, mean));
    }
    const CrossAttentionOutput cu = modality_cross_attention(mods, {zero, cp.wk, cp.wv}, heads);
    for (double v : cu.weights->value.data) uniform_exact = uniform_exact && v == 0.25;
    Tensor mean(mods[0]->value.shape, 0.0);
    const oracle::Mat wv = oracle::to_mat(cp.wv->value);
    const std::size_t hw = mean.size() / c;
    for (const Tensor& f : mod_tensors) {
      for (int o = 0; o < c; ++o) {
        for (std::size_t p = 0; p < hw; ++p) {
          double v = 0.0;
          for (int k = 0; k < c; ++k) v += wv[o][k] * f.data[k * hw + p];
          mean.data[o * hw + p] += 0.25 * v;
        }
      }
    }
    mean_err = std::max(mean_err, oracle::max_abs_diff(cu.map->value, mean));
  }
  const bool pass = !negative && sum_err <= kWeightSumTol && gap <= kOracleTol && identity_exact && uniform_exact &&
                    mean_err <= kOracleTol;
  return {pass, fmt::format("1000 inputs: negative={} |sum-1| {:.2g}, oracle gap {:.2g}, m=1 identity {}, "
                            "uniform weights {}, degenerate mean err {:.2g} (tol {:g})",
                            negative, sum_err, gap, identity_exact ? "exact" : "broken",
                            uniform_exact ? "exact" : "broken", mean_err, kWeightSumTol)};
}

// ------------------------------------------------------------ 3 gradients

Outcome gradients() {
  const auto t0 = clock_type::now();
  const std::vector<GradCheckEntry> checks = standard_grad_checks(1, 4, 3);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string names;
  for (const GradCheckEntry& c : checks) {
    worst = std::max(worst, c.max_relative_error);
    names += (names.empty() ? "" : ",") + c.name;
  }
  return {worst < kGradTol && secs < kGradSeconds && !checks.empty(),
          fmt::format("max rel err {:.3g} (tol {:g}) over [{}], {:.1f} s (limit {:g} s)", worst, kGradTol, names, secs,
                      kGradSeconds)};
}

// ------------------------------------------------------------ 4 borders

struct BorderStats {
  double within = 0.0;
  double worst_frame = 1.0;
};

BorderStats lumen_accuracy(double sigma, double tol_px, std::uint64_t seed) {
  const std::vector<PhantomFrame> frames = generate_dataset(100, {}, seed, DatasetOptions{sigma});
  long hits = 0;
  BorderStats s;
  for (const PhantomFrame& f : frames) {
    const PreprocessResult r = preprocess_frame(f.frame, {});
    int frame_hits = 0;
    for (int a = 0; a < kAngles; ++a) frame_hits += std::abs(r.lumen.radii[a] - f.truth.lumen.radii[a]) <= tol_px;
    hits += frame_hits;
    s.worst_frame = std::min(s.worst_frame, frame_hits / static_cast<double>(kAngles));
  }
  s.within = hits / (100.0 * kAngles);
  return s;
}

Outcome borders() {
  const BorderStats clean = lumen_accuracy(0.0, kCleanPx, 31);
  const BorderStats noisy = lumen_accuracy(kNoisySigma, kNoisyPx, 32);
  return {clean.within >= kCleanFraction && noisy.within >= kNoisyFraction,
          fmt::format("noise-free: {:.2f}% of angles within {:g} px (need {:g}%, worst frame {:.1f}%); "
                      "sigma {:g}: {:.2f}% within {:g} px (need {:g}%, worst frame {:.1f}%)",
                      100 * clean.within, kCleanPx, 100 * kCleanFraction, 100 * clean.worst_frame, kNoisySigma,
                      100 * noisy.within, kNoisyPx, 100 * kNoisyFraction, 100 * noisy.worst_frame)};
}

// ------------------------------------------------------------ 5 partition tree

bool widths_follow_ceil_split(const BpTree& tree) {
  static const std::vector<std::set<int>> expected = {{360}, {180}, {90}, {45}, {23, 22}, {12, 11}, {6, 5}, {3, 2}};
  for (const BptNode& n : tree.nodes()) {
    if (n.level >= static_cast<int>(expected.size()) || !expected[n.level].count(n.region.width())) return false;
    if (!n.is_leaf() && tree.node(n.left).region.width() != (n.region.width() + 1) / 2) return false;
    if (n.is_leaf() && n.level + 1 != static_cast<int>(expected.size())) return false;
  }
  return true;
}

Outcome partition_tree() {
  const BpTree tree = BpTree::build(4);
  std::vector<int> leaf_of(kAngles, -1);
  int widest_leaf = 0;
  for (int i = 0; i < tree.size(); ++i) {
    const BptNode& n = tree.node(i);
    if (!n.is_leaf()) continue;
    widest_leaf = std::max(widest_leaf, n.region.width());
    for (int d = n.region.start; d < n.region.end; ++d) leaf_of[d] = i;
  }
  Rng rng(55);
  int stray_errors = 0, small = 0, small_over = 0, max_visited_small = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<AngularRegion> intervals;
    const int count = 1 + static_cast<int>(uniform_index(rng, 3));
    const int max_len = trial % 2 ? 12 : 90;
    for (int k = 0; k < count; ++k) {
      const int start = static_cast<int>(uniform_index(rng, kAngles));
      const int len = 1 + static_cast<int>(uniform_index(rng, max_len));
      if (start + len <= kAngles) {
        intervals.push_back({start, start + len});
      } else {
        intervals.push_back({start, kAngles});
        intervals.push_back({0, start + len - kAngles});
      }
    }
    const AngleAnnotation a = AngleAnnotation::from_intervals(intervals);
    const SearchResult r = inference_search(tree, presence_oracle(a));
    const std::vector<int> out = threshold_labels(r.confidence);
    for (int d = 0; d < kAngles; ++d) {
      if (out[d] == a.labels[d]) continue;
      const AngularRegion leaf = tree.node(leaf_of[d]).region;
      const int fa = a.count(leaf);
      if (fa == 0 || fa == leaf.width()) ++stray_errors;
    }
    if (a.total() <= kSmallFaDegrees) {
      ++small;
      max_visited_small = std::max(max_visited_small, r.visited);
      small_over += r.visited > kVisitedFraction * tree.size();
    }
  }
  const bool widths = widths_follow_ceil_split(tree);
  return {stray_errors == 0 && widest_leaf <= kMaxLeafWidth && small_over == 0 && small > 0 && widths,
          fmt::format("100 annotations: {} errors outside mixed leaves, widest leaf {} deg; {} with <= {} FA deg "
                      "visit at most {} of {} nodes (limit {:g}%); ceil-split widths {}",
                      stray_errors, widest_leaf, small, kSmallFaDegrees, max_visited_small, tree.size(),
                      100 * kVisitedFraction, widths ? "match" : "differ")};
}

// ------------------------------------------------------------ 6 clustering

Outcome clustering() {
  const int n = 300;
  const std::vector<PhantomFrame> data = generate_dataset(n, ClassMix{1.0 / 3, 1.0 / 3, 1.0 / 3}, 61);
  std::vector<Image> frames(n);
  std::vector<int> classes(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    frames[i] = preprocess_frame(data[i].frame, {}).unfolded.pixels;
    classes[i] = static_cast<int>(data[i].cls);
  }
  AutoencoderConfig cfg;
  cfg.seed = 7;
  const Autoencoder ae = train_autoencoder(frames, cfg).frozen();
  std::vector<std::vector<double>> vectors(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) vectors[i] = embed(ae, frames[i]);
  const ClusterAssignment assignment = agglomerate(vectors, 0.3);
  const double purity = cluster_purity(assignment.cluster_of, classes);

  // batch composition on a K=3 assignment: the clustering's own when it found
  // three clusters, otherwise the class labels
  ClusterAssignment three = assignment;
  if (three.count() != 3) {
    three.cluster_of = classes;
    three.centroids.assign(3, {});
  }
  int bad = 0;
  for (const std::vector<int>& batch : stratified_batches(three, 9, 200, 3)) {
    std::map<int, int> per;
    for (int f : batch) ++per[three.cluster_of[f]];
    bad += !(batch.size() == 9 && per.size() == 3 && per[0] == 3 && per[1] == 3 && per[2] == 3);
  }
  return {
      purity >= kPurity && bad == 0,
      fmt::format("{} clusters, purity {:.3f} (need {:g}); {} of 200 size-9 batches off 3/3/3 ({})", assignment.count(),
                  purity, kPurity, bad, assignment.count() == 3 ? "found clusters" : "class-label clusters")};
}

// ------------------------------------------------------------ 7 training

struct TrainRun {
  double f1 = 0.0;
  double seconds = 0.0;
};

TrainRun train_and_score(std::span<const TrainingSample> train_set, std::span<const TrainingSample> test_set,
                         bool partition) {
  const auto t0 = clock_type::now();
  ModelConfig model;
  model.channels = 16;
  model.partition = partition;
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.lr0 = 1e-3;
  cfg.optimizer.kind = nn::OptimizerKind::kAdam;
  cfg.seed = 5;
  const std::vector<int> one_cluster(train_set.size(), 0);
  const FiatNet net = train(train_set, one_cluster, model, cfg).frozen();
  std::vector<std::vector<int>> preds;
  std::vector<AngleAnnotation> gts;
  for (const TrainingSample& s : test_set) {
    preds.push_back(suppress_noise(threshold_labels(predict_confidence(net, s.images))));
    gts.push_back(s.annotation);
  }
  return {scores(confusion(preds, gts)).f1.value_or(0.0), seconds_since(t0)};
}

Outcome training() {
  const auto t0 = clock_type::now();
  const std::vector<TrainingSample> train_set = phantom_samples(generate_dataset(200, {}, 11), {});
  const std::vector<TrainingSample> test_set = phantom_samples(generate_dataset(50, {}, 12), {});
  const double data_secs = seconds_since(t0);
  const TrainRun bpt = train_and_score(train_set, test_set, true);
  const TrainRun flat = train_and_score(train_set, test_set, false);
  const double pipeline_secs = data_secs + bpt.seconds;
  return {
      bpt.f1 >= kMinF1 && bpt.f1 - flat.f1 >= kF1Margin && pipeline_secs < kTrainSeconds,
      fmt::format("F1 {:.4f} with partition (need {:g}), {:.4f} without; margin {:+.4f} (need {:+g}); "
                  "{:.0f} s data + train + eval (limit {:g} s), baseline {:.0f} s",
                  bpt.f1, kMinF1, flat.f1, bpt.f1 - flat.f1, kF1Margin, pipeline_secs, kTrainSeconds, flat.seconds)};
}

// ------------------------------------------------------------ 8 metrics

Outcome metrics() {
  int failures = 0;
  auto expect = [&](bool ok) { failures += !ok; };
  const std::vector<int> toy_pred = {1, 1, 0, 0}, toy_gt = {1, 0, 1, 0};
  expect(confusion(toy_pred, toy_gt) == ConfusionCounts{1, 1, 1, 1});
  const std::vector<int> all_pos(kAngles, 1), all_neg(kAngles, 0);
  const ConfusionCounts same = confusion(all_pos, all_pos);
  expect(same.fp == 0 && same.fn == 0 && same.tn == 0);
  const ConfusionCounts inverse = confusion(all_neg, all_pos);
  expect(inverse.tp == 0 && inverse.tn == 0);
  const Scores half = scores({1, 1, 1, 1});
  expect(*half.f1 == 0.5 && *half.acc == 0.5 && *half.sen == 0.5 && *half.spe == 0.5);
  const Scores degenerate = scores({0, 0, 100, 0});
  expect(!degenerate.f1 && *degenerate.spe == 1.0);
  const Scores perfect = scores(confusion(toy_gt, toy_gt));
  expect(*perfect.f1 == 1.0 && *perfect.acc == 1.0 && *perfect.sen == 1.0 && *perfect.spe == 1.0);
  const std::vector<int> gt = {0, 0, 1, 1};
  expect(auc(std::vector<double>{0, 0, 1, 1}, gt) == 1.0);
  expect(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, gt) == 0.5);
  expect(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, gt) == 0.75);

  Rng rng(88);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 400));
    std::vector<double> conf(n);
    std::vector<int> labels(n);
    const bool coarse = trial % 2 == 0;
    for (int i = 0; i < n; ++i) {
      conf[i] = coarse ? static_cast<double>(uniform_index(rng, 8)) / 8.0 : uniform01(rng);
      labels[i] = static_cast<int>(uniform_index(rng, 2));
    }
    labels[0] = 0;
    labels[1] = 1;
    worst = std::max(worst, std::abs(auc(conf, labels) - oracle::auc_pairs(conf, labels)));
  }
  return {failures == 0 && worst <= kOracleTol,
          fmt::format("{} worked examples wrong; AUC vs pair counting max |diff| {:.3g} on 1000 inputs (tol {:g})",
                      failures, worst, kOracleTol)};
}

// ------------------------------------------------------------ 9 reproducibility

int run_cli(const std::string& args) {
  const std::string cmd = fmt::format("\"{}\" -q {} > /dev/null 2>&1", FIATNET_CLI_PATH, args);
  return std::system(cmd.c_str());
}

std::string run_pipeline(const fs::path& work) {
  const std::string w = "--work \"" + work.string() + "\"";
  const std::vector<std::string> steps = {
      "phantom --out \"" + work.string() + "\" --count 12 --seed 9",
      "preprocess " + w,
      "aux " + w,
      "cluster " + w + " --epochs 2 --latent 16",
      "train " + w + " --epochs 2 --channels 8 --heads 2",
      "infer " + w + " --model \"" + (work / "model" / "weights.f32").string() + "\"",
      "eval " + w,
  };
  for (const std::string& s : steps) {
    if (run_cli(s) != 0) return "step failed: " + s.substr(0, s.find(' '));
  }
  return {};
}

std::map<std::string, std::string> hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::sha256_file(e.path());
  }
  return out;
}

Outcome reproducibility() {
  const fs::path base = fs::temp_directory_path() / fmt::format("fiatnet_accept_{}", std::random_device{}());
  fs::remove_all(base);
  for (const char* run : {"a", "b"}) {
    const std::string err = run_pipeline(base / run);
    if (!err.empty()) {
      fs::remove_all(base);
      return {false, err};
    }
  }
  const auto a = hashes(base / "a");
  const auto b = hashes(base / "b");
  int manifests = 0, weights = 0, differing = 0;
  for (const auto& [path, hash] : a) {
    const bool is_manifest = path.ends_with("manifest.json") || path == "dataset.json";
    const bool is_weights = path.ends_with("weights.f32") || path.ends_with("autoencoder.f32");
    manifests += is_manifest;
    weights += is_weights;
    const auto it = b.find(path);
    differing += it == b.end() || it->second != hash;
  }
  differing += static_cast<int>(b.size() > a.size() ? b.size() - a.size() : 0);
  fs::remove_all(base);
  return {differing == 0 && manifests > 0 && weights >= 2,
          fmt::format("two full CLI runs: {} files compared ({} manifests, {} weight files), {} differ", a.size(),
                      manifests, weights, differing)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"auxiliary images match brute-force oracles", auxiliary_oracles},
      {"attention weights", attention},
      {"gradient verification", gradients},
      {"lumen border detection on phantoms", borders},
      {"partition tree semantics", partition_tree},
      {"clustering stratification", clustering},
      {"end-to-end toy training", training},
      {"metrics", metrics},
      {"reproducible CLI pipeline", reproducibility},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
      return 2;
    }
    selected.push_back(k);
  }
  if (selected.empty()) {
    for (int k = 1; k <= static_cast<int>(criteria.size()); ++k) selected.push_back(k);
  }
  int failed = 0;
  for (int k : selected) {
    Outcome o;
    try {
      o = criteria[k - 1].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", k, criteria[k - 1].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
