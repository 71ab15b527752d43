#pragma once

#include <cstdint>
#include <filesystem>

#include "fiatnet/bpt.hpp"
#include "fiatnet/clustering.hpp"
#include "fiatnet/neural.hpp"
#include "fiatnet/phantom.hpp"
#include "fiatnet/preprocess.hpp"
#include "json.hpp"

namespace fiatnet {

struct PhantomConfig {
  int count = 200;
  ClassMix mix;
  double noise_sigma = 0.03;
  std::uint64_t seed = 1;
};

struct ClusterConfig {
  bool enabled = true;
  double cut_distance = 0.3;
  AutoencoderConfig autoencoder;
};

struct InferConfig {
  double threshold = 0.5;
  int noise_min_run = 4;
  NoiseRule noise_rule = NoiseRule::kIsolatedShortRuns;
};

/// Every tunable constant of the pipeline. JSON layout: one object per
/// section (phantom, preprocess, aux, bpt, model, train, cluster, infer) with
/// camelCase keys; omitted keys keep their defaults, unknown keys are errors.
struct PipelineConfig {
  PhantomConfig phantom;
  PreprocessConfig preprocess;
  int lgi_window = 9;
  ModelConfig model;
  TrainConfig train;
  ClusterConfig cluster;
  InferConfig infer;

  /// Merges `doc` over the current values; throws Error(kConfig).
  void apply(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  /// Range checks shared by every subcommand; throws Error(kConfig).
  void validate() const;

  static PipelineConfig load(const std::filesystem::path& path);
};

std::string_view noise_rule_name(NoiseRule rule);
NoiseRule parse_noise_rule(std::string_view name);

}  // namespace fiatnet
