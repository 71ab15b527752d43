#include "fiatnet/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <string>

namespace fiatnet {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

/// Reads known keys of one section and rejects the rest.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) {
      doc_ = &doc.at(name_);
      if (!doc_->is_object()) config_error("config section \"" + name_ + "\" must be an object");
    }
  }
  ~Section() noexcept(false) {
    if (!doc_ || std::uncaught_exceptions()) return;
    for (const auto& [key, value] : doc_->items()) {
      if (!known_.count(key)) config_error("unknown config key \"" + name_ + "." + key + "\"");
    }
  }

  template <typename T>
  void get(const char* key, T& target) {
    known_.insert(key);
    if (!doc_ || !doc_->contains(key)) return;
    const json& v = doc_->at(key);
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer() && (std::is_signed_v<T> || v.is_number_unsigned() || v.get<long long>() >= 0);
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else {
      ok = v.is_string();
    }
    if (!ok) config_error("config key \"" + name_ + "." + key + "\" has the wrong type");
    target = v.get<T>();
  }

 private:
  std::string name_;
  const json* doc_ = nullptr;
  std::set<std::string> known_;
};

}  // namespace

std::string_view noise_rule_name(NoiseRule rule) {
  return rule == NoiseRule::kIsolatedPairs ? "isolated-pairs" : "isolated-short-runs";
}

NoiseRule parse_noise_rule(std::string_view name) {
  if (name == "isolated-short-runs") return NoiseRule::kIsolatedShortRuns;
  if (name == "isolated-pairs") return NoiseRule::kIsolatedPairs;
  config_error("unknown noise rule \"" + std::string(name) + "\"");
}

void PipelineConfig::apply(const json& doc) {
  if (!doc.is_object()) config_error("config must be a JSON object");
  static const std::set<std::string> sections = {"phantom", "preprocess", "aux",     "bpt",
                                                 "model",   "train",      "cluster", "infer"};
  for (const auto& [key, value] : doc.items()) {
    if (!sections.count(key)) config_error("unknown config section \"" + key + "\"");
  }
  {
    Section s(doc, "phantom");
    s.get("count", phantom.count);
    s.get("healthy", phantom.mix.healthy);
    s.get("fa", phantom.mix.fa);
    s.get("calcified", phantom.mix.calcified);
    s.get("noiseSigma", phantom.noise_sigma);
    s.get("seed", phantom.seed);
  }
  {
    Section s(doc, "preprocess");
    s.get("radialSamples", preprocess.radial_samples);
    s.get("sigma", preprocess.sigma);
    s.get("delta", preprocess.delta);
    s.get("startCandidates", preprocess.start_candidates);
  }
  {
    Section s(doc, "aux");
    s.get("m", lgi_window);
  }
  {
    Section s(doc, "bpt");
    s.get("alpha", train.alpha);
    s.get("minWidth", train.min_width);
  }
  {
    Section s(doc, "model");
    s.get("channels", model.channels);
    s.get("heads", model.heads);
    s.get("partition", model.partition);
  }
  {
    Section s(doc, "train");
    std::string opt(nn::optimizer_name(train.optimizer.kind));
    s.get("epochs", train.epochs);
    s.get("batchSize", train.batch_size);
    s.get("lr0", train.lr0);
    s.get("polyPower", train.poly_power);
    s.get("optimizer", opt);
    s.get("momentum", train.optimizer.momentum);
    s.get("seed", train.seed);
    train.optimizer.kind = nn::parse_optimizer(opt);
  }
  {
    Section s(doc, "cluster");
    AutoencoderConfig& ae = cluster.autoencoder;
    std::string opt(nn::optimizer_name(ae.optimizer.kind));
    s.get("enabled", cluster.enabled);
    s.get("cutDistance", cluster.cut_distance);
    s.get("latent", ae.latent);
    s.get("lambda", ae.lambda);
    s.get("epochs", ae.epochs);
    s.get("batchSize", ae.batch_size);
    s.get("lr", ae.lr);
    s.get("optimizer", opt);
    s.get("seed", ae.seed);
    ae.optimizer.kind = nn::parse_optimizer(opt);
  }
  {
    Section s(doc, "infer");
    std::string rule(noise_rule_name(infer.noise_rule));
    s.get("threshold", infer.threshold);
    s.get("noiseMinRun", infer.noise_min_run);
    s.get("noiseRule", rule);
    infer.noise_rule = parse_noise_rule(rule);
  }
}

json PipelineConfig::to_json() const {
  const AutoencoderConfig& ae = cluster.autoencoder;
  return {{"phantom",
           {{"count", phantom.count},
            {"healthy", phantom.mix.healthy},
            {"fa", phantom.mix.fa},
            {"calcified", phantom.mix.calcified},
            {"noiseSigma", phantom.noise_sigma},
            {"seed", phantom.seed}}},
          {"preprocess",
           {{"radialSamples", preprocess.radial_samples},
            {"sigma", preprocess.sigma},
            {"delta", preprocess.delta},
            {"startCandidates", preprocess.start_candidates}}},
          {"aux", {{"m", lgi_window}}},
          {"bpt", {{"alpha", train.alpha}, {"minWidth", train.min_width}}},
          {"model", {{"channels", model.channels}, {"heads", model.heads}, {"partition", model.partition}}},
          {"train",
           {{"epochs", train.epochs},
            {"batchSize", train.batch_size},
            {"lr0", train.lr0},
            {"polyPower", train.poly_power},
            {"optimizer", nn::optimizer_name(train.optimizer.kind)},
            {"momentum", train.optimizer.momentum},
            {"seed", train.seed}}},
          {"cluster",
           {{"enabled", cluster.enabled},
            {"cutDistance", cluster.cut_distance},
            {"latent", ae.latent},
            {"lambda", ae.lambda},
            {"epochs", ae.epochs},
            {"batchSize", ae.batch_size},
            {"lr", ae.lr},
            {"optimizer", nn::optimizer_name(ae.optimizer.kind)},
            {"seed", ae.seed}}},
          {"infer",
           {{"threshold", infer.threshold},
            {"noiseMinRun", infer.noise_min_run},
            {"noiseRule", noise_rule_name(infer.noise_rule)}}}};
}

void PipelineConfig::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) config_error(what);
  };
  check(phantom.count >= 1, "phantom.count must be >= 1");
  check(phantom.mix.healthy >= 0 && phantom.mix.fa >= 0 && phantom.mix.calcified >= 0 &&
            phantom.mix.healthy + phantom.mix.fa + phantom.mix.calcified > 0,
        "phantom class mix must be nonnegative with a positive sum");
  check(phantom.noise_sigma >= 0, "phantom.noiseSigma must be >= 0");
  check(preprocess.radial_samples >= 8, "preprocess.radialSamples must be >= 8");
  check(preprocess.sigma > 0, "preprocess.sigma must be positive");
  check(preprocess.delta >= 0, "preprocess.delta must be >= 0");
  check(preprocess.start_candidates >= 1, "preprocess.startCandidates must be >= 1");
  check(lgi_window >= 1, "aux.m must be >= 1");
  check(train.alpha >= 1, "bpt.alpha must be >= 1");
  check(train.min_width >= 1, "bpt.minWidth must be >= 1");
  check(model.channels >= 1 && model.heads >= 1 && model.channels % model.heads == 0,
        "model.channels must be a positive multiple of model.heads");
  check(train.epochs >= 1, "train.epochs must be >= 1");
  check(train.batch_size >= 1, "train.batchSize must be >= 1");
  check(train.lr0 >= 0 && std::isfinite(train.lr0), "train.lr0 must be finite and >= 0");
  check(cluster.cut_distance >= 0 && cluster.cut_distance <= 2, "cluster.cutDistance must lie in [0, 2]");
  check(cluster.autoencoder.latent >= 1, "cluster.latent must be >= 1");
  check(cluster.autoencoder.lambda >= 0, "cluster.lambda must be >= 0");
  check(cluster.autoencoder.epochs >= 1 && cluster.autoencoder.batch_size >= 1,
        "cluster.epochs and cluster.batchSize must be >= 1");
  check(infer.threshold >= 0 && infer.threshold <= 1, "infer.threshold must lie in [0, 1]");
  check(infer.noise_min_run >= 1, "infer.noiseMinRun must be >= 1");
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    config_error("config " + path.string() + ": " + e.what());
  }
  PipelineConfig cfg;
  cfg.apply(doc);
  return cfg;
}

}  // namespace fiatnet
