#include <omp.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fiatnet/auxiliary.hpp"
#include "fiatnet/bpt.hpp"
#include "fiatnet/clustering.hpp"
#include "fiatnet/config.hpp"
#include "fiatnet/io.hpp"
#include "fiatnet/metrics.hpp"
#include "fiatnet/neural.hpp"
#include "fiatnet/phantom.hpp"
#include "fiatnet/preprocess.hpp"
#include "fiatnet/verify.hpp"
#include "workspace.hpp"

namespace fiatnet::cli {
namespace {

constexpr const char* kWorkersEnv = "FIATNET_WORKERS";

/// Runs fn(i) for i in [0, n) across threads; the exception of the lowest
/// failing index is rethrown so failures do not depend on scheduling.
void parallel_for(int n, const std::function<void(int)>& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

int exit_code(ErrorClass c) {
  switch (c) {
    case ErrorClass::kConfig:
      return 2;
    case ErrorClass::kData:
      return 3;
    case ErrorClass::kNumerical:
      return 4;
  }
  return 3;
}

std::string_view class_name(ErrorClass c) {
  switch (c) {
    case ErrorClass::kConfig:
      return "config";
    case ErrorClass::kData:
      return "data";
    case ErrorClass::kNumerical:
      return "numerical";
  }
  return "data";
}

int report_error(std::string_view code, ErrorClass cls, const std::string& message) {
  const json err = {{"error", {{"code", code}, {"class", class_name(cls)}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
  return exit_code(cls);
}

void apply_worker_env() {
  const char* v = std::getenv(kWorkersEnv);
  if (!v || !*v) return;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 4096) {
    throw Error(ErrorCode::kConfig, std::string(kWorkersEnv) + " must be a positive integer, got \"" + v + "\"");
  }
  omp_set_num_threads(static_cast<int>(n));
}

/// Flag values that override the config file when given.
struct Overrides {
  std::string config_path;

  std::optional<int> count;
  std::optional<double> healthy, fa, calcified, noise_sigma;
  std::optional<std::uint64_t> seed;

  std::optional<int> radial_samples, delta;
  std::optional<double> sigma;

  std::optional<int> lgi_window;

  std::optional<int> alpha, min_width, channels, heads, epochs, batch_size;
  std::optional<double> lr0;
  std::optional<std::string> optimizer;
  bool no_partition = false;
  bool no_cluster = false;

  std::optional<double> cut_distance, lambda;
  std::optional<int> latent;

  std::optional<double> threshold;
  std::optional<int> noise_min_run;
  std::optional<std::string> noise_rule;
};

PipelineConfig resolve(const Overrides& o, const std::string& command) {
  PipelineConfig cfg = o.config_path.empty() ? PipelineConfig{} : PipelineConfig::load(o.config_path);
  auto set = [](auto& target, const auto& value) {
    if (value) target = *value;
  };
  set(cfg.phantom.count, o.count);
  set(cfg.phantom.mix.healthy, o.healthy);
  set(cfg.phantom.mix.fa, o.fa);
  set(cfg.phantom.mix.calcified, o.calcified);
  set(cfg.phantom.noise_sigma, o.noise_sigma);
  set(cfg.preprocess.radial_samples, o.radial_samples);
  set(cfg.preprocess.sigma, o.sigma);
  set(cfg.preprocess.delta, o.delta);
  set(cfg.lgi_window, o.lgi_window);
  set(cfg.train.alpha, o.alpha);
  set(cfg.train.min_width, o.min_width);
  set(cfg.model.channels, o.channels);
  set(cfg.model.heads, o.heads);
  set(cfg.train.lr0, o.lr0);
  if (o.optimizer) cfg.train.optimizer.kind = nn::parse_optimizer(*o.optimizer);
  if (o.no_partition) cfg.model.partition = false;
  if (o.no_cluster) cfg.cluster.enabled = false;
  set(cfg.cluster.cut_distance, o.cut_distance);
  set(cfg.cluster.autoencoder.lambda, o.lambda);
  set(cfg.cluster.autoencoder.latent, o.latent);
  set(cfg.infer.threshold, o.threshold);
  set(cfg.infer.noise_min_run, o.noise_min_run);
  if (o.noise_rule) cfg.infer.noise_rule = parse_noise_rule(*o.noise_rule);
  // --seed, --epochs and --batch-size address the stage being run
  if (command == "phantom") set(cfg.phantom.seed, o.seed);
  if (command == "train") {
    set(cfg.train.seed, o.seed);
    set(cfg.train.epochs, o.epochs);
    set(cfg.train.batch_size, o.batch_size);
  }
  if (command == "cluster") {
    set(cfg.cluster.autoencoder.seed, o.seed);
    set(cfg.cluster.autoencoder.epochs, o.epochs);
    set(cfg.cluster.autoencoder.batch_size, o.batch_size);
  }
  cfg.validate();
  return cfg;
}

void write_manifest(const fs::path& path, const json& manifest) {
  io::write_json(path, manifest);
  spdlog::info("wrote {}", path.string());
}

// ---------------------------------------------------------------- phantom

int cmd_phantom(const Overrides& o, const fs::path& out) {
  const PipelineConfig cfg = resolve(o, "phantom");
  const Workspace ws(out);
  spdlog::info("generating {} phantom frames (seed {})", cfg.phantom.count, cfg.phantom.seed);
  const std::vector<PhantomFrame> frames =
      generate_dataset(cfg.phantom.count, cfg.phantom.mix, cfg.phantom.seed, DatasetOptions{cfg.phantom.noise_sigma});
  const int n = static_cast<int>(frames.size());
  std::vector<std::string> ids(frames.size());
  for (int i = 0; i < n; ++i) ids[i] = frame_id(i, n);

  parallel_for(n, [&](int i) {
    const PhantomFrame& f = frames[i];
    io::write_cartesian(ws.path("frames/" + ids[i] + ".f32"), f.frame);
    io::write_json(ws.path("annotations/" + ids[i] + ".json"), io::annotation_to_json(f.truth.annotation));
    io::write_json(ws.path("truth/" + ids[i] + "_lumen.json"), io::trace_to_json(f.truth.lumen));
  });

  FileLedger inputs(ws);
  FileLedger outputs(ws);
  json list = json::array();
  std::map<std::string, int> counts;
  for (int i = 0; i < n; ++i) {
    const std::string cls(phantom_class_name(frames[i].cls));
    ++counts[cls];
    list.push_back({{"id", ids[i]},
                    {"class", cls},
                    {"frame", "frames/" + ids[i] + ".f32"},
                    {"annotation", "annotations/" + ids[i] + ".json"},
                    {"lumenTruth", "truth/" + ids[i] + "_lumen.json"},
                    {"seed", derive_seed(cfg.phantom.seed, static_cast<std::uint64_t>(i))}});
    outputs.add_with_sidecar(ws.path("frames/" + ids[i] + ".f32"));
    outputs.add(ws.path("annotations/" + ids[i] + ".json"));
    outputs.add(ws.path("truth/" + ids[i] + "_lumen.json"));
  }
  write_manifest(ws.path("dataset.json"), stage_manifest("phantom", cfg, cfg.phantom.seed, inputs, outputs,
                                                         {{"frames", list}, {"classCounts", counts}}));
  return 0;
}

// ------------------------------------------------------------- preprocess

int cmd_preprocess(const Overrides& o, const fs::path& work) {
  const PipelineConfig cfg = resolve(o, "preprocess");
  const Workspace ws(work);
  const std::vector<DatasetEntry> entries = ws.dataset();
  const int n = static_cast<int>(entries.size());
  spdlog::info("preprocessing {} frames", n);
  parallel_for(n, [&](int i) {
    const DatasetEntry& e = entries[i];
    const PreprocessResult r = preprocess_frame(io::read_cartesian(ws.path(e.frame)), cfg.preprocess);
    io::write_frame(ws.path(Workspace::unfolded_path(e.id)), r.unfolded.pixels, {.domain = "unfolded"});
    io::write_json(ws.path(Workspace::trace_path(e.id, "lumen")), io::trace_to_json(r.lumen));
    io::write_json(ws.path(Workspace::trace_path(e.id, "ap")), io::trace_to_json(r.ap));
  });
  FileLedger inputs(ws);
  FileLedger outputs(ws);
  inputs.add(ws.path("dataset.json"));
  for (const DatasetEntry& e : entries) {
    inputs.add_with_sidecar(ws.path(e.frame));
    outputs.add_with_sidecar(ws.path(Workspace::unfolded_path(e.id)));
    outputs.add(ws.path(Workspace::trace_path(e.id, "lumen")));
    outputs.add(ws.path(Workspace::trace_path(e.id, "ap")));
  }
  write_manifest(ws.path("preprocess_manifest.json"), stage_manifest("preprocess", cfg, 0, inputs, outputs));
  return 0;
}

// -------------------------------------------------------------------- aux

int cmd_aux(const Overrides& o, const fs::path& work, const std::vector<std::string>& kinds_in) {
  const PipelineConfig cfg = resolve(o, "aux");
  const Workspace ws(work);
  std::vector<AuxKind> kinds;
  for (const std::string& k : kinds_in) kinds.push_back(parse_aux_kind(k));
  if (kinds.empty()) kinds = {AuxKind::kGradient, AuxKind::kLongRangeGradient, AuxKind::kBinaryMask};
  const std::vector<DatasetEntry> entries = ws.dataset();
  const int n = static_cast<int>(entries.size());
  spdlog::info("building auxiliary images for {} frames", n);
  parallel_for(n, [&](int i) {
    const DatasetEntry& e = entries[i];
    UnfoldedFrame uf;
    uf.pixels = io::read_frame(ws.path(Workspace::unfolded_path(e.id)));
    for (AuxKind kind : kinds) {
      AuxiliaryImage img;
      if (kind == AuxKind::kGradient) {
        img = gradient_image(uf);
      } else if (kind == AuxKind::kLongRangeGradient) {
        img = long_range_gradient(uf, cfg.lgi_window);
      } else {
        const BorderTrace ap = io::trace_from_json(io::read_json(ws.path(Workspace::trace_path(e.id, "ap"))),
                                                   BorderKind::kAdventitiaPeriadventitia);
        img = binary_mask(uf, ap);
      }
      const std::string name(aux_name(kind));
      io::write_frame(ws.path(Workspace::aux_path(e.id, name)), img.pixels, {.domain = "unfolded", .kind = name});
    }
  });
  FileLedger inputs(ws);
  FileLedger outputs(ws);
  for (const DatasetEntry& e : entries) {
    inputs.add_with_sidecar(ws.path(Workspace::unfolded_path(e.id)));
    inputs.add(ws.path(Workspace::trace_path(e.id, "ap")));
    for (AuxKind kind : kinds)
      outputs.add_with_sidecar(ws.path(Workspace::aux_path(e.id, std::string(aux_name(kind)))));
  }
  write_manifest(ws.path("aux_manifest.json"), stage_manifest("aux", cfg, 0, inputs, outputs));
  return 0;
}

// ---------------------------------------------------------------- cluster

int cmd_cluster(const Overrides& o, const fs::path& work) {
  const PipelineConfig cfg = resolve(o, "cluster");
  const Workspace ws(work);
  const std::vector<DatasetEntry> entries = ws.dataset();
  const int n = static_cast<int>(entries.size());
  std::vector<Image> frames(entries.size());
  parallel_for(n, [&](int i) { frames[i] = io::read_frame(ws.path(Workspace::unfolded_path(entries[i].id))); });

  FileLedger inputs(ws);
  FileLedger outputs(ws);
  for (const DatasetEntry& e : entries) inputs.add_with_sidecar(ws.path(Workspace::unfolded_path(e.id)));

  ClusterAssignment assignment;
  json extra = json::object();
  if (cfg.cluster.enabled) {
    spdlog::info("training autoencoder on {} frames", n);
    const Autoencoder ae = train_autoencoder(frames, cfg.cluster.autoencoder, [](const AutoencoderEpoch& e) {
      spdlog::info("autoencoder epoch {} reconstruction {:.6f} loss {:.6f}", e.epoch, e.reconstruction, e.loss);
    });
    std::vector<std::vector<double>> vectors(frames.size());
    const Autoencoder frozen = ae.frozen();
    parallel_for(n, [&](int i) { vectors[i] = embed(frozen, frames[i]); });
    assignment = agglomerate(vectors, cfg.cluster.cut_distance);
    io::write_weights(ws.path("cluster/autoencoder.f32"), ae.parameters(),
                      {{"latent", ae.latent}, {"seed", cfg.cluster.autoencoder.seed}});
    outputs.add_with_sidecar(ws.path("cluster/autoencoder.f32"));
  } else {
    assignment = single_cluster(n);
  }

  std::vector<std::string> ids;
  for (const DatasetEntry& e : entries) ids.push_back(e.id);
  io::write_json(ws.path("cluster/assignment.json"), io::assignment_to_json(ids, assignment.cluster_of));
  outputs.add(ws.path("cluster/assignment.json"));

  extra["clusters"] = assignment.count();
  std::map<std::string, int> class_ids;
  std::vector<int> classes;
  for (const DatasetEntry& e : entries) {
    if (e.cls.empty()) break;
    classes.push_back(class_ids.emplace(e.cls, static_cast<int>(class_ids.size())).first->second);
  }
  if (classes.size() == entries.size()) extra["purity"] = cluster_purity(assignment.cluster_of, classes);
  spdlog::info("{} clusters", assignment.count());
  write_manifest(ws.path("cluster/manifest.json"),
                 stage_manifest("cluster", cfg, cfg.cluster.autoencoder.seed, inputs, outputs, extra));
  return 0;
}

// ------------------------------------------------------------------ train

int cmd_train(const Overrides& o, const fs::path& work, const std::string& name, const std::string& assignment_path) {
  const PipelineConfig cfg = resolve(o, "train");
  const Workspace ws(work);
  const std::vector<DatasetEntry> entries = ws.dataset();
  const int n = static_cast<int>(entries.size());
  std::vector<TrainingSample> samples(entries.size());
  parallel_for(n, [&](int i) {
    samples[i].images = ws.modality_images(entries[i]);
    samples[i].annotation = ws.annotation(entries[i]);
  });

  FileLedger inputs(ws);
  FileLedger outputs(ws);
  for (const DatasetEntry& e : entries) {
    inputs.add_with_sidecar(ws.path(Workspace::unfolded_path(e.id)));
    for (const char* k : {"gi", "lgi", "bmi"}) inputs.add_with_sidecar(ws.path(Workspace::aux_path(e.id, k)));
    inputs.add(ws.path(e.annotation));
  }

  std::vector<int> cluster_of(entries.size(), 0);
  if (cfg.cluster.enabled) {
    const fs::path p = assignment_path.empty() ? ws.path("cluster/assignment.json") : fs::path(assignment_path);
    if (!fs::exists(p)) {
      throw Error(ErrorCode::kIo, p.string() + " not found; run `cluster` first or pass --no-cluster");
    }
    std::vector<std::string> ids;
    for (const DatasetEntry& e : entries) ids.push_back(e.id);
    cluster_of = io::assignment_from_json(io::read_json(p), ids);
    if (assignment_path.empty()) inputs.add(p);
  }

  spdlog::info("training {} model on {} frames for {} epochs", cfg.model.partition ? "partition" : "whole-frame", n,
               cfg.train.epochs);
  std::string log_text;
  const FiatNet net = train(samples, cluster_of, cfg.model, cfg.train, [&](const TrainLogEntry& e) {
    const json line = {{"epoch", e.epoch}, {"iteration", e.iteration}, {"loss", e.loss}, {"lr", e.lr}};
    log_text += line.dump() + "\n";
    if (e.iteration % 25 == 0)
      spdlog::info("epoch {} iteration {} loss {:.5f} lr {:.3e}", e.epoch, e.iteration, e.loss, e.lr);
  });

  const fs::path weights = ws.path(name + "/weights.f32");
  io::write_weights(weights, net.parameters(), {{"config", cfg.to_json()}, {"seed", cfg.train.seed}});
  io::write_text(ws.path(name + "/train_log.jsonl"), log_text);
  outputs.add_with_sidecar(weights);
  outputs.add(ws.path(name + "/train_log.jsonl"));
  write_manifest(ws.path(name + "/manifest.json"), stage_manifest("train", cfg, cfg.train.seed, inputs, outputs));
  return 0;
}

// ------------------------------------------------------------------ infer

int cmd_infer(const Overrides& o, const fs::path& work, const std::string& model_path, const std::string& name,
              bool oracle, bool overlays) {
  PipelineConfig cfg = resolve(o, "infer");
  const Workspace ws(work);
  const std::vector<DatasetEntry> entries = ws.dataset();
  const int n = static_cast<int>(entries.size());

  std::optional<FiatNet> net;
  json model_info = nullptr;
  if (!oracle) {
    if (model_path.empty()) throw Error(ErrorCode::kConfig, "infer needs --model unless --oracle is given");
    const json manifest = io::read_json(io::sidecar_path(model_path));
    if (!manifest.contains("config")) throw Error(ErrorCode::kIo, "weights manifest lacks the config snapshot");
    PipelineConfig model_cfg;
    model_cfg.apply(manifest["config"]);
    cfg.model = model_cfg.model;
    cfg.train.alpha = model_cfg.train.alpha;
    cfg.train.min_width = model_cfg.train.min_width;
    net = FiatNet::init(cfg.model, 0);
    io::read_weights(model_path, net->parameters());
    model_info = {{"weightsSha256", io::sha256_file(model_path)},
                  {"manifestSha256", io::sha256_file(io::sidecar_path(model_path))}};
  }

  const BpTree tree = BpTree::build(cfg.train.min_width);
  std::vector<int> visited(entries.size(), 0);
  parallel_for(n, [&](int i) {
    const DatasetEntry& e = entries[i];
    std::vector<double> confidence;
    Image unfolded;
    if (oracle) {
      const SearchResult r = inference_search(tree, presence_oracle(ws.annotation(e)), cfg.train.alpha);
      confidence = r.confidence;
      visited[i] = r.visited;
      if (overlays) unfolded = io::read_frame(ws.path(Workspace::unfolded_path(e.id)));
    } else {
      const ModalityImages images = ws.modality_images(e);
      confidence = predict_confidence(*net, images, cfg.train.alpha, cfg.train.min_width, &visited[i]);
      unfolded = images[kOF];
    }
    const std::vector<int> labels = suppress_noise(threshold_labels(confidence, cfg.infer.threshold),
                                                   cfg.infer.noise_min_run, cfg.infer.noise_rule);
    io::write_json(ws.path(name + "/" + e.id + "_confidence.json"), confidence);
    io::write_json(ws.path(name + "/" + e.id + "_labels.json"), labels);
    if (overlays) io::write_pgm(ws.path(name + "/overlays/" + e.id + ".pgm"), io::overlay_image(unfolded, labels));
  });

  FileLedger inputs(ws);
  FileLedger outputs(ws);
  long total_visited = 0;
  for (int i = 0; i < n; ++i) {
    const DatasetEntry& e = entries[i];
    total_visited += visited[i];
    if (oracle) {
      inputs.add(ws.path(e.annotation));
    } else {
      inputs.add_with_sidecar(ws.path(Workspace::unfolded_path(e.id)));
      for (const char* k : {"gi", "lgi", "bmi"}) inputs.add_with_sidecar(ws.path(Workspace::aux_path(e.id, k)));
    }
    outputs.add(ws.path(name + "/" + e.id + "_confidence.json"));
    outputs.add(ws.path(name + "/" + e.id + "_labels.json"));
    if (overlays) outputs.add(ws.path(name + "/overlays/" + e.id + ".pgm"));
  }
  const json extra = {{"oracle", oracle},
                      {"model", model_info},
                      {"visitedNodes", total_visited},
                      {"treeNodes", tree.size()},
                      {"frames", n}};
  write_manifest(ws.path(name + "/manifest.json"), stage_manifest("infer", cfg, 0, inputs, outputs, extra));
  return 0;
}

// ------------------------------------------------------------------- eval

int cmd_eval(const Overrides& o, const fs::path& work, const std::string& name, bool csv) {
  const PipelineConfig cfg = resolve(o, "eval");
  const Workspace ws(work);
  const std::vector<DatasetEntry> entries = ws.dataset();
  FileLedger inputs(ws);
  FileLedger outputs(ws);
  std::vector<std::vector<int>> preds;
  std::vector<AngleAnnotation> gts;
  std::vector<double> confidence;
  std::vector<int> truth;
  for (const DatasetEntry& e : entries) {
    const fs::path lp = ws.path(name + "/" + e.id + "_labels.json");
    const fs::path cp = ws.path(name + "/" + e.id + "_confidence.json");
    const std::vector<double> lv = io::doubles_from_json(io::read_json(lp), kAngles);
    std::vector<int> labels(lv.begin(), lv.end());
    const std::vector<double> cv = io::doubles_from_json(io::read_json(cp), kAngles);
    gts.push_back(ws.annotation(e));
    preds.push_back(std::move(labels));
    confidence.insert(confidence.end(), cv.begin(), cv.end());
    truth.insert(truth.end(), gts.back().labels.begin(), gts.back().labels.end());
    inputs.add(lp);
    inputs.add(cp);
    inputs.add(ws.path(e.annotation));
  }
  const ConfusionCounts counts = confusion(preds, gts);
  const Scores s = scores(counts);
  std::optional<double> auc_value;
  if (counts.tp + counts.fn > 0 && counts.tn + counts.fp > 0) auc_value = auc(confidence, truth);
  const json report = io::report_to_json(s, auc_value, counts);
  io::write_json(ws.path(name + "/report.json"), report);
  outputs.add(ws.path(name + "/report.json"));
  if (csv) {
    io::write_text(ws.path(name + "/report.csv"), io::report_csv_header() + io::report_csv_row(s, auc_value, counts));
    outputs.add(ws.path(name + "/report.csv"));
  }
  write_manifest(ws.path(name + "/eval_manifest.json"), stage_manifest("eval", cfg, 0, inputs, outputs));
  std::cout << report.dump(2) << '\n';
  return 0;
}

// -------------------------------------------------------------- gradcheck

int cmd_gradcheck(std::uint64_t seed, int channels, int levels, double eps, double tolerance, const std::string& out) {
  if (channels < 1 || levels < 1 || !(eps > 0.0) || !(tolerance > 0.0)) {
    throw Error(ErrorCode::kConfig, "gradcheck needs positive channels, levels, eps and tolerance");
  }
  const std::vector<GradCheckEntry> checks = standard_grad_checks(seed, channels, levels, eps);
  json list = json::array();
  bool pass = true;
  for (const GradCheckEntry& c : checks) {
    const bool ok = c.max_relative_error < tolerance;
    pass = pass && ok;
    list.push_back(
        {{"name", c.name}, {"maxRelativeError", c.max_relative_error}, {"parameters", c.parameters}, {"pass", ok}});
  }
  const json report = {{"seed", seed},           {"channels", channels}, {"levels", levels}, {"eps", eps},
                       {"tolerance", tolerance}, {"checks", list},       {"pass", pass}};
  if (!out.empty()) io::write_json(out, report);
  std::cout << report.dump(2) << '\n';
  if (!pass) return report_error("GradCheckFailed", ErrorClass::kNumerical, "a gradient check exceeded the tolerance");
  return 0;
}

// ------------------------------------------------------------------- main

void add_config(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON pipeline config (flags override it)")->check(CLI::ExistingFile);
}

int run(int argc, char** argv) {
  CLI::App app{"Fibroatheroma angular-extent pipeline on intravascular OCT frames"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fiatnet 0.1.0");
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");
  app.footer(std::string("Environment: ") + kWorkersEnv +
             " sets the worker thread count.\nPrecedence: built-in defaults < --config file < flags.");

  Overrides o;
  std::string out_dir, work_dir, model_name = "model", pred_name = "predictions", eval_name = "predictions", model_path,
                                 assignment_path, gc_out;
  std::vector<std::string> kinds;
  bool oracle = false, no_overlays = false, csv = false;
  std::uint64_t gc_seed = 1;
  int gc_channels = 4, gc_levels = 3;
  double gc_eps = 1e-5, gc_tol = 1e-4;

  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic phantom dataset");
  add_config(phantom, o);
  phantom->add_option("--out", out_dir, "Workspace directory to create")->required();
  phantom->add_option("--count", o.count, "Number of frames");
  phantom->add_option("--seed", o.seed, "Dataset seed");
  phantom->add_option("--noise-sigma", o.noise_sigma, "Speckle noise standard deviation");
  phantom->add_option("--healthy", o.healthy, "Class weight of healthy frames");
  phantom->add_option("--fa", o.fa, "Class weight of fibroatheroma frames");
  phantom->add_option("--calcified", o.calcified, "Class weight of calcified frames");

  auto* pre = app.add_subcommand("preprocess", "Polar transform, lumen/AP borders and unfolding");
  add_config(pre, o);
  pre->add_option("--work", work_dir, "Workspace directory")->required()->check(CLI::ExistingDirectory);
  pre->add_option("--sigma", o.sigma, "Derivative-of-Gaussian scale");
  pre->add_option("--delta", o.delta, "Border smoothness constraint");
  pre->add_option("--radial-samples", o.radial_samples, "Polar radial samples");

  auto* aux = app.add_subcommand("aux", "Build GI, LGI and BMI auxiliary images");
  add_config(aux, o);
  aux->add_option("--work", work_dir, "Workspace directory")->required()->check(CLI::ExistingDirectory);
  aux->add_option("-m,--lgi-window,--wgi-window", o.lgi_window, "Window length of the long-range gradient image");
  aux->add_option("--kind", kinds, "Subset of gi, lgi (or wgi), bmi; default all");

  auto* cluster = app.add_subcommand("cluster", "Autoencoder embedding and agglomerative frame clustering");
  add_config(cluster, o);
  cluster->add_option("--work", work_dir, "Workspace directory")->required()->check(CLI::ExistingDirectory);
  cluster->add_option("--cut-distance", o.cut_distance, "Dendrogram cut (cosine distance)");
  cluster->add_option("--latent", o.latent, "Latent size");
  cluster->add_option("--lambda", o.lambda, "L2 weight penalty");
  cluster->add_option("--epochs", o.epochs, "Autoencoder epochs");
  cluster->add_option("--batch-size", o.batch_size, "Autoencoder batch size");
  cluster->add_option("--seed", o.seed, "Autoencoder seed");
  cluster->add_flag("--no-cluster", o.no_cluster, "Skip the autoencoder and put every frame in one cluster");

  auto* train_cmd = app.add_subcommand("train", "Train the attention model");
  add_config(train_cmd, o);
  train_cmd->add_option("--work", work_dir, "Workspace directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--name", model_name, "Output subdirectory")->capture_default_str();
  train_cmd->add_option("--assignment", assignment_path, "Cluster assignment JSON (default cluster/assignment.json)");
  train_cmd->add_option("--epochs", o.epochs, "Epochs");
  train_cmd->add_option("--batch-size", o.batch_size, "Frames per batch");
  train_cmd->add_option("--lr0", o.lr0, "Initial learning rate");
  train_cmd->add_option("--optimizer", o.optimizer, "sgd, momentum or adam");
  train_cmd->add_option("--channels", o.channels, "Encoder channels C");
  train_cmd->add_option("--heads", o.heads, "Attention heads");
  train_cmd->add_option("--alpha", o.alpha, "BPT alpha");
  train_cmd->add_option("--min-width", o.min_width, "BPT minimum split width");
  train_cmd->add_option("--seed", o.seed, "Training seed");
  train_cmd->add_flag("--no-partition", o.no_partition, "Whole-frame variant without the partition tree");
  train_cmd->add_flag("--no-cluster", o.no_cluster, "Unstratified batches");

  auto* infer = app.add_subcommand("infer", "Partition-tree search over a frame set");
  add_config(infer, o);
  infer->add_option("--work", work_dir, "Workspace directory")->required()->check(CLI::ExistingDirectory);
  infer->add_option("--model", model_path, "weights.f32 written by train")->check(CLI::ExistingFile);
  infer->add_option("--name", pred_name, "Output subdirectory")->capture_default_str();
  infer->add_flag("--oracle", oracle, "Use the annotation presence oracle instead of a model");
  infer->add_flag("--no-overlays", no_overlays, "Skip PGM overlays");
  infer->add_option("--threshold", o.threshold, "Confidence threshold");
  infer->add_option("--noise-min-run", o.noise_min_run, "Noise suppression run length");
  infer->add_option("--noise-rule", o.noise_rule, "isolated-short-runs or isolated-pairs");

  auto* eval = app.add_subcommand("eval", "Angle-level metrics report");
  add_config(eval, o);
  eval->add_option("--work", work_dir, "Workspace directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--name", eval_name, "Predictions subdirectory")->capture_default_str();
  eval->add_flag("--csv", csv, "Also write report.csv");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gc->add_option("--seed", gc_seed, "Seed of the random toy problems");
  gc->add_option("--channels", gc_channels, "Channels C");
  gc->add_option("--levels", gc_levels, "Path levels m");
  gc->add_option("--eps", gc_eps, "Central difference step");
  gc->add_option("--tolerance", gc_tol, "Maximum relative error");
  gc->add_option("--out", gc_out, "Also write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("UsageError", ErrorClass::kConfig, e.what());
  }

  spdlog::set_default_logger(spdlog::default_logger());
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");
  apply_worker_env();

  if (*phantom) return cmd_phantom(o, out_dir);
  if (*pre) return cmd_preprocess(o, work_dir);
  if (*aux) return cmd_aux(o, work_dir, kinds);
  if (*cluster) return cmd_cluster(o, work_dir);
  if (*train_cmd) return cmd_train(o, work_dir, model_name, assignment_path);
  if (*infer) return cmd_infer(o, work_dir, model_path, pred_name, oracle, !no_overlays);
  if (*eval) return cmd_eval(o, work_dir, eval_name, csv);
  if (*gc) return cmd_gradcheck(gc_seed, gc_channels, gc_levels, gc_eps, gc_tol, gc_out);
  return 0;
}

}  // namespace
}  // namespace fiatnet::cli

int main(int argc, char** argv) {
  using namespace fiatnet;
  try {
    return cli::run(argc, argv);
  } catch (const Error& e) {
    return cli::report_error(error_name(e.code()), error_class(e.code()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return cli::report_error("IoError", ErrorClass::kData, e.what());
  } catch (const nlohmann::json::exception& e) {
    return cli::report_error("IoError", ErrorClass::kData, e.what());
  } catch (const std::exception& e) {
    return cli::report_error("InternalError", ErrorClass::kData, e.what());
  }
}
