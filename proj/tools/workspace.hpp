#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fiatnet/config.hpp"
#include "fiatnet/io.hpp"
#include "fiatnet/neural.hpp"

namespace fiatnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// One frame listed in a workspace dataset manifest.
struct DatasetEntry {
  std::string id;
  std::string cls;         ///< phantom class name, empty when unknown
  std::string frame;       ///< relative path of the Cartesian frame
  std::string annotation;  ///< relative path, empty when unannotated
};

/// Directory holding a dataset and every artifact derived from it. All
/// paths recorded in manifests are relative to the workspace root, so two
/// workspaces built with the same config are byte-identical.
class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }
  fs::path path(const std::string& rel) const { return root_ / rel; }
  std::string rel(const fs::path& p) const;

  std::vector<DatasetEntry> dataset() const;
  AngleAnnotation annotation(const DatasetEntry& e) const;

  /// Unfolded frame plus GI, LGI and BMI produced by `preprocess` and `aux`.
  ModalityImages modality_images(const DatasetEntry& e) const;

  static std::string unfolded_path(const std::string& id) { return "unfolded/" + id + ".f32"; }
  static std::string trace_path(const std::string& id, const char* which) {
    return "traces/" + id + "_" + which + ".json";
  }
  static std::string aux_path(const std::string& id, const std::string& kind) {
    return "aux/" + id + "_" + kind + ".f32";
  }

 private:
  fs::path root_;
};

/// Accumulates the sha256 of every file a command reads or writes.
class FileLedger {
 public:
  explicit FileLedger(const Workspace& ws) : ws_(&ws) {}
  void add(const fs::path& p);
  /// Adds a raw f32 file together with its JSON sidecar.
  void add_with_sidecar(const fs::path& p);
  json to_json() const;

 private:
  const Workspace* ws_;
  std::map<std::string, std::string> files_;
};

/// {"command", "config", "seed", "inputs", "outputs", ...extra}; no clocks,
/// hostnames or absolute paths.
json stage_manifest(const std::string& command, const PipelineConfig& cfg, std::uint64_t seed, const FileLedger& inputs,
                    const FileLedger& outputs, const json& extra = json::object());

std::string frame_id(int index, int count);

}  // namespace fiatnet::cli
