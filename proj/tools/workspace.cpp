#include "workspace.hpp"

#include <cstdio>

namespace fiatnet::cli {

std::string Workspace::rel(const fs::path& p) const { return p.lexically_relative(root_).generic_string(); }

std::vector<DatasetEntry> Workspace::dataset() const {
  const json doc = io::read_json(path("dataset.json"));
  if (!doc.contains("frames") || !doc["frames"].is_array()) {
    throw Error(ErrorCode::kIo, path("dataset.json").string() + ": missing \"frames\" list");
  }
  std::vector<DatasetEntry> out;
  for (const json& f : doc["frames"]) {
    if (!f.is_object() || !f.contains("id") || !f.contains("frame")) {
      throw Error(ErrorCode::kIo, "dataset entries need \"id\" and \"frame\"");
    }
    DatasetEntry e;
    e.id = f["id"].get<std::string>();
    e.frame = f["frame"].get<std::string>();
    if (f.contains("class")) e.cls = f["class"].get<std::string>();
    if (f.contains("annotation")) e.annotation = f["annotation"].get<std::string>();
    out.push_back(std::move(e));
  }
  if (out.empty()) throw Error(ErrorCode::kEmptyDataset, "dataset lists no frames");
  return out;
}

AngleAnnotation Workspace::annotation(const DatasetEntry& e) const {
  if (e.annotation.empty()) throw Error(ErrorCode::kIo, "frame " + e.id + " has no annotation");
  return io::annotation_from_json(io::read_json(path(e.annotation)));
}

ModalityImages Workspace::modality_images(const DatasetEntry& e) const {
  ModalityImages images;
  images[kOF] = io::read_frame(path(unfolded_path(e.id)));
  images[kGI] = io::read_frame(path(aux_path(e.id, "gi")));
  images[kLGI] = io::read_frame(path(aux_path(e.id, "lgi")));
  images[kBMI] = io::read_frame(path(aux_path(e.id, "bmi")));
  for (const Image& img : images) {
    if (img.rows != kAngles || img.cols != kUnfoldedCols) {
      throw Error(ErrorCode::kShapeMismatch, "frame " + e.id + ": modality images must be 360x128");
    }
  }
  return images;
}

void FileLedger::add(const fs::path& p) { files_[ws_->rel(p)] = io::sha256_file(p); }

void FileLedger::add_with_sidecar(const fs::path& p) {
  add(p);
  add(io::sidecar_path(p));
}

json FileLedger::to_json() const {
  json out = json::object();
  for (const auto& [name, hash] : files_) out[name] = hash;
  return out;
}

json stage_manifest(const std::string& command, const PipelineConfig& cfg, std::uint64_t seed, const FileLedger& inputs,
                    const FileLedger& outputs, const json& extra) {
  json m = extra;
  m["command"] = command;
  m["config"] = cfg.to_json();
  m["seed"] = seed;
  m["inputs"] = inputs.to_json();
  m["outputs"] = outputs.to_json();
  return m;
}

std::string frame_id(int index, int count) {
  int digits = 4;
  for (int n = count - 1; n >= 10000; n /= 10) ++digits;
  char buf[32];
  std::snprintf(buf, sizeof buf, "f%0*d", digits, index);
  return buf;
}

}  // namespace fiatnet::cli
