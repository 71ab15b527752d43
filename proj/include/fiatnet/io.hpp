#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fiatnet/bpt.hpp"
#include "fiatnet/common.hpp"
#include "fiatnet/metrics.hpp"
#include "fiatnet/nn/optim.hpp"
#include "fiatnet/preprocess.hpp"
#include "json.hpp"

namespace fiatnet::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// JSON sidecar of a raw f32 frame file.
struct FrameMeta {
  int rows = 0;
  int cols = 0;
  std::string domain = "unfolded";  ///< cartesian | polar | unfolded
  std::string kind;                 ///< auxiliary image kind, empty for frames
  std::optional<double> center_row;
  std::optional<double> center_col;
};

/// `frame.f32` -> `frame.json`.
fs::path sidecar_path(const fs::path& data_path);

/// Little-endian f32 pixels plus sidecar.
void write_frame(const fs::path& path, const Image& image, const FrameMeta& meta);
Image read_frame(const fs::path& path, FrameMeta* meta = nullptr);

void write_cartesian(const fs::path& path, const CartesianFrame& frame);
CartesianFrame read_cartesian(const fs::path& path);

/// 8-bit binary PGM; values are clamped to [0, 1] and scaled to 0..255.
void write_pgm(const fs::path& path, const Image& image);

/// Unfolded frame with detected FA rows marked: the first four radial
/// columns of each FA row are set to white and a legend strip to the right
/// shows the angular arcs (white = FA).
Image overlay_image(const Image& unfolded, std::span<const int> labels);

json read_json(const fs::path& path);
/// Pretty-printed, newline terminated; parent directories are created.
void write_json(const fs::path& path, const json& doc);
void write_text(const fs::path& path, const std::string& text);

json trace_to_json(const BorderTrace& trace);
BorderTrace trace_from_json(const json& doc, BorderKind kind);

/// Accepts a 360-element 0/1 array or a list of {"start", "end"} intervals.
AngleAnnotation annotation_from_json(const json& doc);
json annotation_to_json(const AngleAnnotation& annotation);

std::vector<double> doubles_from_json(const json& doc, std::size_t expected);

/// Parameters as consecutive f32 arrays in list order; the manifest records
/// name, shape and offset (in floats) of each, plus `extra` fields.
void write_weights(const fs::path& path, const nn::ParamList& params, const json& extra);
/// Loads into existing parameters; names and shapes must match the manifest.
json read_weights(const fs::path& path, const nn::ParamList& params);

json assignment_to_json(std::span<const std::string> frame_ids, std::span<const int> cluster_of);
std::vector<int> assignment_from_json(const json& doc, std::span<const std::string> frame_ids);

json report_to_json(const Scores& s, std::optional<double> auc_value, const ConfusionCounts& counts);
std::string report_csv_header();
std::string report_csv_row(const Scores& s, std::optional<double> auc_value, const ConfusionCounts& counts);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

}  // namespace fiatnet::io
