#include "fiatnet/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fiatnet::io {
namespace {

[[noreturn]] void io_error(const std::string& what) { throw Error(ErrorCode::kIo, what); }

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

void write_f32(const fs::path& path, std::span<const double> values) {
  std::vector<std::uint32_t> raw(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    raw[i] = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
  if (!out) io_error("write failed: " + path.string());
}

std::vector<double> read_f32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % 4 != 0) throw Error(ErrorCode::kShapeMismatch, path.string() + " is not a whole number of f32 values");
  std::vector<std::uint32_t> raw(bytes / 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (!in) io_error("read failed: " + path.string());
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = std::bit_cast<float>(to_le(raw[i]));
  return out;
}

template <typename T>
T field(const json& doc, const char* key, const fs::path& where) {
  if (!doc.is_object() || !doc.contains(key)) io_error(where.string() + ": missing \"" + key + "\"");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    io_error(where.string() + ": bad \"" + key + "\"");
  }
}

}  // namespace

fs::path sidecar_path(const fs::path& data_path) {
  fs::path p = data_path;
  p.replace_extension(".json");
  return p;
}

void write_frame(const fs::path& path, const Image& image, const FrameMeta& meta) {
  write_f32(path, image.px);
  json side = {{"rows", image.rows}, {"cols", image.cols}, {"dtype", "f32"}, {"domain", meta.domain}};
  if (!meta.kind.empty()) side["kind"] = meta.kind;
  if (meta.center_row) side["centerRow"] = *meta.center_row;
  if (meta.center_col) side["centerCol"] = *meta.center_col;
  write_json(sidecar_path(path), side);
}

Image read_frame(const fs::path& path, FrameMeta* meta) {
  const fs::path side_path = sidecar_path(path);
  const json side = read_json(side_path);
  FrameMeta m;
  m.rows = field<int>(side, "rows", side_path);
  m.cols = field<int>(side, "cols", side_path);
  m.domain = field<std::string>(side, "domain", side_path);
  if (field<std::string>(side, "dtype", side_path) != "f32") io_error(side_path.string() + ": dtype must be f32");
  if (m.domain != "cartesian" && m.domain != "polar" && m.domain != "unfolded") {
    io_error(side_path.string() + ": unknown domain \"" + m.domain + "\"");
  }
  if (side.contains("kind")) m.kind = field<std::string>(side, "kind", side_path);
  if (side.contains("centerRow")) m.center_row = field<double>(side, "centerRow", side_path);
  if (side.contains("centerCol")) m.center_col = field<double>(side, "centerCol", side_path);
  if (m.rows < 1 || m.cols < 1) throw Error(ErrorCode::kShapeMismatch, side_path.string() + ": empty frame");

  Image image(m.rows, m.cols);
  std::vector<double> px = read_f32(path);
  if (px.size() != image.px.size()) {
    throw Error(ErrorCode::kShapeMismatch, path.string() + ": holds " + std::to_string(px.size()) +
                                               " values, sidecar says " + std::to_string(m.rows) + "x" +
                                               std::to_string(m.cols));
  }
  image.px = std::move(px);
  if (meta) *meta = std::move(m);
  return image;
}

void write_cartesian(const fs::path& path, const CartesianFrame& frame) {
  FrameMeta meta;
  meta.domain = "cartesian";
  meta.center_row = frame.center_row;
  meta.center_col = frame.center_col;
  write_frame(path, frame.pixels, meta);
}

CartesianFrame read_cartesian(const fs::path& path) {
  FrameMeta meta;
  CartesianFrame frame;
  frame.pixels = read_frame(path, &meta);
  if (meta.domain != "cartesian") io_error(path.string() + ": expected a cartesian frame, got " + meta.domain);
  frame.center_row = meta.center_row.value_or((frame.pixels.rows - 1) / 2.0);
  frame.center_col = meta.center_col.value_or((frame.pixels.cols - 1) / 2.0);
  return frame;
}

void write_pgm(const fs::path& path, const Image& image) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.cols << ' ' << image.rows << "\n255\n";
  std::vector<unsigned char> bytes(image.px.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(image.px[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) io_error("write failed: " + path.string());
}

Image overlay_image(const Image& unfolded, std::span<const int> labels) {
  constexpr int kMark = 4;
  constexpr int kGap = 2;
  constexpr int kLegend = 12;
  if (static_cast<int>(labels.size()) != unfolded.rows) {
    throw Error(ErrorCode::kLengthMismatch, "overlay needs one label per frame row");
  }
  Image out(unfolded.rows, unfolded.cols + kGap + kLegend, 0.5);
  for (int r = 0; r < unfolded.rows; ++r) {
    const auto src = unfolded.row(r);
    std::copy(src.begin(), src.end(), out.row(r).begin());
    const double v = labels[r] ? 1.0 : 0.0;
    if (labels[r]) {
      for (int c = 0; c < std::min(kMark, unfolded.cols); ++c) out.at(r, c) = 1.0;
    }
    for (int c = 0; c < kLegend; ++c) out.at(r, unfolded.cols + kGap + c) = v;
  }
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) io_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    io_error(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) io_error("write failed: " + path.string());
}

json trace_to_json(const BorderTrace& trace) { return trace.radii; }

BorderTrace trace_from_json(const json& doc, BorderKind kind) { return {doubles_from_json(doc, kAngles), kind}; }

std::vector<double> doubles_from_json(const json& doc, std::size_t expected) {
  if (!doc.is_array() || doc.size() != expected) {
    throw Error(ErrorCode::kLengthMismatch, "expected a JSON array of " + std::to_string(expected) + " numbers");
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const json& v : doc) {
    if (!v.is_number()) io_error("non-numeric array entry");
    out.push_back(v.get<double>());
  }
  return out;
}

AngleAnnotation annotation_from_json(const json& doc) {
  if (!doc.is_array()) io_error("annotation must be a JSON array");
  if (!doc.empty() && doc.front().is_object()) {
    std::vector<AngularRegion> intervals;
    for (const json& iv : doc) {
      if (!iv.is_object() || !iv.contains("start") || !iv.contains("end") || !iv["start"].is_number_integer() ||
          !iv["end"].is_number_integer()) {
        io_error("annotation intervals need integer \"start\" and \"end\"");
      }
      intervals.push_back({iv["start"].get<int>(), iv["end"].get<int>()});
    }
    return AngleAnnotation::from_intervals(intervals);
  }
  if (doc.size() != static_cast<std::size_t>(kAngles)) {
    throw Error(ErrorCode::kLengthMismatch, "annotation array must hold 360 entries");
  }
  std::vector<int> values;
  for (const json& v : doc) {
    if (!v.is_number_integer()) io_error("annotation entries must be 0 or 1");
    values.push_back(v.get<int>());
  }
  return AngleAnnotation::from_labels(values);
}

json annotation_to_json(const AngleAnnotation& annotation) {
  json out = json::array();
  for (std::uint8_t v : annotation.labels) out.push_back(static_cast<int>(v));
  return out;
}

void write_weights(const fs::path& path, const nn::ParamList& params, const json& extra) {
  std::vector<double> flat;
  json layers = json::array();
  for (const auto& [name, var] : params) {
    layers.push_back({{"name", name}, {"shape", var->value.shape}, {"offset", flat.size()}});
    flat.insert(flat.end(), var->value.data.begin(), var->value.data.end());
  }
  write_f32(path, flat);
  json manifest = extra;
  manifest["dtype"] = "f32";
  manifest["count"] = flat.size();
  manifest["layers"] = std::move(layers);
  write_json(sidecar_path(path), manifest);
}

json read_weights(const fs::path& path, const nn::ParamList& params) {
  const fs::path side_path = sidecar_path(path);
  const json manifest = read_json(side_path);
  const std::vector<double> flat = read_f32(path);
  const json& layers = manifest.contains("layers") ? manifest["layers"] : json();
  if (!layers.is_array() || layers.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, side_path.string() + ": layer list does not match the model");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, var] = params[i];
    const json& layer = layers[i];
    const auto shape = field<std::vector<int>>(layer, "shape", side_path);
    const auto offset = field<std::size_t>(layer, "offset", side_path);
    if (field<std::string>(layer, "name", side_path) != name || shape != var->value.shape) {
      throw Error(ErrorCode::kShapeMismatch, side_path.string() + ": layer " + std::to_string(i) + " is not " + name +
                                                 " " + nn::shape_string(var->value.shape));
    }
    if (offset + var->value.size() > flat.size()) {
      throw Error(ErrorCode::kShapeMismatch, path.string() + ": truncated weight file");
    }
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), var->value.size(), var->value.data.begin());
  }
  return manifest;
}

json assignment_to_json(std::span<const std::string> frame_ids, std::span<const int> cluster_of) {
  if (frame_ids.size() != cluster_of.size()) throw Error(ErrorCode::kLengthMismatch, "one cluster id per frame");
  json out = json::object();
  for (std::size_t i = 0; i < frame_ids.size(); ++i) out[frame_ids[i]] = cluster_of[i];
  return out;
}

std::vector<int> assignment_from_json(const json& doc, std::span<const std::string> frame_ids) {
  if (!doc.is_object()) io_error("cluster assignment must be a JSON object");
  std::vector<int> out;
  for (const std::string& id : frame_ids) {
    if (!doc.contains(id) || !doc[id].is_number_integer()) io_error("cluster assignment lacks frame " + id);
    out.push_back(doc[id].get<int>());
  }
  return out;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string optional_csv(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

json report_to_json(const Scores& s, std::optional<double> auc_value, const ConfusionCounts& counts) {
  return {{"f1", optional_json(s.f1)},
          {"auc", optional_json(auc_value)},
          {"acc", optional_json(s.acc)},
          {"sen", optional_json(s.sen)},
          {"spe", optional_json(s.spe)},
          {"counts", {{"tp", counts.tp}, {"fp", counts.fp}, {"tn", counts.tn}, {"fn", counts.fn}}}};
}

std::string report_csv_header() { return "f1,auc,acc,sen,spe,tp,fp,tn,fn\n"; }

std::string report_csv_row(const Scores& s, std::optional<double> auc_value, const ConfusionCounts& counts) {
  std::ostringstream out;
  out << optional_csv(s.f1) << ',' << optional_csv(auc_value) << ',' << optional_csv(s.acc) << ','
      << optional_csv(s.sen) << ',' << optional_csv(s.spe) << ',' << counts.tp << ',' << counts.fp << ',' << counts.tn
      << ',' << counts.fn << '\n';
  return out.str();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 15];
  }
  return hex;
}

}  // namespace fiatnet::io
