#include "fiatnet/auxiliary.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <string>

#include "fiatnet/kernels.hpp"

namespace fiatnet {

std::string_view aux_name(AuxKind kind) {
  switch (kind) {
    case AuxKind::kGradient:
      return "gi";
    case AuxKind::kLongRangeGradient:
      return "lgi";
    case AuxKind::kBinaryMask:
      return "bmi";
  }
  return "?";
}

AuxKind parse_aux_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "gi") return AuxKind::kGradient;
  if (lower == "lgi" || lower == "wgi") return AuxKind::kLongRangeGradient;
  if (lower == "bmi") return AuxKind::kBinaryMask;
  throw Error(ErrorCode::kConfig, "unknown auxiliary image kind '" + std::string(name) + "'");
}

void normalize_min_max(Image& img) {
  if (img.px.empty()) return;
  const auto [lo, hi] = std::minmax_element(img.px.begin(), img.px.end());
  const double min = *lo;
  const double range = *hi - *lo;
  if (!(range > 0.0)) {
    std::fill(img.px.begin(), img.px.end(), 0.0);
    return;
  }
  for (double& v : img.px) v = (v - min) / range;
}

Image gradient_raw(const Image& frame) {
  static constexpr std::array<double, 3> kTaps = {-1.0, 0.0, 1.0};
  Image out;
  kernels::convolve_rows(frame, kTaps, out);
  return out;
}

AuxiliaryImage gradient_image(const UnfoldedFrame& frame) {
  AuxiliaryImage out{gradient_raw(frame.pixels), AuxKind::kGradient};
  normalize_min_max(out.pixels);
  return out;
}

Image long_range_raw(const Image& frame, int m) {
  if (m < 1 || m > 63) throw Error(ErrorCode::kBadRange, "range m must lie in [1, 63], got " + std::to_string(m));
  Image out;
  kernels::long_range_difference(frame, m, out);
  return out;
}

AuxiliaryImage long_range_gradient(const UnfoldedFrame& frame, int m) {
  AuxiliaryImage out{long_range_raw(frame.pixels, m), AuxKind::kLongRangeGradient};
  normalize_min_max(out.pixels);
  return out;
}

AuxiliaryImage binary_mask(const UnfoldedFrame& frame, const BorderTrace& ap) {
  const Image& f = frame.pixels;
  if (static_cast<int>(ap.radii.size()) != f.rows) {
    throw Error(ErrorCode::kTraceMismatch, "AP trace length does not match the frame's angle rows");
  }
  if (ap.kind != BorderKind::kAdventitiaPeriadventitia) {
    throw Error(ErrorCode::kTraceMismatch, "binary mask needs an adventitia-periadventitia trace");
  }
  AuxiliaryImage out{Image(f.rows, f.cols), AuxKind::kBinaryMask};
  for (int a = 0; a < f.rows; ++a) {
    const double s = ap.radii[a];
    if (!(s >= 0.0) || s > f.cols) throw Error(ErrorCode::kTraceMismatch, "AP trace outside the unfolded frame");
    const int filled = static_cast<int>(std::lround(s));
    std::fill_n(out.pixels.row(a).begin(), filled, 1.0);
  }
  return out;
}

}  // namespace fiatnet
