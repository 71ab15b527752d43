#include "fiatnet/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "fiatnet/kernels.hpp"

namespace fiatnet {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kMinEdge = 1e-6;
constexpr int kMinRowLength = 8;

double bilinear(const Image& img, double row, double col) {
  const int r0 = std::clamp(static_cast<int>(std::floor(row)), 0, img.rows - 1);
  const int c0 = std::clamp(static_cast<int>(std::floor(col)), 0, img.cols - 1);
  const int r1 = std::min(r0 + 1, img.rows - 1);
  const int c1 = std::min(c0 + 1, img.cols - 1);
  const double fr = row - r0;
  const double fc = col - c0;
  const double top = img.at(r0, c0) * (1.0 - fc) + img.at(r0, c1) * fc;
  const double bottom = img.at(r1, c0) * (1.0 - fc) + img.at(r1, c1) * fc;
  return top * (1.0 - fr) + bottom * fr;
}

}  // namespace

PolarFrame to_polar(const CartesianFrame& frame, int radial_samples) {
  const Image& img = frame.pixels;
  const double cr = frame.center_row;
  const double cc = frame.center_col;
  if (!(cr > 0.0 && cc > 0.0 && cr < img.rows - 1 && cc < img.cols - 1)) {
    throw Error(ErrorCode::kCenterOutOfBounds, "catheter center lies outside the frame interior");
  }
  if (radial_samples < 32) {
    throw Error(ErrorCode::kBadRange, "polar frames need at least 32 radial samples");
  }
  const double reach = std::min({cr, cc, img.rows - 1 - cr, img.cols - 1 - cc});
  if (radial_samples > reach) {
    throw Error(ErrorCode::kRadiusTooLarge,
                "radial extent " + std::to_string(radial_samples) + " exceeds distance to the frame edge");
  }

  PolarFrame out{Image(kAngles, radial_samples)};
#pragma omp parallel for schedule(static)
  for (int a = 0; a < kAngles; ++a) {
    const double s = std::sin(a * kDegToRad);
    const double c = std::cos(a * kDegToRad);
    for (int r = 0; r < radial_samples; ++r) {
      out.pixels.at(a, r) = bilinear(img, cr + r * s, cc + r * c);
    }
  }
  return out;
}

Image from_polar_nearest(const PolarFrame& polar, int rows, int cols, double center_row, double center_col) {
  Image out(rows, cols);
  const int radial = polar.pixels.cols;
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const double dy = y - center_row;
      const double dx = x - center_col;
      const int r = static_cast<int>(std::lround(std::hypot(dx, dy)));
      if (r >= radial) continue;
      double deg = std::atan2(dy, dx) / kDegToRad;
      if (deg < 0.0) deg += 360.0;
      const int a = static_cast<int>(std::lround(deg)) % kAngles;
      out.at(y, x) = polar.pixels.at(a, r);
    }
  }
  return out;
}

std::vector<double> gaussian_derivative_taps(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kNonPositiveSigma, "sigma must be positive");
  }
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> gauss(2 * half + 1);
  for (int t = -half; t <= half; ++t) gauss[t + half] = std::exp(-0.5 * t * t / (sigma * sigma));
  const double norm = std::accumulate(gauss.begin(), gauss.end(), 0.0);
  std::vector<double> taps(gauss.size());
  for (int t = -half; t <= half; ++t) taps[t + half] = -t / (sigma * sigma) * gauss[t + half] / norm;
  return taps;
}

PolarFrame enhance(const PolarFrame& polar, double sigma) {
  const std::vector<double> taps = gaussian_derivative_taps(sigma);
  PolarFrame out;
  kernels::convolve_rows(polar.pixels, taps, out.pixels);
  return out;
}

SearchBand default_band(BorderKind kind, int radial_samples, int lumen_radius) {
  if (kind == BorderKind::kLumenIntima) return {2, radial_samples - 2};
  return {lumen_radius + 4, radial_samples - 2};
}

BorderTrace detect_border(const PolarFrame& enhanced, BorderKind kind, int delta, SearchBand band,
                          int start_candidates) {
  const Image& e = enhanced.pixels;
  if (e.rows != kAngles) throw Error(ErrorCode::kShapeMismatch, "border detection needs 360 angle rows");
  if (delta < 1) throw Error(ErrorCode::kBadRange, "delta must be at least 1");
  if (band.lo < 0 || band.hi > e.cols || band.lo >= band.hi) {
    throw Error(ErrorCode::kEmptySearchBand, "search band [" + std::to_string(band.lo) + ", " +
                                                 std::to_string(band.hi) + ") is empty or out of range");
  }
  const int width = band.hi - band.lo;
  const double sign = kind == BorderKind::kLumenIntima ? 1.0 : -1.0;

  std::vector<double> cost(static_cast<std::size_t>(kAngles) * width);
  double strongest = 0.0;
  for (int a = 0; a < kAngles; ++a) {
    for (int k = 0; k < width; ++k) {
      const double g = e.at(a, band.lo + k);
      strongest = std::max(strongest, std::abs(g));
      cost[static_cast<std::size_t>(a) * width + k] = -sign * g;
    }
  }
  if (strongest < kMinEdge) throw Error(ErrorCode::kNoEdge, "no radial edge inside the search band");

  std::vector<int> starts(width);
  std::iota(starts.begin(), starts.end(), 0);
  std::stable_sort(starts.begin(), starts.end(), [&](int x, int y) { return cost[x] < cost[y]; });
  starts.resize(std::min<std::size_t>(starts.size(), static_cast<std::size_t>(std::max(1, start_candidates))));

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(width), cur(width);
  std::vector<int> back(static_cast<std::size_t>(kAngles) * width);
  std::vector<int> best_path(kAngles, 0);
  double best_total = kInf;

  for (const int r0 : starts) {
    std::fill(prev.begin(), prev.end(), kInf);
    prev[r0] = cost[r0];
    for (int a = 1; a < kAngles; ++a) {
      const double* ca = cost.data() + static_cast<std::size_t>(a) * width;
      int* ba = back.data() + static_cast<std::size_t>(a) * width;
      for (int k = 0; k < width; ++k) {
        const int lo = std::max(0, k - delta);
        const int hi = std::min(width - 1, k + delta);
        int arg = lo;
        for (int j = lo + 1; j <= hi; ++j) {
          if (prev[j] < prev[arg]) arg = j;
        }
        cur[k] = prev[arg] + ca[k];
        ba[k] = arg;
      }
      std::swap(prev, cur);
    }
    int end = -1;
    for (int k = std::max(0, r0 - delta); k <= std::min(width - 1, r0 + delta); ++k) {
      if (end < 0 || prev[k] < prev[end]) end = k;
    }
    if (end >= 0 && prev[end] < best_total) {
      best_total = prev[end];
      best_path[kAngles - 1] = end;
      for (int a = kAngles - 1; a > 0; --a) {
        best_path[a - 1] = back[static_cast<std::size_t>(a) * width + best_path[a]];
      }
    }
  }

  BorderTrace trace;
  trace.kind = kind;
  trace.radii.resize(kAngles);
  for (int a = 0; a < kAngles; ++a) trace.radii[a] = band.lo + best_path[a];
  return trace;
}

bool trace_is_smooth(const BorderTrace& trace, double delta) {
  const std::size_t n = trace.radii.size();
  for (std::size_t a = 0; a < n; ++a) {
    if (std::abs(trace.radii[(a + 1) % n] - trace.radii[a]) > delta) return false;
  }
  return true;
}

UnfoldedFrame unfold(const PolarFrame& polar, const BorderTrace& lumen) {
  const Image& p = polar.pixels;
  if (static_cast<int>(lumen.radii.size()) != kAngles || p.rows != kAngles) {
    throw Error(ErrorCode::kTraceMismatch, "lumen trace and frame must both cover 360 angles");
  }
  std::vector<int> shift(kAngles);
  int longest = 0;
  for (int a = 0; a < kAngles; ++a) {
    const double r = lumen.radii[a];
    if (!(r >= 0.0) || r >= p.cols) throw Error(ErrorCode::kTraceMismatch, "lumen trace outside the polar frame");
    shift[a] = static_cast<int>(std::lround(r));
    const int remaining = p.cols - shift[a];
    if (remaining < kMinRowLength) {
      throw Error(ErrorCode::kTraceMismatch,
                  "row " + std::to_string(a) + " keeps only " + std::to_string(remaining) + " samples after shifting");
    }
    longest = std::max(longest, remaining);
  }

  UnfoldedFrame out{Image(kAngles, kUnfoldedCols), lumen};
  const double scale = static_cast<double>(longest - 1) / (kUnfoldedCols - 1);
#pragma omp parallel for schedule(static)
  for (int a = 0; a < kAngles; ++a) {
    const int len = p.cols - shift[a];
    // shifted row padded with zeros to `longest`
    auto sample = [&](int k) { return k < len ? p.at(a, shift[a] + k) : 0.0; };
    for (int j = 0; j < kUnfoldedCols; ++j) {
      const double x = j * scale;
      const int k0 = std::min(static_cast<int>(x), longest - 1);
      const int k1 = std::min(k0 + 1, longest - 1);
      const double f = x - k0;
      const double v = f == 0.0 ? sample(k0) : sample(k0) * (1.0 - f) + sample(k1) * f;
      out.pixels.at(a, j) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

PreprocessResult preprocess_frame(const CartesianFrame& frame, const PreprocessConfig& config) {
  PreprocessResult res;
  res.polar = to_polar(frame, config.radial_samples);
  const PolarFrame enhanced = enhance(res.polar, config.sigma);
  res.lumen = detect_border(enhanced, BorderKind::kLumenIntima, config.delta,
                            default_band(BorderKind::kLumenIntima, config.radial_samples), config.start_candidates);
  res.unfolded = unfold(res.polar, res.lumen);
  const PolarFrame unfolded_edges = enhance(PolarFrame{res.unfolded.pixels}, config.sigma);
  res.ap =
      detect_border(unfolded_edges, BorderKind::kAdventitiaPeriadventitia, config.delta,
                    default_band(BorderKind::kAdventitiaPeriadventitia, kUnfoldedCols, 0), config.start_candidates);
  return res;
}

}  // namespace fiatnet
