#pragma once

#include <vector>

#include "fiatnet/common.hpp"

namespace fiatnet {

/// Grayscale Cartesian OCT frame with a sub-pixel catheter center.
struct CartesianFrame {
  Image pixels;
  double center_row = 0.0;
  double center_col = 0.0;
};

/// 360 angle rows (row a is the ray a degrees clockwise from 3 o'clock) by
/// R_raw radial samples.
struct PolarFrame {
  Image pixels;
};

enum class BorderKind { kLumenIntima, kAdventitiaPeriadventitia };

/// Per-angle radial position of a surface, in samples of the frame it indexes.
/// Detected traces are integer valued; analytic ground truth may be fractional.
struct BorderTrace {
  std::vector<double> radii;
  BorderKind kind = BorderKind::kLumenIntima;
};

/// Polar frame shifted so the lumen border is column 0, resized to 360x128.
struct UnfoldedFrame {
  Image pixels;
  BorderTrace source_trace;
};

/// Half-open radial band [lo, hi) searched by the border DP.
struct SearchBand {
  int lo = 0;
  int hi = 0;
};

struct PreprocessConfig {
  int radial_samples = 150;
  double sigma = 2.0;
  int delta = 2;
  int start_candidates = 16;
};

PolarFrame to_polar(const CartesianFrame& frame, int radial_samples);

/// Nearest-ray inverse of to_polar; pixels beyond the sampled radius are 0.
Image from_polar_nearest(const PolarFrame& polar, int rows, int cols, double center_row, double center_col);

/// Taps of the first-derivative-of-Gaussian kernel, truncated at +-ceil(3 sigma).
std::vector<double> gaussian_derivative_taps(double sigma);

/// Radial derivative-of-Gaussian response. Positive on dark-to-bright
/// transitions with increasing radius; not renormalized.
PolarFrame enhance(const PolarFrame& polar, double sigma);

SearchBand default_band(BorderKind kind, int radial_samples, int lumen_radius = 0);

/// Minimum-cost closed radial path through the enhanced frame, subject to
/// |r[a+1] - r[a]| <= delta for all a including the 359 -> 0 seam.
BorderTrace detect_border(const PolarFrame& enhanced, BorderKind kind, int delta, SearchBand band,
                          int start_candidates = 16);

UnfoldedFrame unfold(const PolarFrame& polar, const BorderTrace& lumen);

/// True when every adjacent pair (circularly) differs by at most delta.
bool trace_is_smooth(const BorderTrace& trace, double delta);

struct PreprocessResult {
  PolarFrame polar;
  BorderTrace lumen;
  UnfoldedFrame unfolded;
  BorderTrace ap;  ///< detected on the unfolded frame, in unfolded columns
};

/// to_polar -> enhance -> lumen DP -> unfold -> AP DP on the unfolded frame.
PreprocessResult preprocess_frame(const CartesianFrame& frame, const PreprocessConfig& config);

}  // namespace fiatnet
