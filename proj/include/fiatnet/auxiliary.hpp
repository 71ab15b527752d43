#pragma once

#include <string_view>

#include "fiatnet/common.hpp"
#include "fiatnet/preprocess.hpp"

namespace fiatnet {

enum class AuxKind { kGradient, kLongRangeGradient, kBinaryMask };

std::string_view aux_name(AuxKind kind);
/// Accepts "gi", "lgi", "wgi" (alternate name of the long-range image) and "bmi".
AuxKind parse_aux_kind(std::string_view name);

struct AuxiliaryImage {
  Image pixels;
  AuxKind kind = AuxKind::kGradient;
};

/// Min-max normalization to [0, 1]; a constant image maps to all zeros.
void normalize_min_max(Image& img);

/// [-1, 0, 1] radial convolution before normalization: I(j-1) - I(j+1), replicate edges.
Image gradient_raw(const Image& frame);
AuxiliaryImage gradient_image(const UnfoldedFrame& frame);

/// Left-minus-right window mean difference before normalization.
Image long_range_raw(const Image& frame, int m);
AuxiliaryImage long_range_gradient(const UnfoldedFrame& frame, int m = 9);

/// Row a is 1 on radial columns [0, s_a) and 0 elsewhere.
AuxiliaryImage binary_mask(const UnfoldedFrame& frame, const BorderTrace& ap);

}  // namespace fiatnet
