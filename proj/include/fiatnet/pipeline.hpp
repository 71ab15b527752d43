#pragma once

#include <span>
#include <vector>

#include "fiatnet/auxiliary.hpp"
#include "fiatnet/neural.hpp"
#include "fiatnet/phantom.hpp"
#include "fiatnet/preprocess.hpp"

namespace fiatnet {

/// Unfolded frame plus GI, LGI(m) and BMI from the detected AP surface.
ModalityImages modality_images(const PreprocessResult& pre, int lgi_window = 9);

/// Preprocesses phantom frames (frame-parallel) into training samples
/// carrying the phantom annotations.
std::vector<TrainingSample> phantom_samples(std::span<const PhantomFrame> frames, const PreprocessConfig& config,
                                            int lgi_window = 9);

}  // namespace fiatnet
