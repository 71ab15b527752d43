#include "fiatnet/pipeline.hpp"

namespace fiatnet {

ModalityImages modality_images(const PreprocessResult& pre, int lgi_window) {
  ModalityImages out;
  out[kOF] = pre.unfolded.pixels;
  out[kGI] = gradient_image(pre.unfolded).pixels;
  out[kLGI] = long_range_gradient(pre.unfolded, lgi_window).pixels;
  out[kBMI] = binary_mask(pre.unfolded, pre.ap).pixels;
  return out;
}

std::vector<TrainingSample> phantom_samples(std::span<const PhantomFrame> frames, const PreprocessConfig& config,
                                            int lgi_window) {
  std::vector<TrainingSample> out(frames.size());
  const int n = static_cast<int>(frames.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    out[i].images = modality_images(preprocess_frame(frames[i].frame, config), lgi_window);
    out[i].annotation = frames[i].truth.annotation;
  }
  return out;
}

}  // namespace fiatnet
