#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fiatnet {

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  int parameters = 0;  ///< scalar entries compared
};

/// Reverse-mode versus central differences on random toy problems: a
/// linear map, the encoder, both attention blocks, the head, the path loss
/// and a full three-level path through a small model.
std::vector<GradCheckEntry> standard_grad_checks(std::uint64_t seed, int channels = 4, int levels = 3,
                                                 double eps = 1e-5);

}  // namespace fiatnet
