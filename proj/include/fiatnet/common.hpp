#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fiatnet {

/// Number of one-degree rays in every polar representation.
inline constexpr int kAngles = 360;
/// Radial width of an unfolded frame.
inline constexpr int kUnfoldedCols = 128;

enum class ErrorCode {
  // configuration / usage
  kConfig,
  kBadMinWidth,
  kBadRange,
  kBatchTooSmall,
  kNonPositiveSigma,
  // data
  kIo,
  kCenterOutOfBounds,
  kRadiusTooLarge,
  kEmptySearchBand,
  kNoEdge,
  kTraceMismatch,
  kShapeMismatch,
  kEmptyDataset,
  kEmptyCollection,
  kLengthMismatch,
  kSingleClass,
  kSpecOutOfBounds,
  kZeroVector,
  kClassifierFailure,
  // numerical
  kDivergenceDetected,
};

std::string_view error_name(ErrorCode code) noexcept;

/// Failure class of an error, used to pick a process exit status.
enum class ErrorClass { kConfig, kData, kNumerical };
ErrorClass error_class(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Dense row-major 2-D image of doubles.
struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<double> px;

  Image() = default;
  Image(int r, int c, double fill = 0.0)
      : rows(r), cols(c), px(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  double& at(int r, int c) { return px[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return px[static_cast<std::size_t>(r) * cols + c]; }

  std::span<double> row(int r) {
    return {px.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {px.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }

  bool same_shape(const Image& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Image&) const = default;
};

}  // namespace fiatnet
