#pragma once

// Hot loops of the pipeline. Every kernel has an OpenMP implementation in
// `fiatnet::kernels` and a plain-loop reference in `fiatnet::kernels::serial`
// with identical semantics; the references exist for tests and benchmarks.
//
// All parallel kernels give each output element to exactly one thread with a
// fixed summation order, so results do not depend on the thread count.

#include <span>

#include "fiatnet/common.hpp"

namespace fiatnet::kernels {

/// 3x3 convolution, zero padding 1, independent strides per axis.
/// Tensors are channel-major: input [in_ch][in_h][in_w], weights
/// [out_ch][in_ch][3][3], output [out_ch][out_h][out_w].
struct ConvGeometry {
  int in_ch = 1;
  int out_ch = 1;
  int in_h = 1;
  int in_w = 1;
  int stride_h = 1;
  int stride_w = 1;

  int out_h() const { return (in_h - 1) / stride_h + 1; }
  int out_w() const { return (in_w - 1) / stride_w + 1; }
  std::size_t in_size() const { return static_cast<std::size_t>(in_ch) * in_h * in_w; }
  std::size_t out_size() const { return static_cast<std::size_t>(out_ch) * out_h() * out_w(); }
  std::size_t weight_size() const { return static_cast<std::size_t>(out_ch) * in_ch * 9; }
};

/// True convolution along each row with replicate edges:
/// out(r, j) = sum_t taps[t + h] * in(r, clamp(j - t)), t in [-h, h], taps odd length.
void convolve_rows(const Image& in, std::span<const double> taps, Image& out);

/// Windowed left-minus-right mean difference along each row, replicate edges:
/// out(r, j) = mean(in(r, j-m+1 .. j)) - mean(in(r, j+1 .. j+m)).
void long_range_difference(const Image& in, int m, Image& out);

/// out = conv(in, weights) + bias. `bias` may be empty.
void conv3x3_forward(const ConvGeometry& g, std::span<const double> in, std::span<const double> weights,
                     std::span<const double> bias, std::span<double> out);

/// grad_in = d(out)/d(in)^T * grad_out (overwrites grad_in).
void conv3x3_backward_input(const ConvGeometry& g, std::span<const double> grad_out, std::span<const double> weights,
                            std::span<double> grad_in);

/// grad_w (and grad_b when non-empty) from the layer input and grad_out (overwrites).
void conv3x3_backward_weights(const ConvGeometry& g, std::span<const double> in, std::span<const double> grad_out,
                              std::span<double> grad_w, std::span<double> grad_b);

namespace serial {

void convolve_rows(const Image& in, std::span<const double> taps, Image& out);
void long_range_difference(const Image& in, int m, Image& out);
void conv3x3_forward(const ConvGeometry& g, std::span<const double> in, std::span<const double> weights,
                     std::span<const double> bias, std::span<double> out);
void conv3x3_backward_input(const ConvGeometry& g, std::span<const double> grad_out, std::span<const double> weights,
                            std::span<double> grad_in);
void conv3x3_backward_weights(const ConvGeometry& g, std::span<const double> in, std::span<const double> grad_out,
                              std::span<double> grad_w, std::span<double> grad_b);

}  // namespace serial
}  // namespace fiatnet::kernels
