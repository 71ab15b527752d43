#include "fiatnet/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

namespace fiatnet::kernels {
namespace {

// Eight-lane double vectors (GCC/Clang vector extension); lowered to whatever
// SIMD width the target offers.
typedef double v8d __attribute__((vector_size(64)));
constexpr int kLanes = 8;
constexpr int kBlock = 2 * kLanes;  // columns per register tile
constexpr int kChBlock = 8;         // channels per register tile

inline v8d load8(const double* p) {
  v8d v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline double hsum(v8d v) {
  double s = 0.0;
  for (int l = 0; l < kLanes; ++l) s += v[l];
  return s;
}

// Copies [ch][h][w] into rows of `stride` doubles with one zero column on the
// left; the right slack keeps full-tile reads in bounds.
std::vector<double> pad_columns(std::span<const double> src, int ch, int h, int w, int stride) {
  std::vector<double> dst(static_cast<std::size_t>(ch) * h * stride, 0.0);
  for (int r = 0; r < ch * h; ++r) {
    std::copy_n(src.data() + static_cast<std::size_t>(r) * w, w, dst.data() + static_cast<std::size_t>(r) * stride + 1);
  }
  return dst;
}

// Weights regrouped as [block][k][tap][kChBlock] for broadcast in the tile
// loops. Lanes past `n` repeat the last channel and are never stored.
std::vector<double> pack_weights(std::span<const double> weights, int n, int k, bool over_in) {
  const int blocks = (n + kChBlock - 1) / kChBlock;
  std::vector<double> packed(static_cast<std::size_t>(blocks) * k * 9 * kChBlock);
  for (int b = 0; b < blocks; ++b) {
    for (int j = 0; j < k; ++j) {
      for (int t = 0; t < 9; ++t) {
        for (int i = 0; i < kChBlock; ++i) {
          const int ch = std::min(b * kChBlock + i, n - 1);
          // forward: n = out channels, k = in channels; backward: n = in, k = out
          const std::size_t src =
              over_in ? (static_cast<std::size_t>(j) * n + ch) * 9 + t : (static_cast<std::size_t>(ch) * k + j) * 9 + t;
          packed[((static_cast<std::size_t>(b) * k + j) * 9 + t) * kChBlock + i] = weights[src];
        }
      }
    }
  }
  return packed;
}

void store_tile(const v8d (&acc)[kChBlock][2], int channels, int first, int rows, int row, int w, int x0, double* dst) {
  const int n = std::min(kBlock, w - x0);
  for (int i = 0; i < channels; ++i) {
    double tmp[kBlock];
    std::memcpy(tmp, acc[i], sizeof tmp);
    std::copy_n(tmp, n, dst + (static_cast<std::size_t>(first + i) * rows + row) * w + x0);
  }
}

void forward_unit_stride_w(const ConvGeometry& g, std::span<const double> in, std::span<const double> weights,
                           std::span<const double> bias, std::span<double> out) {
  const int w = g.in_w;
  const int ho = g.out_h();
  const int stride = w + 2 + kBlock;
  const std::vector<double> padded = pad_columns(in, g.in_ch, g.in_h, w, stride);
  const std::vector<double> packed = pack_weights(weights, g.out_ch, g.in_ch, false);
  const int blocks = (g.out_ch + kChBlock - 1) / kChBlock;

#pragma omp parallel for collapse(2) schedule(static)
  for (int blk = 0; blk < blocks; ++blk) {
    for (int y = 0; y < ho; ++y) {
      const int ob = blk * kChBlock;
      const int nob = std::min(kChBlock, g.out_ch - ob);
      for (int x0 = 0; x0 < w; x0 += kBlock) {
        v8d acc[kChBlock][2];
        for (int i = 0; i < kChBlock; ++i) {
          const double b0 = bias.empty() ? 0.0 : bias[std::min(ob + i, g.out_ch - 1)];
          acc[i][0] = v8d{} + b0;
          acc[i][1] = v8d{} + b0;
        }
        for (int c = 0; c < g.in_ch; ++c) {
          for (int kh = 0; kh < 3; ++kh) {
            const int iy = y * g.stride_h + kh - 1;
            if (iy < 0 || iy >= g.in_h) continue;
            const double* row = padded.data() + (static_cast<std::size_t>(c) * g.in_h + iy) * stride + x0;
            const double* wk = packed.data() + ((static_cast<std::size_t>(blk) * g.in_ch + c) * 9 + kh * 3) * kChBlock;
            for (int kw = 0; kw < 3; ++kw) {
              const v8d r0 = load8(row + kw);
              const v8d r1 = load8(row + kw + kLanes);
              for (int i = 0; i < kChBlock; ++i) {
                const double wv = wk[kw * kChBlock + i];
                acc[i][0] += wv * r0;
                acc[i][1] += wv * r1;
              }
            }
          }
        }
        store_tile(acc, nob, ob, ho, y, w, x0, out.data());
      }
    }
  }
}

void backward_input_unit_stride_w(const ConvGeometry& g, std::span<const double> grad_out,
                                  std::span<const double> weights, std::span<double> grad_in) {
  const int w = g.in_w;
  const int ho = g.out_h();
  const int stride = w + 2 + kBlock;
  const std::vector<double> padded = pad_columns(grad_out, g.out_ch, ho, w, stride);
  const std::vector<double> packed = pack_weights(weights, g.in_ch, g.out_ch, true);
  const int blocks = (g.in_ch + kChBlock - 1) / kChBlock;

#pragma omp parallel for collapse(2) schedule(static)
  for (int blk = 0; blk < blocks; ++blk) {
    for (int iy = 0; iy < g.in_h; ++iy) {
      const int cb = blk * kChBlock;
      const int ncb = std::min(kChBlock, g.in_ch - cb);
      for (int x0 = 0; x0 < w; x0 += kBlock) {
        v8d acc[kChBlock][2] = {};
        for (int o = 0; o < g.out_ch; ++o) {
          for (int kh = 0; kh < 3; ++kh) {
            const int t = iy + 1 - kh;
            if (t < 0 || t % g.stride_h != 0) continue;
            const int y = t / g.stride_h;
            if (y >= ho) continue;
            const double* row = padded.data() + (static_cast<std::size_t>(o) * ho + y) * stride + x0;
            const double* wk = packed.data() + ((static_cast<std::size_t>(blk) * g.out_ch + o) * 9 + kh * 3) * kChBlock;
            for (int kw = 0; kw < 3; ++kw) {
              // grad_in(ix) gathers grad_out(ix + 1 - kw), i.e. padded index ix + 2 - kw
              const v8d r0 = load8(row + 2 - kw);
              const v8d r1 = load8(row + 2 - kw + kLanes);
              for (int i = 0; i < kChBlock; ++i) {
                const double wv = wk[kw * kChBlock + i];
                acc[i][0] += wv * r0;
                acc[i][1] += wv * r1;
              }
            }
          }
        }
        store_tile(acc, ncb, cb, g.in_h, iy, w, x0, grad_in.data());
      }
    }
  }
}

void backward_weights_unit_stride_w(const ConvGeometry& g, std::span<const double> in, std::span<const double> grad_out,
                                    std::span<double> grad_w, std::span<double> grad_b) {
  const int w = g.in_w;
  const int ho = g.out_h();
  const int stride = w + 2 + kBlock;
  const std::vector<double> padded = pad_columns(in, g.in_ch, g.in_h, w, stride);
  // grad_out rows zero-extended to a whole number of vectors
  const int wv = (w + kLanes - 1) / kLanes * kLanes;
  std::vector<double> gout(static_cast<std::size_t>(g.out_ch) * ho * wv, 0.0);
  for (int r = 0; r < g.out_ch * ho; ++r) {
    std::copy_n(grad_out.data() + static_cast<std::size_t>(r) * w, w, gout.data() + static_cast<std::size_t>(r) * wv);
  }
  constexpr int kOut = 4;
  const int oblocks = (g.out_ch + kOut - 1) / kOut;

#pragma omp parallel for collapse(2) schedule(static)
  for (int blk = 0; blk < oblocks; ++blk) {
    for (int c = 0; c < g.in_ch; ++c) {
      const int ob = blk * kOut;
      const int nob = std::min(kOut, g.out_ch - ob);
      for (int kh = 0; kh < 3; ++kh) {
        v8d acc[kOut][3] = {};
        for (int y = 0; y < ho; ++y) {
          const int iy = y * g.stride_h + kh - 1;
          if (iy < 0 || iy >= g.in_h) continue;
          const double* p = padded.data() + (static_cast<std::size_t>(c) * g.in_h + iy) * stride;
          const double* gr[kOut];
          for (int i = 0; i < kOut; ++i) {
            gr[i] = gout.data() + (static_cast<std::size_t>(std::min(ob + i, g.out_ch - 1)) * ho + y) * wv;
          }
          for (int x = 0; x < wv; x += kLanes) {
            const v8d p0 = load8(p + x);
            const v8d p1 = load8(p + x + 1);
            const v8d p2 = load8(p + x + 2);
            for (int i = 0; i < kOut; ++i) {
              const v8d gv = load8(gr[i] + x);
              acc[i][0] += gv * p0;
              acc[i][1] += gv * p1;
              acc[i][2] += gv * p2;
            }
          }
        }
        for (int i = 0; i < nob; ++i) {
          for (int kw = 0; kw < 3; ++kw) {
            grad_w[((static_cast<std::size_t>(ob + i) * g.in_ch + c) * 3 + kh) * 3 + kw] = hsum(acc[i][kw]);
          }
        }
      }
    }
  }
  if (!grad_b.empty()) {
    for (int o = 0; o < g.out_ch; ++o) {
      double s = 0.0;
      const double* go = grad_out.data() + static_cast<std::size_t>(o) * ho * w;
      for (int k = 0; k < ho * w; ++k) s += go[k];
      grad_b[o] = s;
    }
  }
}

// Strided-width variants: gather formulation, parallel over the owning channel.

void forward_generic(const ConvGeometry& g, std::span<const double> in, std::span<const double> weights,
                     std::span<const double> bias, std::span<double> out) {
  const int ho = g.out_h();
  const int wo = g.out_w();
#pragma omp parallel for schedule(static)
  for (int o = 0; o < g.out_ch; ++o) {
    for (int y = 0; y < ho; ++y) {
      double* orow = out.data() + (static_cast<std::size_t>(o) * ho + y) * wo;
      std::fill_n(orow, wo, bias.empty() ? 0.0 : bias[o]);
      for (int c = 0; c < g.in_ch; ++c) {
        for (int kh = 0; kh < 3; ++kh) {
          const int iy = y * g.stride_h + kh - 1;
          if (iy < 0 || iy >= g.in_h) continue;
          const double* irow = in.data() + (static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w;
          const double* wk = weights.data() + ((static_cast<std::size_t>(o) * g.in_ch + c) * 3 + kh) * 3;
          for (int x = 0; x < wo; ++x) {
            double acc = 0.0;
            for (int kw = 0; kw < 3; ++kw) {
              const int ix = x * g.stride_w + kw - 1;
              if (ix >= 0 && ix < g.in_w) acc += wk[kw] * irow[ix];
            }
            orow[x] += acc;
          }
        }
      }
    }
  }
}

void backward_input_generic(const ConvGeometry& g, std::span<const double> grad_out, std::span<const double> weights,
                            std::span<double> grad_in) {
  const int ho = g.out_h();
  const int wo = g.out_w();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.in_ch; ++c) {
    for (int iy = 0; iy < g.in_h; ++iy) {
      double* grow = grad_in.data() + (static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w;
      std::fill_n(grow, g.in_w, 0.0);
      for (int o = 0; o < g.out_ch; ++o) {
        for (int kh = 0; kh < 3; ++kh) {
          const int t = iy + 1 - kh;
          if (t < 0 || t % g.stride_h != 0) continue;
          const int y = t / g.stride_h;
          if (y >= ho) continue;
          const double* orow = grad_out.data() + (static_cast<std::size_t>(o) * ho + y) * wo;
          const double* wk = weights.data() + ((static_cast<std::size_t>(o) * g.in_ch + c) * 3 + kh) * 3;
          for (int ix = 0; ix < g.in_w; ++ix) {
            double acc = 0.0;
            for (int kw = 0; kw < 3; ++kw) {
              const int u = ix + 1 - kw;
              if (u < 0 || u % g.stride_w != 0) continue;
              const int x = u / g.stride_w;
              if (x < wo) acc += wk[kw] * orow[x];
            }
            grow[ix] += acc;
          }
        }
      }
    }
  }
}

void backward_weights_generic(const ConvGeometry& g, std::span<const double> in, std::span<const double> grad_out,
                              std::span<double> grad_w, std::span<double> grad_b) {
  const int ho = g.out_h();
  const int wo = g.out_w();
#pragma omp parallel for schedule(static)
  for (int o = 0; o < g.out_ch; ++o) {
    const double* go = grad_out.data() + static_cast<std::size_t>(o) * ho * wo;
    if (!grad_b.empty()) {
      double s = 0.0;
      for (int k = 0; k < ho * wo; ++k) s += go[k];
      grad_b[o] = s;
    }
    for (int c = 0; c < g.in_ch; ++c) {
      for (int kh = 0; kh < 3; ++kh) {
        for (int kw = 0; kw < 3; ++kw) {
          double s = 0.0;
          for (int y = 0; y < ho; ++y) {
            const int iy = y * g.stride_h + kh - 1;
            if (iy < 0 || iy >= g.in_h) continue;
            const double* irow = in.data() + (static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w;
            for (int x = 0; x < wo; ++x) {
              const int ix = x * g.stride_w + kw - 1;
              if (ix >= 0 && ix < g.in_w) s += go[y * wo + x] * irow[ix];
            }
          }
          grad_w[((static_cast<std::size_t>(o) * g.in_ch + c) * 3 + kh) * 3 + kw] = s;
        }
      }
    }
  }
}

}  // namespace

void convolve_rows(const Image& in, std::span<const double> taps, Image& out) {
  const int half = static_cast<int>(taps.size()) / 2;
  const int cols = in.cols;
  out = Image(in.rows, cols);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < in.rows; ++r) {
    const double* src = in.px.data() + static_cast<std::size_t>(r) * cols;
    double* dst = out.px.data() + static_cast<std::size_t>(r) * cols;
    for (int j = 0; j < cols; ++j) {
      double acc = 0.0;
      if (j >= half && j + half < cols) {
        for (int t = -half; t <= half; ++t) acc += taps[t + half] * src[j - t];
      } else {
        for (int t = -half; t <= half; ++t) acc += taps[t + half] * src[std::clamp(j - t, 0, cols - 1)];
      }
      dst[j] = acc;
    }
  }
}

void long_range_difference(const Image& in, int m, Image& out) {
  const int cols = in.cols;
  out = Image(in.rows, cols);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < in.rows; ++r) {
    // padded[k] <-> column k - (m - 1), replicated at both ends; windows are
    // summed directly so that flat rows give exact zeros
    std::vector<double> padded(static_cast<std::size_t>(cols + 2 * m - 1));
    const double* src = in.px.data() + static_cast<std::size_t>(r) * cols;
    for (int k = 0; k < cols + 2 * m - 1; ++k) padded[k] = src[std::clamp(k - (m - 1), 0, cols - 1)];
    double* dst = out.px.data() + static_cast<std::size_t>(r) * cols;
    for (int j = 0; j < cols; ++j) {
      const double* win = padded.data() + j;
      double left = 0.0;
      double right = 0.0;
      for (int k = 0; k < m; ++k) {
        left += win[k];
        right += win[m + k];
      }
      dst[j] = left / m - right / m;
    }
  }
}

void conv3x3_forward(const ConvGeometry& g, std::span<const double> in, std::span<const double> weights,
                     std::span<const double> bias, std::span<double> out) {
  if (g.stride_w == 1) {
    forward_unit_stride_w(g, in, weights, bias, out);
  } else {
    forward_generic(g, in, weights, bias, out);
  }
}

void conv3x3_backward_input(const ConvGeometry& g, std::span<const double> grad_out, std::span<const double> weights,
                            std::span<double> grad_in) {
  if (g.stride_w == 1) {
    backward_input_unit_stride_w(g, grad_out, weights, grad_in);
  } else {
    backward_input_generic(g, grad_out, weights, grad_in);
  }
}

void conv3x3_backward_weights(const ConvGeometry& g, std::span<const double> in, std::span<const double> grad_out,
                              std::span<double> grad_w, std::span<double> grad_b) {
  if (g.stride_w == 1) {
    backward_weights_unit_stride_w(g, in, grad_out, grad_w, grad_b);
  } else {
    backward_weights_generic(g, in, grad_out, grad_w, grad_b);
  }
}

}  // namespace fiatnet::kernels
