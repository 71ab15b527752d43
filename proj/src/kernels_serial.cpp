#include <algorithm>

#include "fiatnet/kernels.hpp"

namespace fiatnet::kernels::serial {

void convolve_rows(const Image& in, std::span<const double> taps, Image& out) {
  const int half = static_cast<int>(taps.size()) / 2;
  out = Image(in.rows, in.cols);
  for (int r = 0; r < in.rows; ++r) {
    for (int j = 0; j < in.cols; ++j) {
      double acc = 0.0;
      for (int t = -half; t <= half; ++t) {
        const int src = std::clamp(j - t, 0, in.cols - 1);
        acc += taps[t + half] * in.at(r, src);
      }
      out.at(r, j) = acc;
    }
  }
}

void long_range_difference(const Image& in, int m, Image& out) {
  out = Image(in.rows, in.cols);
  for (int r = 0; r < in.rows; ++r) {
    for (int j = 0; j < in.cols; ++j) {
      double left = 0.0;
      double right = 0.0;
      for (int k = 0; k < m; ++k) {
        left += in.at(r, std::clamp(j - k, 0, in.cols - 1));
        right += in.at(r, std::clamp(j + 1 + k, 0, in.cols - 1));
      }
      out.at(r, j) = left / m - right / m;
    }
  }
}

void conv3x3_forward(const ConvGeometry& g, std::span<const double> in, std::span<const double> weights,
                     std::span<const double> bias, std::span<double> out) {
  const int ho = g.out_h();
  const int wo = g.out_w();
  for (int o = 0; o < g.out_ch; ++o) {
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        double acc = bias.empty() ? 0.0 : bias[o];
        for (int c = 0; c < g.in_ch; ++c) {
          for (int kh = 0; kh < 3; ++kh) {
            const int iy = y * g.stride_h + kh - 1;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kw = 0; kw < 3; ++kw) {
              const int ix = x * g.stride_w + kw - 1;
              if (ix < 0 || ix >= g.in_w) continue;
              acc += weights[((static_cast<std::size_t>(o) * g.in_ch + c) * 3 + kh) * 3 + kw] *
                     in[(static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w + ix];
            }
          }
        }
        out[(static_cast<std::size_t>(o) * ho + y) * wo + x] = acc;
      }
    }
  }
}

void conv3x3_backward_input(const ConvGeometry& g, std::span<const double> grad_out, std::span<const double> weights,
                            std::span<double> grad_in) {
  const int ho = g.out_h();
  const int wo = g.out_w();
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  for (int o = 0; o < g.out_ch; ++o) {
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        const double go = grad_out[(static_cast<std::size_t>(o) * ho + y) * wo + x];
        for (int c = 0; c < g.in_ch; ++c) {
          for (int kh = 0; kh < 3; ++kh) {
            const int iy = y * g.stride_h + kh - 1;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kw = 0; kw < 3; ++kw) {
              const int ix = x * g.stride_w + kw - 1;
              if (ix < 0 || ix >= g.in_w) continue;
              grad_in[(static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w + ix] +=
                  weights[((static_cast<std::size_t>(o) * g.in_ch + c) * 3 + kh) * 3 + kw] * go;
            }
          }
        }
      }
    }
  }
}

void conv3x3_backward_weights(const ConvGeometry& g, std::span<const double> in, std::span<const double> grad_out,
                              std::span<double> grad_w, std::span<double> grad_b) {
  const int ho = g.out_h();
  const int wo = g.out_w();
  std::fill(grad_w.begin(), grad_w.end(), 0.0);
  std::fill(grad_b.begin(), grad_b.end(), 0.0);
  for (int o = 0; o < g.out_ch; ++o) {
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        const double go = grad_out[(static_cast<std::size_t>(o) * ho + y) * wo + x];
        if (!grad_b.empty()) grad_b[o] += go;
        for (int c = 0; c < g.in_ch; ++c) {
          for (int kh = 0; kh < 3; ++kh) {
            const int iy = y * g.stride_h + kh - 1;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kw = 0; kw < 3; ++kw) {
              const int ix = x * g.stride_w + kw - 1;
              if (ix < 0 || ix >= g.in_w) continue;
              grad_w[((static_cast<std::size_t>(o) * g.in_ch + c) * 3 + kh) * 3 + kw] +=
                  go * in[(static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w + ix];
            }
          }
        }
      }
    }
  }
}

}  // namespace fiatnet::kernels::serial
