#pragma once

// Scalar-loop attention references over plain nested vectors.

#include <cmath>
#include <vector>

#include "fiatnet/nn/tensor.hpp"
#include "support/oracles.hpp"

namespace fiatnet::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Mat to_mat(const nn::Tensor& t) {
  Mat m(t.dim(0), Vec(t.dim(1)));
  for (int i = 0; i < t.dim(0); ++i) {
    for (int j = 0; j < t.dim(1); ++j) m[i][j] = t.data[static_cast<std::size_t>(i) * t.dim(1) + j];
  }
  return m;
}

/// Channel means of a [C,H,W] tensor.
inline Vec pool(const nn::Tensor& f) {
  const int c = f.dim(0);
  const std::size_t hw = f.size() / c;
  Vec out(c, 0.0);
  for (int k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < hw; ++i) out[k] += f.data[k * hw + i];
    out[k] /= static_cast<double>(hw);
  }
  return out;
}

/// Row vector v times matrix m.
inline Vec vecmat(const Vec& v, const Mat& m) {
  Vec out(m[0].size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += v[i] * m[i][j];
  }
  return out;
}

/// Per-head softmax of scaled query-key products: [heads][keys].
inline Mat head_weights(const Vec& q, const std::vector<Vec>& keys, int heads, double scale) {
  const int c = static_cast<int>(q.size());
  const int g = c / heads;
  Mat w(heads);
  for (int h = 0; h < heads; ++h) {
    Vec s(keys.size(), 0.0);
    for (std::size_t j = 0; j < keys.size(); ++j) {
      for (int k = h * g; k < (h + 1) * g; ++k) s[j] += q[k] * keys[j][k];
      s[j] *= scale;
    }
    w[h] = softmax(s);
  }
  return w;
}

/// Level self-attention weights of level i over same-shaped maps.
inline Mat level_weights(const std::vector<nn::Tensor>& maps, const Mat& Q, const Mat& K, int heads, int i) {
  std::vector<Vec> keys;
  for (const nn::Tensor& f : maps) keys.push_back(vecmat(pool(f), K));
  return head_weights(vecmat(pool(maps[i]), Q), keys, heads, 1.0);
}

/// Cross-modality attention output for four same-shaped maps.
inline nn::Tensor cross_attention(const std::vector<nn::Tensor>& maps, const Mat& Wq, const Mat& Wk, const Mat& Wv,
                                  int heads, Mat* weights_out = nullptr) {
  const nn::Tensor& ref = maps[0];
  const int c = ref.dim(0);
  const std::size_t hw = ref.size() / c;
  std::vector<Vec> keys;
  for (const nn::Tensor& f : maps) keys.push_back(vecmat(pool(f), Wk));
  const Mat w = head_weights(vecmat(pool(maps[0]), Wq), keys, heads, 1.0 / std::sqrt(static_cast<double>(c)));
  if (weights_out) *weights_out = w;
  nn::Tensor out(ref.shape, 0.0);
  for (std::size_t m = 0; m < maps.size(); ++m) {
    for (int o = 0; o < c; ++o) {
      const double wm = w[o / (c / heads)][m];
      for (std::size_t p = 0; p < hw; ++p) {
        double v = 0.0;
        for (int k = 0; k < c; ++k) v += Wv[o][k] * maps[m].data[k * hw + p];
        out.data[o * hw + p] += wm * v;
      }
    }
  }
  return out;
}

inline nn::Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor t(std::move(shape));
  for (double& v : t.data) v = uniform(rng, lo, hi);
  return t;
}

inline double max_abs_diff(const nn::Tensor& a, const nn::Tensor& b) {
  if (a.shape != b.shape) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace fiatnet::oracle
