#pragma once

#include <span>
#include <vector>

#include "fiatnet/nn/tensor.hpp"

namespace fiatnet::nn {

// Differentiable tensor operations. Each builds a graph node whose backward
// pass is written out by hand; grad_check exercises every one of them.

/// 3x3 convolution with zero padding 1: x [Ci,H,W], w [Co,Ci,3,3], b [Co].
Var conv3x3(const Var& x, const Var& w, const Var& b, int stride_h, int stride_w);

/// Adjoint of conv3x3 producing [Ci,out_h,out_w] from x [Co,h,w]; b [Ci].
Var conv_transpose3x3(const Var& x, const Var& w, const Var& b, int out_h, int out_w, int stride_h, int stride_w);

Var relu(const Var& x);
/// Same data under a new shape with equal element count.
Var reshape(const Var& x, std::vector<int> shape);
Var sigmoid(const Var& x);
Var add(const Var& a, const Var& b);
Var scale(const Var& x, double s);

/// Mean over all positions of each channel: [C,H,W] -> [C].
Var pool_mean(const Var& x);

/// Row vector times matrix: v [n], m [n,k] -> [k].
Var vecmat(const Var& v, const Var& m);

/// Affine map: w [k,n], v [n], b [k] -> [k].
Var linear(const Var& v, const Var& w, const Var& b);

/// Per-head scaled dot products of one query with m keys: -> [heads, m].
/// Head h covers channels [h*C/heads, (h+1)*C/heads).
Var head_scores(const Var& query, std::span<const Var> keys, int heads, double scale);

/// Softmax along the last axis of a [rows, m] tensor.
Var softmax_rows(const Var& scores);

/// out[c] = sum_j weights[head(c), j] * maps[j][c] for [C,H,W] maps.
Var mix_heads(const Var& weights, std::span<const Var> maps, int heads);

/// Bilinear resize of [C,H,W] (half-pixel centers, edge clamped).
Var resize_bilinear(const Var& x, int out_h, int out_w);

/// mix_heads over maps first resized bilinearly to out_h x out_w; the
/// maps share C but may differ in H and W.
Var mix_resized(const Var& weights, std::span<const Var> maps, int heads, int out_h, int out_w);

/// Per-column linear map: out[a] = b + sum_c w[c] * mean_y x[c,y,a] for
/// x [C,H,W], w [1,C], b [1]; output [W].
Var column_linear(const Var& x, const Var& w, const Var& b);

/// Channel mixing: w [Co,C], x [C,H,W] -> [Co,H,W].
Var conv1x1(const Var& x, const Var& w);

/// Stacks scalar (size-1) nodes into a vector.
Var concat(std::span<const Var> scalars);

/// Binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
/// Targets may be soft labels in [0, 1]. Sums, or averages when `mean`.
Var bce(const Var& p, std::span<const double> targets, bool mean = false);

/// Mean squared error against a constant target of the same size.
Var mse(const Var& x, const Tensor& target);

/// Sum of squared entries over several nodes.
Var sum_squares(std::span<const Var> xs);

/// Scalar sum(x * weights) for a constant weight tensor of the same size.
Var weighted_sum(const Var& x, const Tensor& weights);

}  // namespace fiatnet::nn
