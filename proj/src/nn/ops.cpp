#include "fiatnet/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fiatnet/kernels.hpp"

namespace fiatnet::nn {
namespace {

Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v->requires_grad; });
  if (needs) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(fn);
  }
  return n;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kShapeMismatch, what);
}

void accumulate(Node& target, std::span<const double> delta) {
  if (!target.requires_grad) return;
  Tensor& g = target.ensure_grad();
  for (std::size_t i = 0; i < delta.size(); ++i) g.data[i] += delta[i];
}

kernels::ConvGeometry conv_geometry(const Tensor& x, const Tensor& w, int sh, int sw) {
  if (!(x.rank() == 3 && w.rank() == 4 && w.dim(2) == 3 && w.dim(3) == 3 && w.dim(1) == x.dim(0)))
    require(false, "conv3x3 expects x [Ci,H,W] and w [Co,Ci,3,3], got " + shape_string(x.shape) + " and " +
                       shape_string(w.shape));
  return {x.dim(0), w.dim(0), x.dim(1), x.dim(2), sh, sw};
}

}  // namespace

Var conv3x3(const Var& x, const Var& w, const Var& b, int stride_h, int stride_w) {
  const kernels::ConvGeometry g = conv_geometry(x->value, w->value, stride_h, stride_w);
  require(b->value.size() == static_cast<std::size_t>(g.out_ch), "conv3x3 bias length mismatch");
  Tensor out({g.out_ch, g.out_h(), g.out_w()});
  kernels::conv3x3_forward(g, x->value.data, w->value.data, b->value.data, out.data);
  return make_node(std::move(out), {x, w, b}, [g](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    if (xn.requires_grad) {
      std::vector<double> gx(g.in_size());
      kernels::conv3x3_backward_input(g, self.grad.data, wn.value.data, gx);
      accumulate(xn, gx);
    }
    if (wn.requires_grad || bn.requires_grad) {
      std::vector<double> gw(g.weight_size());
      std::vector<double> gb(static_cast<std::size_t>(g.out_ch));
      kernels::conv3x3_backward_weights(g, xn.value.data, self.grad.data, gw, gb);
      accumulate(wn, gw);
      accumulate(bn, gb);
    }
  });
}

Var conv_transpose3x3(const Var& x, const Var& w, const Var& b, int out_h, int out_w, int stride_h, int stride_w) {
  const Tensor& xv = x->value;
  const Tensor& wv = w->value;
  require(xv.rank() == 3 && wv.rank() == 4 && wv.dim(0) == xv.dim(0),
          "conv_transpose3x3 expects x [Co,h,w] and w [Co,Ci,3,3]");
  // geometry of the forward convolution this operator is the adjoint of
  const kernels::ConvGeometry g{wv.dim(1), wv.dim(0), out_h, out_w, stride_h, stride_w};
  require(g.out_h() == xv.dim(1) && g.out_w() == xv.dim(2), "conv_transpose3x3 output size is inconsistent");
  require(b->value.size() == static_cast<std::size_t>(g.in_ch), "conv_transpose3x3 bias length mismatch");
  Tensor out({g.in_ch, out_h, out_w});
  kernels::conv3x3_backward_input(g, xv.data, wv.data, out.data);
  const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < g.in_ch; ++c) {
    for (std::size_t k = 0; k < plane; ++k) out.data[c * plane + k] += b->value.data[c];
  }
  return make_node(std::move(out), {x, w, b}, [g, plane](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    if (xn.requires_grad) {
      std::vector<double> gx(g.out_size());
      kernels::conv3x3_forward(g, self.grad.data, wn.value.data, {}, gx);
      accumulate(xn, gx);
    }
    if (wn.requires_grad) {
      std::vector<double> gw(g.weight_size());
      kernels::conv3x3_backward_weights(g, self.grad.data, xn.value.data, gw, {});
      accumulate(wn, gw);
    }
    if (bn.requires_grad) {
      std::vector<double> gb(static_cast<std::size_t>(g.in_ch), 0.0);
      for (int c = 0; c < g.in_ch; ++c) {
        for (std::size_t k = 0; k < plane; ++k) gb[c] += self.grad.data[c * plane + k];
      }
      accumulate(bn, gb);
    }
  });
}

Var relu(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& xn = *self.inputs[0];
    Tensor& g = xn.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xn.value.data[i] > 0.0) g.data[i] += self.grad.data[i];
    }
  });
}

Var reshape(const Var& x, std::vector<int> shape) {
  Tensor out = x->value;
  if (!(Tensor::count(shape) == out.size()))
    require(false, "cannot reshape " + shape_string(out.shape) + " to " + shape_string(shape));
  out.shape = std::move(shape);
  return make_node(std::move(out), {x}, [](Node& self) { accumulate(*self.inputs[0], self.grad.data); });
}

Var sigmoid(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.data) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  return make_node(std::move(out), {x}, [](Node& self) {
    Tensor& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value.data[i];
      g.data[i] += self.grad.data[i] * y * (1.0 - y);
    }
  });
}

Var add(const Var& a, const Var& b) {
  require(a->value.shape == b->value.shape, "add shape mismatch");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b->value.data[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad.data);
    accumulate(*self.inputs[1], self.grad.data);
  });
}

Var scale(const Var& x, double s) {
  Tensor out = x->value;
  for (double& v : out.data) v *= s;
  return make_node(std::move(out), {x}, [s](Node& self) {
    Tensor& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += s * self.grad.data[i];
  });
}

Var pool_mean(const Var& x) {
  const Tensor& v = x->value;
  require(v.rank() == 3, "pool_mean expects [C,H,W]");
  const int c = v.dim(0);
  const std::size_t plane = static_cast<std::size_t>(v.dim(1)) * v.dim(2);
  Tensor out({c});
  for (int k = 0; k < c; ++k) {
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (std::size_t i = 0; i < plane; ++i) s += v.data[k * plane + i];
    out.data[k] = s / static_cast<double>(plane);
  }
  return make_node(std::move(out), {x}, [c, plane](Node& self) {
    Tensor& g = self.inputs[0]->ensure_grad();
    for (int k = 0; k < c; ++k) {
      const double d = self.grad.data[k] / static_cast<double>(plane);
      for (std::size_t i = 0; i < plane; ++i) g.data[k * plane + i] += d;
    }
  });
}

Var vecmat(const Var& v, const Var& m) {
  const Tensor& vv = v->value;
  const Tensor& mv = m->value;
  require(mv.rank() == 2 && vv.size() == static_cast<std::size_t>(mv.dim(0)), "vecmat shape mismatch");
  const int n = mv.dim(0);
  const int k = mv.dim(1);
  Tensor out({k});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) out.data[j] += vv.data[i] * mv.data[static_cast<std::size_t>(i) * k + j];
  }
  return make_node(std::move(out), {v, m}, [n, k](Node& self) {
    Node& vn = *self.inputs[0];
    Node& mn = *self.inputs[1];
    const std::vector<double>& gy = self.grad.data;
    if (vn.requires_grad) {
      Tensor& g = vn.ensure_grad();
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += gy[j] * mn.value.data[static_cast<std::size_t>(i) * k + j];
        g.data[i] += s;
      }
    }
    if (mn.requires_grad) {
      Tensor& g = mn.ensure_grad();
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) g.data[static_cast<std::size_t>(i) * k + j] += vn.value.data[i] * gy[j];
      }
    }
  });
}

Var linear(const Var& v, const Var& w, const Var& b) {
  const Tensor& vv = v->value;
  const Tensor& wv = w->value;
  if (!(wv.rank() == 2 && vv.size() == static_cast<std::size_t>(wv.dim(1)) &&
        b->value.size() == static_cast<std::size_t>(wv.dim(0))))
    require(false, "linear shape mismatch: w " + shape_string(wv.shape) + ", v " + shape_string(vv.shape));
  const int k = wv.dim(0);
  const int n = wv.dim(1);
  Tensor out({k});
  for (int j = 0; j < k; ++j) {
    double s = b->value.data[j];
    for (int i = 0; i < n; ++i) s += wv.data[static_cast<std::size_t>(j) * n + i] * vv.data[i];
    out.data[j] = s;
  }
  return make_node(std::move(out), {v, w, b}, [n, k](Node& self) {
    Node& vn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    const std::vector<double>& gy = self.grad.data;
    if (vn.requires_grad) {
      Tensor& g = vn.ensure_grad();
      for (int j = 0; j < k; ++j) {
        for (int i = 0; i < n; ++i) g.data[i] += gy[j] * wn.value.data[static_cast<std::size_t>(j) * n + i];
      }
    }
    if (wn.requires_grad) {
      Tensor& g = wn.ensure_grad();
      for (int j = 0; j < k; ++j) {
        for (int i = 0; i < n; ++i) g.data[static_cast<std::size_t>(j) * n + i] += gy[j] * vn.value.data[i];
      }
    }
    accumulate(bn, gy);
  });
}

Var head_scores(const Var& query, std::span<const Var> keys, int heads, double scale_factor) {
  const std::size_t c = query->value.size();
  require(heads >= 1 && c % static_cast<std::size_t>(heads) == 0, "channel count must divide evenly into heads");
  const int m = static_cast<int>(keys.size());
  for (const Var& k : keys) require(k->value.size() == c, "head_scores key length mismatch");
  const std::size_t group = c / static_cast<std::size_t>(heads);
  Tensor out({heads, m});
  for (int h = 0; h < heads; ++h) {
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t i = h * group; i < (h + 1) * group; ++i) s += query->value.data[i] * keys[j]->value.data[i];
      out.data[static_cast<std::size_t>(h) * m + j] = scale_factor * s;
    }
  }
  std::vector<Var> inputs{query};
  inputs.insert(inputs.end(), keys.begin(), keys.end());
  return make_node(std::move(out), std::move(inputs), [heads, m, group, scale_factor](Node& self) {
    Node& qn = *self.inputs[0];
    for (int h = 0; h < heads; ++h) {
      for (int j = 0; j < m; ++j) {
        const double g = scale_factor * self.grad.data[static_cast<std::size_t>(h) * m + j];
        Node& kn = *self.inputs[1 + j];
        if (qn.requires_grad) {
          Tensor& gq = qn.ensure_grad();
          for (std::size_t i = h * group; i < (h + 1) * group; ++i) gq.data[i] += g * kn.value.data[i];
        }
        if (kn.requires_grad) {
          Tensor& gk = kn.ensure_grad();
          for (std::size_t i = h * group; i < (h + 1) * group; ++i) gk.data[i] += g * qn.value.data[i];
        }
      }
    }
  });
}

Var softmax_rows(const Var& scores) {
  const Tensor& s = scores->value;
  require(s.rank() == 2, "softmax_rows expects [rows, m]");
  const int rows = s.dim(0);
  const int m = s.dim(1);
  Tensor out(s.shape);
  for (int r = 0; r < rows; ++r) {
    const double* in = s.data.data() + static_cast<std::size_t>(r) * m;
    double* y = out.data.data() + static_cast<std::size_t>(r) * m;
    const double top = *std::max_element(in, in + m);
    double z = 0.0;
    for (int j = 0; j < m; ++j) z += (y[j] = std::exp(in[j] - top));
    for (int j = 0; j < m; ++j) y[j] /= z;
  }
  return make_node(std::move(out), {scores}, [rows, m](Node& self) {
    Tensor& g = self.inputs[0]->ensure_grad();
    for (int r = 0; r < rows; ++r) {
      const double* y = self.value.data.data() + static_cast<std::size_t>(r) * m;
      const double* gy = self.grad.data.data() + static_cast<std::size_t>(r) * m;
      double dot = 0.0;
      for (int j = 0; j < m; ++j) dot += gy[j] * y[j];
      for (int j = 0; j < m; ++j) g.data[static_cast<std::size_t>(r) * m + j] += y[j] * (gy[j] - dot);
    }
  });
}

Var mix_heads(const Var& weights, std::span<const Var> maps, int heads) {
  const int m = static_cast<int>(maps.size());
  require(m >= 1, "mix_heads needs at least one map");
  const Tensor& w = weights->value;
  require(w.rank() == 2 && w.dim(0) == heads && w.dim(1) == m, "mix_heads weight shape mismatch");
  const std::vector<int>& shape = maps[0]->value.shape;
  require(shape.size() == 3, "mix_heads expects [C,H,W] maps");
  for (const Var& f : maps) {
    if (!(f->value.shape == shape))
      require(false, "mix_heads maps differ in shape: " + shape_string(f->value.shape) + " vs " + shape_string(shape));
  }
  const int c = shape[0];
  require(c % heads == 0, "channel count must divide evenly into heads");
  const int group = c / heads;
  const std::size_t plane = static_cast<std::size_t>(shape[1]) * shape[2];

  Tensor out(shape);
  for (int ch = 0; ch < c; ++ch) {
    const int h = ch / group;
    double* dst = out.data.data() + ch * plane;
    for (int j = 0; j < m; ++j) {
      const double wj = w.data[static_cast<std::size_t>(h) * m + j];
      const double* src = maps[j]->value.data.data() + ch * plane;
      if (j == 0) {
        for (std::size_t i = 0; i < plane; ++i) dst[i] = wj * src[i];
      } else {
        for (std::size_t i = 0; i < plane; ++i) dst[i] += wj * src[i];
      }
    }
  }
  std::vector<Var> inputs{weights};
  inputs.insert(inputs.end(), maps.begin(), maps.end());
  return make_node(std::move(out), std::move(inputs), [m, c, group, plane](Node& self) {
    Node& wn = *self.inputs[0];
    for (int j = 0; j < m; ++j) {
      Node& fn = *self.inputs[1 + j];
      for (int ch = 0; ch < c; ++ch) {
        const int h = ch / group;
        const double* gy = self.grad.data.data() + ch * plane;
        if (fn.requires_grad) {
          const double wj = wn.value.data[static_cast<std::size_t>(h) * m + j];
          double* gf = fn.ensure_grad().data.data() + ch * plane;
          for (std::size_t i = 0; i < plane; ++i) gf[i] += wj * gy[i];
        }
        if (wn.requires_grad) {
          const double* src = fn.value.data.data() + ch * plane;
          double s = 0.0;
#pragma omp simd reduction(+ : s)
          for (std::size_t i = 0; i < plane; ++i) s += gy[i] * src[i];
          wn.ensure_grad().data[static_cast<std::size_t>(h) * m + j] += s;
        }
      }
    }
  });
}

namespace {

struct Interp {
  int i0;
  int i1;
  double frac;
};

std::vector<Interp> interp_table(int in, int out) {
  std::vector<Interp> t(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    const double src = std::clamp((d + 0.5) * ratio - 0.5, 0.0, static_cast<double>(in - 1));
    const int i0 = std::min(static_cast<int>(src), in - 1);
    t[d] = {i0, std::min(i0 + 1, in - 1), src - i0};
  }
  return t;
}

}  // namespace

Var resize_bilinear(const Var& x, int out_h, int out_w) {
  const Tensor& v = x->value;
  require(v.rank() == 3 && out_h >= 1 && out_w >= 1, "resize_bilinear expects [C,H,W]");
  const int c = v.dim(0);
  const int h = v.dim(1);
  const int w = v.dim(2);
  if (h == out_h && w == out_w) return x;
  const std::vector<Interp> ty = interp_table(h, out_h);
  const std::vector<Interp> tx = interp_table(w, out_w);
  Tensor out({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch) {
    const double* src = v.data.data() + static_cast<std::size_t>(ch) * h * w;
    double* dst = out.data.data() + static_cast<std::size_t>(ch) * out_h * out_w;
    for (int y = 0; y < out_h; ++y) {
      const Interp& iy = ty[y];
      for (int xo = 0; xo < out_w; ++xo) {
        const Interp& ix = tx[xo];
        const double top = src[iy.i0 * w + ix.i0] * (1.0 - ix.frac) + src[iy.i0 * w + ix.i1] * ix.frac;
        const double bot = src[iy.i1 * w + ix.i0] * (1.0 - ix.frac) + src[iy.i1 * w + ix.i1] * ix.frac;
        dst[y * out_w + xo] = top * (1.0 - iy.frac) + bot * iy.frac;
      }
    }
  }
  return make_node(std::move(out), {x}, [c, h, w, out_h, out_w, ty, tx](Node& self) {
    Tensor& g = self.inputs[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      double* gs = g.data.data() + static_cast<std::size_t>(ch) * h * w;
      const double* gy = self.grad.data.data() + static_cast<std::size_t>(ch) * out_h * out_w;
      for (int y = 0; y < out_h; ++y) {
        const Interp& iy = ty[y];
        for (int xo = 0; xo < out_w; ++xo) {
          const Interp& ix = tx[xo];
          const double d = gy[y * out_w + xo];
          gs[iy.i0 * w + ix.i0] += d * (1.0 - iy.frac) * (1.0 - ix.frac);
          gs[iy.i0 * w + ix.i1] += d * (1.0 - iy.frac) * ix.frac;
          gs[iy.i1 * w + ix.i0] += d * iy.frac * (1.0 - ix.frac);
          gs[iy.i1 * w + ix.i1] += d * iy.frac * ix.frac;
        }
      }
    }
  });
}

Var mix_resized(const Var& weights, std::span<const Var> maps, int heads, int out_h, int out_w) {
  const int m = static_cast<int>(maps.size());
  require(m >= 1, "mix_resized needs at least one map");
  const Tensor& w = weights->value;
  require(w.rank() == 2 && w.dim(0) == heads && w.dim(1) == m, "mix_resized weight shape mismatch");
  require(out_h >= 1 && out_w >= 1, "mix_resized target must be non-empty");
  const int c = maps[0]->value.rank() == 3 ? maps[0]->value.dim(0) : 0;
  for (const Var& f : maps) {
    if (!(f->value.rank() == 3 && f->value.dim(0) == c))
      require(false, "mix_resized maps differ in channels: " + shape_string(f->value.shape));
  }
  require(c % heads == 0, "channel count must divide evenly into heads");
  const int group = c / heads;
  const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;

  struct Source {
    int h, w;
    std::vector<Interp> ty, tx;
  };
  auto sources = std::make_shared<std::vector<Source>>();
  for (const Var& f : maps) {
    const int h = f->value.dim(1);
    const int wd = f->value.dim(2);
    sources->push_back({h, wd, interp_table(h, out_h), interp_table(wd, out_w)});
  }

  // accumulates (or scatters, in reverse) one resized channel plane
  auto sample = [out_h, out_w](const Source& s, const double* src, double k, double* dst) {
    const bool same_h = s.h == out_h;
    const bool same_w = s.w == out_w;
    for (int y = 0; y < out_h; ++y) {
      const Interp& iy = s.ty[y];
      const double* r0 = src + static_cast<std::size_t>(iy.i0) * s.w;
      const double* r1 = src + static_cast<std::size_t>(iy.i1) * s.w;
      double* d = dst + static_cast<std::size_t>(y) * out_w;
      if (same_w && same_h) {
        for (int x = 0; x < out_w; ++x) d[x] += k * r0[x];
      } else if (same_h) {
        for (int x = 0; x < out_w; ++x) {
          const Interp& ix = s.tx[x];
          d[x] += k * (r0[ix.i0] * (1.0 - ix.frac) + r0[ix.i1] * ix.frac);
        }
      } else {
        for (int x = 0; x < out_w; ++x) {
          const Interp& ix = s.tx[x];
          const double top = r0[ix.i0] * (1.0 - ix.frac) + r0[ix.i1] * ix.frac;
          const double bot = r1[ix.i0] * (1.0 - ix.frac) + r1[ix.i1] * ix.frac;
          d[x] += k * (top * (1.0 - iy.frac) + bot * iy.frac);
        }
      }
    }
  };

  Tensor out({c, out_h, out_w});
  for (int j = 0; j < m; ++j) {
    const Source& s = (*sources)[j];
    const std::size_t in_plane = static_cast<std::size_t>(s.h) * s.w;
    for (int ch = 0; ch < c; ++ch) {
      const double k = w.data[static_cast<std::size_t>(ch / group) * m + j];
      sample(s, maps[j]->value.data.data() + ch * in_plane, k, out.data.data() + ch * plane);
    }
  }

  std::vector<Var> inputs{weights};
  inputs.insert(inputs.end(), maps.begin(), maps.end());
  return make_node(std::move(out), std::move(inputs), [m, c, group, plane, out_h, out_w, sources, sample](Node& self) {
    Node& wn = *self.inputs[0];
    std::vector<double> resized(plane);
    for (int j = 0; j < m; ++j) {
      Node& fn = *self.inputs[1 + j];
      const Source& s = (*sources)[j];
      const bool same_h = s.h == out_h;
      const std::size_t in_plane = static_cast<std::size_t>(s.h) * s.w;
      for (int ch = 0; ch < c; ++ch) {
        const int h = ch / group;
        const double* gy = self.grad.data.data() + ch * plane;
        const double* src = fn.value.data.data() + ch * in_plane;
        if (wn.requires_grad) {
          std::fill(resized.begin(), resized.end(), 0.0);
          sample(s, src, 1.0, resized.data());
          double sum = 0.0;
#pragma omp simd reduction(+ : sum)
          for (std::size_t i = 0; i < plane; ++i) sum += gy[i] * resized[i];
          wn.ensure_grad().data[static_cast<std::size_t>(h) * m + j] += sum;
        }
        if (!fn.requires_grad) continue;
        const double k = wn.value.data[static_cast<std::size_t>(h) * m + j];
        double* gs = fn.ensure_grad().data.data() + ch * in_plane;
        for (int y = 0; y < out_h; ++y) {
          const Interp& iy = s.ty[y];
          double* g0 = gs + static_cast<std::size_t>(iy.i0) * s.w;
          double* g1 = gs + static_cast<std::size_t>(iy.i1) * s.w;
          const double* d = gy + static_cast<std::size_t>(y) * out_w;
          if (s.w == out_w && same_h) {
            for (int x = 0; x < out_w; ++x) g0[x] += k * d[x];
            continue;
          }
          for (int x = 0; x < out_w; ++x) {
            const Interp& ix = s.tx[x];
            const double v = k * d[x];
            if (same_h) {
              g0[ix.i0] += v * (1.0 - ix.frac);
              g0[ix.i1] += v * ix.frac;
            } else {
              g0[ix.i0] += v * (1.0 - iy.frac) * (1.0 - ix.frac);
              g0[ix.i1] += v * (1.0 - iy.frac) * ix.frac;
              g1[ix.i0] += v * iy.frac * (1.0 - ix.frac);
              g1[ix.i1] += v * iy.frac * ix.frac;
            }
          }
        }
      }
    }
  });
}

Var column_linear(const Var& x, const Var& w, const Var& b) {
  const Tensor& v = x->value;
  require(v.rank() == 3 && w->value.size() == static_cast<std::size_t>(v.dim(0)) && b->value.size() == 1,
          "column_linear expects x [C,H,W], w [1,C], b [1]");
  const int c = v.dim(0);
  const int h = v.dim(1);
  const int wd = v.dim(2);
  const double inv_h = 1.0 / h;
  Tensor out({wd}, b->value.data[0]);
  for (int ch = 0; ch < c; ++ch) {
    const double k = w->value.data[ch] * inv_h;
    for (int y = 0; y < h; ++y) {
      const double* src = v.data.data() + (static_cast<std::size_t>(ch) * h + y) * wd;
      for (int a = 0; a < wd; ++a) out.data[a] += k * src[a];
    }
  }
  return make_node(std::move(out), {x, w, b}, [c, h, wd, inv_h](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    const double* gy = self.grad.data.data();
    if (bn.requires_grad) {
      double s = 0.0;
      for (int a = 0; a < wd; ++a) s += gy[a];
      bn.ensure_grad().data[0] += s;
    }
    for (int ch = 0; ch < c; ++ch) {
      const double k = wn.value.data[ch] * inv_h;
      double gw = 0.0;
      for (int y = 0; y < h; ++y) {
        const std::size_t row = (static_cast<std::size_t>(ch) * h + y) * wd;
        if (xn.requires_grad) {
          double* gx = xn.ensure_grad().data.data() + row;
          for (int a = 0; a < wd; ++a) gx[a] += k * gy[a];
        }
        const double* src = xn.value.data.data() + row;
#pragma omp simd reduction(+ : gw)
        for (int a = 0; a < wd; ++a) gw += gy[a] * src[a];
      }
      if (wn.requires_grad) wn.ensure_grad().data[ch] += gw * inv_h;
    }
  });
}

Var conv1x1(const Var& x, const Var& w) {
  const Tensor& v = x->value;
  const Tensor& wv = w->value;
  require(v.rank() == 3 && wv.rank() == 2 && wv.dim(1) == v.dim(0), "conv1x1 shape mismatch");
  const int ci = v.dim(0);
  const int co = wv.dim(0);
  const std::size_t plane = static_cast<std::size_t>(v.dim(1)) * v.dim(2);
  Tensor out({co, v.dim(1), v.dim(2)});
  for (int o = 0; o < co; ++o) {
    double* dst = out.data.data() + o * plane;
    for (int c = 0; c < ci; ++c) {
      const double k = wv.data[static_cast<std::size_t>(o) * ci + c];
      const double* src = v.data.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += k * src[i];
    }
  }
  return make_node(std::move(out), {x, w}, [ci, co, plane](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    for (int o = 0; o < co; ++o) {
      const double* gy = self.grad.data.data() + o * plane;
      for (int c = 0; c < ci; ++c) {
        if (xn.requires_grad) {
          const double k = wn.value.data[static_cast<std::size_t>(o) * ci + c];
          double* gx = xn.ensure_grad().data.data() + c * plane;
          for (std::size_t i = 0; i < plane; ++i) gx[i] += k * gy[i];
        }
        if (wn.requires_grad) {
          const double* src = xn.value.data.data() + c * plane;
          double s = 0.0;
#pragma omp simd reduction(+ : s)
          for (std::size_t i = 0; i < plane; ++i) s += gy[i] * src[i];
          wn.ensure_grad().data[static_cast<std::size_t>(o) * ci + c] += s;
        }
      }
    }
  });
}

Var concat(std::span<const Var> scalars) {
  Tensor out({static_cast<int>(scalars.size())});
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    require(scalars[i]->value.size() == 1, "concat expects scalar nodes");
    out.data[i] = scalars[i]->value.data[0];
  }
  return make_node(std::move(out), std::vector<Var>(scalars.begin(), scalars.end()), [](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      if (self.inputs[i]->requires_grad) self.inputs[i]->ensure_grad().data[0] += self.grad.data[i];
    }
  });
}

Var bce(const Var& p, std::span<const double> targets, bool mean) {
  constexpr double kLo = 1e-7;
  constexpr double kHi = 1.0 - 1e-7;
  const Tensor& v = p->value;
  require(v.size() == targets.size(), "bce prediction/target length mismatch");
  const double norm = mean ? 1.0 / static_cast<double>(v.size()) : 1.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double q = std::clamp(v.data[i], kLo, kHi);
    loss -= targets[i] * std::log(q) + (1.0 - targets[i]) * std::log(1.0 - q);
  }
  Tensor out({1}, loss * norm);
  std::vector<double> t(targets.begin(), targets.end());
  return make_node(std::move(out), {p}, [t, norm](Node& self) {
    Node& pn = *self.inputs[0];
    Tensor& g = pn.ensure_grad();
    const double gy = self.grad.data[0] * norm;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double q = pn.value.data[i];
      if (q < kLo || q > kHi) continue;
      g.data[i] += gy * (-t[i] / q + (1.0 - t[i]) / (1.0 - q));
    }
  });
}

Var mse(const Var& x, const Tensor& target) {
  const Tensor& v = x->value;
  require(v.size() == target.size(), "mse size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v.data[i] - target.data[i];
    s += d * d;
  }
  const double n = static_cast<double>(v.size());
  Tensor out({1}, s / n);
  return make_node(std::move(out), {x}, [target, n](Node& self) {
    Node& xn = *self.inputs[0];
    Tensor& g = xn.ensure_grad();
    const double gy = self.grad.data[0];
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += gy * 2.0 * (xn.value.data[i] - target.data[i]) / n;
  });
}

Var sum_squares(std::span<const Var> xs) {
  double s = 0.0;
  for (const Var& x : xs) {
    for (double v : x->value.data) s += v * v;
  }
  return make_node(Tensor({1}, s), std::vector<Var>(xs.begin(), xs.end()), [](Node& self) {
    const double gy = self.grad.data[0];
    for (const Var& x : self.inputs) {
      if (!x->requires_grad) continue;
      Tensor& g = x->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += 2.0 * gy * x->value.data[i];
    }
  });
}

Var weighted_sum(const Var& x, const Tensor& weights) {
  require(x->value.size() == weights.size(), "weighted_sum size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += x->value.data[i] * weights.data[i];
  return make_node(Tensor({1}, s), {x}, [weights](Node& self) {
    Tensor& g = self.inputs[0]->ensure_grad();
    const double gy = self.grad.data[0];
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += gy * weights.data[i];
  });
}

}  // namespace fiatnet::nn
