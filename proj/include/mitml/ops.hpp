/*
 * Copyright 2026 The mitml Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MITML_OPS_HPP
#define MITML_OPS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mitml/tensor.hpp"

// Differentiable tensor operations. Shapes are checked eagerly and there is
// no implicit broadcasting: binary elementwise ops demand equal shapes, the
// only scalar that mixes with a tensor is a compile-time-visible constant
// (scale / add_const). All math is float64.

namespace mitml {

inline void check_same_shape(const char* op, const Tensor& a,
                             const Tensor& b) {
  MITML_CHECK(a.shape() == b.shape(), op, ": shape mismatch ",
              shape_str(a.shape()), " vs ", shape_str(b.shape()));
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  auto pa = a.impl(), pb = b.impl();
  return make_op(a.shape(), std::move(out), {a, b},
                 [pa, pb](const TensorImpl& o) {
                   const double* g = o.grad.data();
                   if (double* ga = detail::grad_sink(*pa))
                     for (std::size_t i = 0; i < o.data.size(); ++i)
                       ga[i] += g[i];
                   if (double* gb = detail::grad_sink(*pb))
                     for (std::size_t i = 0; i < o.data.size(); ++i)
                       gb[i] += g[i];
                 });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  auto pa = a.impl(), pb = b.impl();
  return make_op(a.shape(), std::move(out), {a, b},
                 [pa, pb](const TensorImpl& o) {
                   const double* g = o.grad.data();
                   if (double* ga = detail::grad_sink(*pa))
                     for (std::size_t i = 0; i < o.data.size(); ++i)
                       ga[i] += g[i];
                   if (double* gb = detail::grad_sink(*pb))
                     for (std::size_t i = 0; i < o.data.size(); ++i)
                       gb[i] -= g[i];
                 });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  auto pa = a.impl(), pb = b.impl();
  return make_op(a.shape(), std::move(out), {a, b},
                 [pa, pb](const TensorImpl& o) {
                   const double* g = o.grad.data();
                   if (double* ga = detail::grad_sink(*pa))
                     for (std::size_t i = 0; i < o.data.size(); ++i)
                       ga[i] += g[i] * pb->data[i];
                   if (double* gb = detail::grad_sink(*pb))
                     for (std::size_t i = 0; i < o.data.size(); ++i)
                       gb[i] += g[i] * pa->data[i];
                 });
}

/// ReLU with subgradient 0 at the origin.
inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data());
  for (auto& x : out) x = x > 0.0 ? x : 0.0;
  auto pa = a.impl();
  return make_op(a.shape(), std::move(out), {a},
                 [pa](const TensorImpl& o) {
                   if (double* ga = detail::grad_sink(*pa)) {
                     const double* g = o.grad.data();
                     for (std::size_t i = 0; i < o.data.size(); ++i)
                       if (pa->data[i] > 0.0) ga[i] += g[i];
                   }
                 });
}

inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.data());
  for (auto& x : out) x = sigmoid_scalar(x);
  auto pa = a.impl();
  return make_op(a.shape(), std::move(out), {a},
                 [pa](const TensorImpl& o) {
                   if (double* ga = detail::grad_sink(*pa)) {
                     const double* g = o.grad.data();
                     for (std::size_t i = 0; i < o.data.size(); ++i) {
                       const double y = o.data[i];
                       ga[i] += g[i] * y * (1.0 - y);
                     }
                   }
                 });
}

inline Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.data());
  for (auto& x : out) x = std::tanh(x);
  auto pa = a.impl();
  return make_op(a.shape(), std::move(out), {a},
                 [pa](const TensorImpl& o) {
                   if (double* ga = detail::grad_sink(*pa)) {
                     const double* g = o.grad.data();
                     for (std::size_t i = 0; i < o.data.size(); ++i) {
                       const double y = o.data[i];
                       ga[i] += g[i] * (1.0 - y * y);
                     }
                   }
                 });
}

inline Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.data());
  for (auto& x : out) x *= c;
  auto pa = a.impl();
  return make_op(a.shape(), std::move(out), {a},
                 [pa, c](const TensorImpl& o) {
                   if (double* ga = detail::grad_sink(*pa)) {
                     const double* g = o.grad.data();
                     for (std::size_t i = 0; i < o.data.size(); ++i)
                       ga[i] += g[i] * c;
                   }
                 });
}

inline Tensor add_const(const Tensor& a, double c) {
  std::vector<double> out(a.data());
  for (auto& x : out) x += c;
  auto pa = a.impl();
  return make_op(a.shape(), std::move(out), {a},
                 [pa](const TensorImpl& o) {
                   if (double* ga = detail::grad_sink(*pa)) {
                     const double* g = o.grad.data();
                     for (std::size_t i = 0; i < o.data.size(); ++i)
                       ga[i] += g[i];
                   }
                 });
}

/// Elementwise square root. The derivative is clamped near zero so that
/// exactly-coincident points (distance 0) propagate a zero subgradient
/// instead of an infinity.
inline Tensor sqrt(const Tensor& a) {
  std::vector<double> out(a.data());
  for (auto& x : out) {
    MITML_CHECK(x >= 0.0, "sqrt: negative input ", x);
    x = std::sqrt(x);
  }
  auto pa = a.impl();
  return make_op(a.shape(), std::move(out), {a},
                 [pa](const TensorImpl& o) {
                   if (double* ga = detail::grad_sink(*pa)) {
                     const double* g = o.grad.data();
                     for (std::size_t i = 0; i < o.data.size(); ++i) {
                       const double y = o.data[i];
                       if (y > 1e-12) ga[i] += g[i] * 0.5 / y;
                     }
                   }
                 });
}

// ---------------------------------------------------------------------------
// Matrix product and affine maps
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  MITML_CHECK(a.rank() == 2 && b.rank() == 2, "matmul: need rank-2 inputs, got ",
              shape_str(a.shape()), " and ", shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  MITML_CHECK(k == k2, "matmul: inner dimensions differ, ",
              shape_str(a.shape()), " vs ", shape_str(b.shape()));
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < k; ++l) {
      const double av = ad[i * k + l];
      const double* brow = bd + static_cast<std::size_t>(l) * n;
      double* orow = out.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  auto pa = a.impl(), pb = b.impl();
  return make_op(
      {m, n}, std::move(out), {a, b},
      [pa, pb, m, k, n](const TensorImpl& o) {
        const double* g = o.grad.data();
        if (double* ga = detail::grad_sink(*pa)) {
          // dA = dC . B^T
          const double* bd = pb->data.data();
          for (int i = 0; i < m; ++i)
            for (int l = 0; l < k; ++l) {
              double acc = 0.0;
              const double* grow = g + static_cast<std::size_t>(i) * n;
              const double* brow = bd + static_cast<std::size_t>(l) * n;
              for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ga[i * k + l] += acc;
            }
        }
        if (double* gb = detail::grad_sink(*pb)) {
          // dB = A^T . dC
          const double* ad = pa->data.data();
          for (int i = 0; i < m; ++i) {
            const double* grow = g + static_cast<std::size_t>(i) * n;
            for (int l = 0; l < k; ++l) {
              const double av = ad[i * k + l];
              double* gbrow = gb + static_cast<std::size_t>(l) * n;
              for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
          }
        }
      });
}

/// y = x.W + b for a single vector ([D] -> [K]) or a stack of row vectors
/// ([T x D] -> [T x K]). This is the one place rows share a bias, so the
/// no-broadcasting rule stays intact everywhere else.
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  MITML_CHECK(w.rank() == 2, "linear: weight must be rank 2, got ",
              shape_str(w.shape()));
  const int d = w.dim(0), k = w.dim(1);
  const bool vector_in = x.rank() == 1;
  MITML_CHECK(vector_in ? x.dim(0) == d : (x.rank() == 2 && x.dim(1) == d),
              "linear: input ", shape_str(x.shape()),
              " incompatible with weight ", shape_str(w.shape()));
  const bool with_bias = b.defined();
  if (with_bias)
    MITML_CHECK(b.rank() == 1 && b.dim(0) == k, "linear: bias ",
                shape_str(b.shape()), " incompatible with weight ",
                shape_str(w.shape()));
  const int t = vector_in ? 1 : x.dim(0);

  std::vector<double> out(static_cast<std::size_t>(t) * k, 0.0);
  const double* xd = x.data().data();
  const double* wd = w.data().data();
  for (int r = 0; r < t; ++r) {
    double* orow = out.data() + static_cast<std::size_t>(r) * k;
    if (with_bias) {
      const double* bd = b.data().data();
      for (int j = 0; j < k; ++j) orow[j] = bd[j];
    }
    for (int l = 0; l < d; ++l) {
      const double xv = xd[r * d + l];
      const double* wrow = wd + static_cast<std::size_t>(l) * k;
      for (int j = 0; j < k; ++j) orow[j] += xv * wrow[j];
    }
  }

  Shape out_shape = vector_in ? Shape{k} : Shape{t, k};
  std::vector<Tensor> inputs = with_bias ? std::vector<Tensor>{x, w, b}
                                         : std::vector<Tensor>{x, w};
  auto px = x.impl(), pw = w.impl();
  auto pb = with_bias ? b.impl() : nullptr;
  return make_op(
      std::move(out_shape), std::move(out), std::move(inputs),
      [px, pw, pb, t, d, k](const TensorImpl& o) {
        const double* g = o.grad.data();
        if (double* gx = detail::grad_sink(*px)) {
          const double* wd = pw->data.data();
          for (int r = 0; r < t; ++r)
            for (int l = 0; l < d; ++l) {
              double acc = 0.0;
              const double* grow = g + static_cast<std::size_t>(r) * k;
              const double* wrow = wd + static_cast<std::size_t>(l) * k;
              for (int j = 0; j < k; ++j) acc += grow[j] * wrow[j];
              gx[r * d + l] += acc;
            }
        }
        if (double* gw = detail::grad_sink(*pw)) {
          const double* xd = px->data.data();
          for (int r = 0; r < t; ++r) {
            const double* grow = g + static_cast<std::size_t>(r) * k;
            for (int l = 0; l < d; ++l) {
              const double xv = xd[r * d + l];
              double* gwrow = gw + static_cast<std::size_t>(l) * k;
              for (int j = 0; j < k; ++j) gwrow[j] += xv * grow[j];
            }
          }
        }
        if (pb) {
          if (double* gb = detail::grad_sink(*pb)) {
            for (int r = 0; r < t; ++r) {
              const double* grow = g + static_cast<std::size_t>(r) * k;
              for (int j = 0; j < k; ++j) gb[j] += grow[j];
            }
          }
        }
      });
}

inline Tensor linear(const Tensor& x, const Tensor& w) {
  return linear(x, w, Tensor());
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Direct 2-D convolution (cross-correlation), NCHW by OCkhkw, one stride and
/// one symmetric zero padding for both spatial dimensions. The output extent
/// (H + 2 pad - kh) / stride + 1 must divide exactly; fractional geometries
/// are rejected rather than floored.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
                     int stride, int zero_pad) {
  MITML_CHECK(x.rank() == 4, "conv2d: input must be NxCxHxW, got ",
              shape_str(x.shape()));
  MITML_CHECK(w.rank() == 4, "conv2d: kernel must be OxCxKHxKW, got ",
              shape_str(w.shape()));
  MITML_CHECK(stride >= 1, "conv2d: stride must be positive, got ", stride);
  MITML_CHECK(zero_pad >= 0, "conv2d: zero_pad must be non-negative, got ",
              zero_pad);
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int o = w.dim(0), kc = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  MITML_CHECK(kc == c, "conv2d: channel mismatch, input has ", c,
              " kernel expects ", kc);
  MITML_CHECK(bias.rank() == 1 && bias.dim(0) == o, "conv2d: bias ",
              shape_str(bias.shape()), " must be [", o, "]");
  const int span_h = h + 2 * zero_pad - kh;
  const int span_w = wd + 2 * zero_pad - kw;
  MITML_CHECK(span_h >= 0 && span_h % stride == 0,
              "conv2d: output height (", h, " + 2*", zero_pad, " - ", kh,
              ")/", stride, " + 1 is not a positive integer");
  MITML_CHECK(span_w >= 0 && span_w % stride == 0,
              "conv2d: output width (", wd, " + 2*", zero_pad, " - ", kw, ")/",
              stride, " + 1 is not a positive integer");
  const int oh = span_h / stride + 1;
  const int ow = span_w / stride + 1;

  std::vector<double> out(
      static_cast<std::size_t>(n) * o * oh * ow, 0.0);
  const double* xd = x.data().data();
  const double* wdat = w.data().data();
  const double* bd = bias.data().data();

  for (int in = 0; in < n; ++in) {
    for (int io = 0; io < o; ++io) {
      double* oplane =
          out.data() + (static_cast<std::size_t>(in) * o + io) * oh * ow;
      for (int i = 0; i < oh * ow; ++i) oplane[i] = bd[io];
      for (int ic = 0; ic < c; ++ic) {
        const double* xplane =
            xd + (static_cast<std::size_t>(in) * c + ic) * h * wd;
        const double* wplane =
            wdat + (static_cast<std::size_t>(io) * c + ic) * kh * kw;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            double acc = 0.0;
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * stride + ky - zero_pad;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * stride + kx - zero_pad;
                if (ix < 0 || ix >= wd) continue;
                acc += xplane[iy * wd + ix] * wplane[ky * kw + kx];
              }
            }
            oplane[oy * ow + ox] += acc;
          }
        }
      }
    }
  }

  auto px = x.impl(), pw = w.impl(), pbias = bias.impl();
  return make_op(
      {n, o, oh, ow}, std::move(out), {x, w, bias},
      [px, pw, pbias, n, c, h, wd, o, kh, kw, oh, ow, stride,
       zero_pad](const TensorImpl& og) {
        const double* g = og.grad.data();
        double* gx = detail::grad_sink(*px);
        double* gw = detail::grad_sink(*pw);
        double* gb = detail::grad_sink(*pbias);
        const double* xd = px->data.data();
        const double* wdat = pw->data.data();
        for (int in = 0; in < n; ++in) {
          for (int io = 0; io < o; ++io) {
            const double* gplane =
                g + (static_cast<std::size_t>(in) * o + io) * oh * ow;
            if (gb) {
              double acc = 0.0;
              for (int i = 0; i < oh * ow; ++i) acc += gplane[i];
              gb[io] += acc;
            }
            if (!gx && !gw) continue;
            for (int ic = 0; ic < c; ++ic) {
              const std::size_t xoff =
                  (static_cast<std::size_t>(in) * c + ic) * h * wd;
              const std::size_t woff =
                  (static_cast<std::size_t>(io) * c + ic) * kh * kw;
              const double* xplane = xd + xoff;
              const double* wplane = wdat + woff;
              double* gxplane = gx ? gx + xoff : nullptr;
              double* gwplane = gw ? gw + woff : nullptr;
              for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                  const double gv = gplane[oy * ow + ox];
                  if (gv == 0.0) continue;
                  for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride + ky - zero_pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                      const int ix = ox * stride + kx - zero_pad;
                      if (ix < 0 || ix >= wd) continue;
                      if (gxplane)
                        gxplane[iy * wd + ix] += gv * wplane[ky * kw + kx];
                      if (gwplane)
                        gwplane[ky * kw + kx] += gv * xplane[iy * wd + ix];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

/// Zero padding of the two spatial dimensions of an NCHW tensor.
inline Tensor pad2d(const Tensor& x, int top, int bottom, int left,
                    int right) {
  MITML_CHECK(x.rank() == 4, "pad2d: input must be NxCxHxW, got ",
              shape_str(x.shape()));
  MITML_CHECK(top >= 0 && bottom >= 0 && left >= 0 && right >= 0,
              "pad2d: negative padding");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = h + top + bottom, ow = w + left + right;
  std::vector<double> out(static_cast<std::size_t>(n) * c * oh * ow, 0.0);
  const double* xd = x.data().data();
  for (int pl = 0; pl < n * c; ++pl) {
    const double* src = xd + static_cast<std::size_t>(pl) * h * w;
    double* dst = out.data() + static_cast<std::size_t>(pl) * oh * ow;
    for (int y = 0; y < h; ++y)
      std::copy(src + y * w, src + (y + 1) * w,
                dst + (y + top) * ow + left);
  }
  auto px = x.impl();
  return make_op({n, c, oh, ow}, std::move(out), {x},
                 [px, n, c, h, w, oh, ow, top, left](const TensorImpl& o) {
                   if (double* gx = detail::grad_sink(*px)) {
                     const double* g = o.grad.data();
                     for (int pl = 0; pl < n * c; ++pl) {
                       const double* gsrc =
                           g + static_cast<std::size_t>(pl) * oh * ow;
                       double* gdst = gx + static_cast<std::size_t>(pl) * h * w;
                       for (int y = 0; y < h; ++y)
                         for (int x2 = 0; x2 < w; ++x2)
                           gdst[y * w + x2] +=
                               gsrc[(y + top) * ow + x2 + left];
                     }
                   }
                 });
}

/// Spatial mean of an NCHW map: [N x C x H x W] -> [N x C].
inline Tensor global_avg_pool(const Tensor& x) {
  MITML_CHECK(x.rank() == 4, "global_avg_pool: input must be NxCxHxW, got ",
              shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int area = h * w;
  std::vector<double> out(static_cast<std::size_t>(n) * c, 0.0);
  const double* xd = x.data().data();
  for (int pl = 0; pl < n * c; ++pl) {
    double acc = 0.0;
    const double* src = xd + static_cast<std::size_t>(pl) * area;
    for (int i = 0; i < area; ++i) acc += src[i];
    out[static_cast<std::size_t>(pl)] = acc / area;
  }
  auto px = x.impl();
  return make_op({n, c}, std::move(out), {x},
                 [px, n, c, area](const TensorImpl& o) {
                   if (double* gx = detail::grad_sink(*px)) {
                     const double* g = o.grad.data();
                     for (int pl = 0; pl < n * c; ++pl) {
                       const double gv = g[pl] / area;
                       double* dst = gx + static_cast<std::size_t>(pl) * area;
                       for (int i = 0; i < area; ++i) dst[i] += gv;
                     }
                   }
                 });
}

// ---------------------------------------------------------------------------
// Shape plumbing
// ---------------------------------------------------------------------------

inline Tensor reshape(const Tensor& x, Shape shape) {
  MITML_CHECK(numel(shape) == x.size(), "reshape: ", shape_str(x.shape()),
              " does not hold ", numel(shape), " elements");
  std::vector<double> out(x.data());
  auto px = x.impl();
  return make_op(std::move(shape), std::move(out), {x},
                 [px](const TensorImpl& o) {
                   if (double* gx = detail::grad_sink(*px)) {
                     const double* g = o.grad.data();
                     for (std::size_t i = 0; i < o.data.size(); ++i)
                       gx[i] += g[i];
                   }
                 });
}

/// Row r of a [T x D] tensor as a [D] vector.
inline Tensor row_vec(const Tensor& x, int r) {
  MITML_CHECK(x.rank() == 2, "row_vec: input must be rank 2, got ",
              shape_str(x.shape()));
  MITML_CHECK(r >= 0 && r < x.dim(0), "row_vec: row ", r, " outside ",
              shape_str(x.shape()));
  const int d = x.dim(1);
  std::vector<double> out(x.data().begin() + static_cast<std::size_t>(r) * d,
                          x.data().begin() +
                              static_cast<std::size_t>(r + 1) * d);
  auto px = x.impl();
  return make_op({d}, std::move(out), {x},
                 [px, r, d](const TensorImpl& o) {
                   if (double* gx = detail::grad_sink(*px)) {
                     const double* g = o.grad.data();
                     for (int i = 0; i < d; ++i)
                       gx[static_cast<std::size_t>(r) * d + i] += g[i];
                   }
                 });
}

/// One element by flat index, as a [1] scalar tensor.
inline Tensor element(const Tensor& x, std::int64_t index) {
  MITML_CHECK(index >= 0 && index < x.size(), "element: index ", index,
              " outside tensor of ", x.size(), " values");
  auto px = x.impl();
  return make_op({1}, {x[index]}, {x},
                 [px, index](const TensorImpl& o) {
                   if (double* gx = detail::grad_sink(*px))
                     gx[static_cast<std::size_t>(index)] += o.grad[0];
                 });
}

/// Stacks T equally sized [D] vectors into a [T x D] tensor.
inline Tensor stack_rows(const std::vector<Tensor>& rows) {
  MITML_CHECK(!rows.empty(), "stack_rows: empty input");
  const int d = rows.front().dim(0);
  for (const auto& r : rows)
    MITML_CHECK(r.rank() == 1 && r.dim(0) == d,
                "stack_rows: inconsistent row shape ", shape_str(r.shape()));
  const int t = static_cast<int>(rows.size());
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(t) * d);
  for (const auto& r : rows)
    out.insert(out.end(), r.data().begin(), r.data().end());
  std::vector<std::shared_ptr<TensorImpl>> impls;
  impls.reserve(rows.size());
  for (const auto& r : rows) impls.push_back(r.impl());
  return make_op({t, d}, std::move(out), rows,
                 [impls, d](const TensorImpl& o) {
                   const double* g = o.grad.data();
                   for (std::size_t r = 0; r < impls.size(); ++r) {
                     if (double* gr = detail::grad_sink(*impls[r])) {
                       for (int i = 0; i < d; ++i) gr[i] += g[r * d + i];
                     }
                   }
                 });
}

// ---------------------------------------------------------------------------
// Reductions and normalizations along one axis
// ---------------------------------------------------------------------------

namespace detail {

struct AxisSpan {
  std::size_t outer, n, inner;
};

inline AxisSpan axis_span(const Tensor& x, int axis, const char* op) {
  MITML_CHECK(axis >= 0 && axis < x.rank(), op, ": axis ", axis,
              " invalid for shape ", shape_str(x.shape()));
  AxisSpan s{1, static_cast<std::size_t>(x.dim(axis)), 1};
  for (int i = 0; i < axis; ++i) s.outer *= static_cast<std::size_t>(x.dim(i));
  for (int i = axis + 1; i < x.rank(); ++i)
    s.inner *= static_cast<std::size_t>(x.dim(i));
  return s;
}

inline Shape drop_axis(const Shape& in, int axis) {
  Shape out;
  for (int i = 0; i < static_cast<int>(in.size()); ++i)
    if (i != axis) out.push_back(in[i]);
  if (out.empty()) out.push_back(1);
  return out;
}

}  // namespace detail

inline Tensor sum(const Tensor& x, int axis) {
  const auto s = detail::axis_span(x, axis, "sum");
  std::vector<double> out(s.outer * s.inner, 0.0);
  const double* xd = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < s.n; ++k)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += xd[(o * s.n + k) * s.inner + i];
  auto px = x.impl();
  return make_op(detail::drop_axis(x.shape(), axis), std::move(out), {x},
                 [px, s](const TensorImpl& og) {
                   if (double* gx = detail::grad_sink(*px)) {
                     const double* g = og.grad.data();
                     for (std::size_t o = 0; o < s.outer; ++o)
                       for (std::size_t k = 0; k < s.n; ++k)
                         for (std::size_t i = 0; i < s.inner; ++i)
                           gx[(o * s.n + k) * s.inner + i] +=
                               g[o * s.inner + i];
                   }
                 });
}

inline Tensor mean(const Tensor& x, int axis) {
  const auto s = detail::axis_span(x, axis, "mean");
  return scale(sum(x, axis), 1.0 / static_cast<double>(s.n));
}

/// Componentwise maximum along an axis; gradient routes to the first argmax.
inline Tensor max_along(const Tensor& x, int axis) {
  const auto s = detail::axis_span(x, axis, "max");
  std::vector<double> out(s.outer * s.inner);
  std::vector<std::size_t> argmax(s.outer * s.inner, 0);
  const double* xd = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double best = xd[(o * s.n) * s.inner + i];
      std::size_t bk = 0;
      for (std::size_t k = 1; k < s.n; ++k) {
        const double v = xd[(o * s.n + k) * s.inner + i];
        if (v > best) {
          best = v;
          bk = k;
        }
      }
      out[o * s.inner + i] = best;
      argmax[o * s.inner + i] = bk;
    }
  auto px = x.impl();
  return make_op(detail::drop_axis(x.shape(), axis), std::move(out), {x},
                 [px, s, argmax](const TensorImpl& og) {
                   if (double* gx = detail::grad_sink(*px)) {
                     const double* g = og.grad.data();
                     for (std::size_t o = 0; o < s.outer; ++o)
                       for (std::size_t i = 0; i < s.inner; ++i) {
                         const std::size_t k = argmax[o * s.inner + i];
                         gx[(o * s.n + k) * s.inner + i] += g[o * s.inner + i];
                       }
                   }
                 });
}

inline Tensor softmax(const Tensor& x, int axis) {
  const auto s = detail::axis_span(x, axis, "softmax");
  std::vector<double> out(x.data());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double mx = -1e300;
      for (std::size_t k = 0; k < s.n; ++k)
        mx = std::max(mx, out[(o * s.n + k) * s.inner + i]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) {
        double& v = out[(o * s.n + k) * s.inner + i];
        v = std::exp(v - mx);
        z += v;
      }
      for (std::size_t k = 0; k < s.n; ++k)
        out[(o * s.n + k) * s.inner + i] /= z;
    }
  auto px = x.impl();
  return make_op(x.shape(), std::move(out), {x},
                 [px, s](const TensorImpl& og) {
                   if (double* gx = detail::grad_sink(*px)) {
                     const double* g = og.grad.data();
                     const double* y = og.data.data();
                     for (std::size_t o = 0; o < s.outer; ++o)
                       for (std::size_t i = 0; i < s.inner; ++i) {
                         double dot = 0.0;
                         for (std::size_t k = 0; k < s.n; ++k) {
                           const std::size_t idx = (o * s.n + k) * s.inner + i;
                           dot += g[idx] * y[idx];
                         }
                         for (std::size_t k = 0; k < s.n; ++k) {
                           const std::size_t idx = (o * s.n + k) * s.inner + i;
                           gx[idx] += y[idx] * (g[idx] - dot);
                         }
                       }
                   }
                 });
}

inline Tensor log_softmax(const Tensor& x, int axis) {
  const auto s = detail::axis_span(x, axis, "log_softmax");
  std::vector<double> out(x.data());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double mx = -1e300;
      for (std::size_t k = 0; k < s.n; ++k)
        mx = std::max(mx, out[(o * s.n + k) * s.inner + i]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.n; ++k)
        z += std::exp(out[(o * s.n + k) * s.inner + i] - mx);
      const double lz = mx + std::log(z);
      for (std::size_t k = 0; k < s.n; ++k)
        out[(o * s.n + k) * s.inner + i] -= lz;
    }
  auto px = x.impl();
  return make_op(x.shape(), std::move(out), {x},
                 [px, s](const TensorImpl& og) {
                   if (double* gx = detail::grad_sink(*px)) {
                     const double* g = og.grad.data();
                     const double* y = og.data.data();
                     for (std::size_t o = 0; o < s.outer; ++o)
                       for (std::size_t i = 0; i < s.inner; ++i) {
                         double gsum = 0.0;
                         for (std::size_t k = 0; k < s.n; ++k)
                           gsum += g[(o * s.n + k) * s.inner + i];
                         for (std::size_t k = 0; k < s.n; ++k) {
                           const std::size_t idx = (o * s.n + k) * s.inner + i;
                           gx[idx] += g[idx] - std::exp(y[idx]) * gsum;
                         }
                       }
                   }
                 });
}

inline constexpr double kL2NormalizeEpsilon = 1e-12;

/// x / max(||x||, eps) along the given axis. Near-zero lanes fall back to a
/// constant 1/eps scaling, so the op stays total.
inline Tensor l2_normalize(const Tensor& x, int axis) {
  const auto s = detail::axis_span(x, axis, "l2_normalize");
  std::vector<double> out(x.data());
  std::vector<double> norms(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double sq = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) {
        const double v = out[(o * s.n + k) * s.inner + i];
        sq += v * v;
      }
      const double norm = std::max(std::sqrt(sq), kL2NormalizeEpsilon);
      norms[o * s.inner + i] = norm;
      for (std::size_t k = 0; k < s.n; ++k)
        out[(o * s.n + k) * s.inner + i] /= norm;
    }
  auto px = x.impl();
  return make_op(
      x.shape(), std::move(out), {x},
      [px, s, norms](const TensorImpl& og) {
        if (double* gx = detail::grad_sink(*px)) {
          const double* g = og.grad.data();
          const double* y = og.data.data();
          for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t i = 0; i < s.inner; ++i) {
              const double norm = norms[o * s.inner + i];
              if (norm <= kL2NormalizeEpsilon) {
                for (std::size_t k = 0; k < s.n; ++k) {
                  const std::size_t idx = (o * s.n + k) * s.inner + i;
                  gx[idx] += g[idx] / norm;
                }
                continue;
              }
              double dot = 0.0;
              for (std::size_t k = 0; k < s.n; ++k) {
                const std::size_t idx = (o * s.n + k) * s.inner + i;
                dot += g[idx] * y[idx];
              }
              for (std::size_t k = 0; k < s.n; ++k) {
                const std::size_t idx = (o * s.n + k) * s.inner + i;
                gx[idx] += (g[idx] - y[idx] * dot) / norm;
              }
            }
        }
      });
}

inline Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  auto px = x.impl();
  return make_op({1}, {acc}, {x},
                 [px](const TensorImpl& o) {
                   if (double* gx = detail::grad_sink(*px)) {
                     const double g = o.grad[0];
                     for (std::size_t i = 0; i < px->data.size(); ++i)
                       gx[i] += g;
                   }
                 });
}

inline Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

}  // namespace mitml

#endif  // MITML_OPS_HPP
