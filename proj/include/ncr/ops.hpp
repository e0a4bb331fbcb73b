#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ncr/kernels.hpp"
#include "ncr/tensor.hpp"

namespace ncr {

namespace detail {
template <typename T>
void check_chw(const TensorT<T>& t, const char* what) {
  if (t.rank() != 3)
    throw ShapeError(std::string(what) + " must be rank-3 (C x H x W), got rank " +
                     std::to_string(t.rank()));
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Convolutions

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride = 1,
                  int pad = 0) {
  detail::check_chw(x, "conv2d input");
  if (w.rank() != 4) throw ShapeError("conv2d kernel must be rank-4 (Cout x Cin x kH x kW)");
  const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin)
    throw ShapeError("conv2d kernel Cin=" + std::to_string(w.dim(1)) +
                     " does not match input channels=" + std::to_string(cin));
  if (kh % 2 == 0 || kw % 2 == 0) throw ConfigError("conv2d kernel extents must be odd");
  if (b.numel() != cout)
    throw ShapeError("conv2d bias extent=" + std::to_string(b.numel()) +
                     " does not match Cout=" + std::to_string(cout));
  const int ho = kern::conv_out_extent(h, kh, stride, pad);
  const int wo = kern::conv_out_extent(wd, kw, stride, pad);
  if (ho <= 0 || wo <= 0) throw ConfigError("conv2d output extent is non-positive");

  auto out = TensorT<T>::zeros({cout, ho, wo});
  kern::conv2d_fwd(x.data(), cin, h, wd, w.data(), cout, kh, kw, b.data(), stride, pad,
                   out.data(), ho, wo);
  auto xn = x.node(), wn = w.node(), bn = b.node(), on = out.node();
  detail::record<T>(out, {x, w, b}, [=]() {
    if (xn->requires_grad) {
      xn->ensure_grad();
      kern::conv2d_bwd_input(wn->v.data(), cout, cin, kh, kw, on->g.data(), ho, wo, stride, pad,
                             xn->g.data(), h, wd);
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      kern::conv2d_bwd_weight(xn->v.data(), cin, h, wd, on->g.data(), cout, ho, wo, stride, pad,
                              kh, kw, wn->g.data());
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      kern::conv2d_bwd_bias(on->g.data(), cout, ho, wo, bn->g.data());
    }
  });
  return out;
}

// Weight layout [Cin][Cout][kH][kW]; output extent (H-1)*stride - 2*pad + kH + out_pad.
template <typename T>
TensorT<T> conv_transpose2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                            int stride = 2, int pad = 1, int out_pad = 1) {
  detail::check_chw(x, "conv_transpose2d input");
  const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  if (w.rank() != 4 || w.dim(0) != cin)
    throw ShapeError("conv_transpose2d kernel must be (Cin x Cout x kH x kW) with Cin=" +
                     std::to_string(cin));
  const int cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const int ho = (h - 1) * stride - 2 * pad + kh + out_pad;
  const int wo = (wd - 1) * stride - 2 * pad + kw + out_pad;
  if (ho <= 0 || wo <= 0) throw ConfigError("conv_transpose2d output extent is non-positive");
  auto out = TensorT<T>::zeros({cout, ho, wo});
  kern::conv_transpose2d_fwd(x.data(), cin, h, wd, w.data(), cout, kh, kw, b.data(), stride, pad,
                             out.data(), ho, wo);
  auto xn = x.node(), wn = w.node(), bn = b.node(), on = out.node();
  detail::record<T>(out, {x, w, b}, [=]() {
    if (xn->requires_grad) {
      xn->ensure_grad();
      kern::conv_transpose2d_bwd_input(wn->v.data(), cin, cout, kh, kw, on->g.data(), ho, wo,
                                       stride, pad, xn->g.data(), h, wd);
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      kern::conv_transpose2d_bwd_weight(xn->v.data(), cin, h, wd, on->g.data(), cout, ho, wo,
                                        stride, pad, kh, kw, wn->g.data());
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      kern::conv2d_bwd_bias(on->g.data(), cout, ho, wo, bn->g.data());
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

template <typename T>
TensorT<T> resize_bilinear(const TensorT<T>& x, int ho, int wo) {
  detail::check_chw(x, "resize input");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto out = TensorT<T>::zeros({c, ho, wo});
  kern::resize_bilinear_fwd(x.data(), c, h, w, out.data(), ho, wo);
  auto xn = x.node(), on = out.node();
  detail::record<T>(out, {x}, [=]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    kern::resize_bilinear_bwd(on->g.data(), c, ho, wo, xn->g.data(), h, w);
  });
  return out;
}

// Bilinear 2x upsample followed by a size-preserving convolution.
template <typename T>
TensorT<T> upconv2x(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  if (x.dim(1) < 2 || x.dim(2) < 2) throw ConfigError("upconv2x requires spatial extents >= 2");
  auto up = resize_bilinear(x, 2 * x.dim(1), 2 * x.dim(2));
  return conv2d(up, w, b, 1, w.dim(2) / 2);
}

// coords: [2][H][W] normalized to [0,1]^2 (u along texture width); out-of-range
// coordinates clamp to the border. Differentiable w.r.t. the texture only.
template <typename T>
TensorT<T> grid_sample_bilinear(const TensorT<T>& tex, const TensorT<T>& coords) {
  detail::check_chw(tex, "grid_sample texture");
  detail::check_chw(coords, "grid_sample coords");
  if (coords.dim(0) != 2) throw ShapeError("grid_sample coords must have 2 channels (u, v)");
  const int c = tex.dim(0), ht = tex.dim(1), wt = tex.dim(2);
  const int h = coords.dim(1), w = coords.dim(2);
  auto taps = kern::grid_taps(coords.data(), h, w, ht, wt);
  auto out = TensorT<T>::zeros({c, h, w});
  kern::grid_sample_fwd(tex.data(), c, ht, wt, taps, out.data());
  auto tn = tex.node(), on = out.node();
  detail::record<T>(out, {tex}, [=, taps = std::move(taps)]() {
    if (!tn->requires_grad) return;
    tn->ensure_grad();
    kern::grid_sample_bwd_tex(on->g.data(), c, taps, tn->g.data(), ht, wt);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Filters

template <typename T>
std::vector<T> gaussian_kernel1d(int size, T sigma) {
  if (size % 2 == 0) throw ConfigError("gaussian kernel size must be odd, got " + std::to_string(size));
  if (!(sigma > T(0))) throw ConfigError("gaussian sigma must be positive");
  std::vector<T> k(static_cast<size_t>(size));
  int c = size / 2;
  T sum = T(0);
  for (int i = 0; i < size; ++i) {
    T d = static_cast<T>(i - c);
    k[i] = std::exp(-d * d / (2 * sigma * sigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable normalized Gaussian blur, clamped borders.
template <typename T>
TensorT<T> gaussian_lpf(const TensorT<T>& x, int size, T sigma) {
  detail::check_chw(x, "gaussian_lpf input");
  auto k = gaussian_kernel1d(size, sigma);
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto mid = TensorT<T>::zeros({c, h, w});
  kern::sep_filter_fwd(x.data(), c, h, w, k, 0, mid.data());
  auto out = TensorT<T>::zeros({c, h, w});
  kern::sep_filter_fwd(mid.data(), c, h, w, k, 1, out.data());
  auto xn = x.node(), on = out.node();
  detail::record<T>(out, {x}, [=]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    std::vector<T> gmid(static_cast<size_t>(c) * h * w, T(0));
    kern::sep_filter_bwd(on->g.data(), c, h, w, k, 1, gmid.data());
    kern::sep_filter_bwd(gmid.data(), c, h, w, k, 0, xn->g.data());
  });
  return out;
}

// ---------------------------------------------------------------------------
// Pointwise and structural ops

template <typename T, typename Fwd, typename Bwd>
TensorT<T> pointwise(const TensorT<T>& x, Fwd f, Bwd dfdx) {
  auto out = TensorT<T>::zeros(x.shape());
  const T* in = x.data();
  T* o = out.data();
  const int n = x.numel();
  for (int i = 0; i < n; ++i) o[i] = f(in[i]);
  auto xn = x.node(), on = out.node();
  detail::record<T>(out, {x}, [=]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int i = 0; i < n; ++i) xn->g[i] += dfdx(xn->v[i], on->v[i]) * on->g[i];
  });
  return out;
}

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& x, T slope = T(0.2)) {
  return pointwise(
      x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

// tanh squashed to [0,1]: 0.5 * (tanh(x) + 1)
template <typename T>
TensorT<T> tanh01(const TensorT<T>& x) {
  return pointwise(
      x, [](T v) { return T(0.5) * (std::tanh(v) + T(1)); },
      [](T, T o) {
        T t = T(2) * o - T(1);
        return T(0.5) * (T(1) - t * t);
      });
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: operand shapes differ");
  auto out = TensorT<T>::zeros(a.shape());
  const int n = a.numel();
  for (int i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  auto an = a.node(), bn = b.node(), on = out.node();
  detail::record<T>(out, {a, b}, [=]() {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int i = 0; i < n; ++i) an->g[i] += on->g[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int i = 0; i < n; ++i) bn->g[i] += on->g[i];
    }
  });
  return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("sub: operand shapes differ");
  auto out = TensorT<T>::zeros(a.shape());
  const int n = a.numel();
  for (int i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  auto an = a.node(), bn = b.node(), on = out.node();
  detail::record<T>(out, {a, b}, [=]() {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int i = 0; i < n; ++i) an->g[i] += on->g[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int i = 0; i < n; ++i) bn->g[i] -= on->g[i];
    }
  });
  return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("mul: operand shapes differ");
  auto out = TensorT<T>::zeros(a.shape());
  const int n = a.numel();
  for (int i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  auto an = a.node(), bn = b.node(), on = out.node();
  detail::record<T>(out, {a, b}, [=]() {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int i = 0; i < n; ++i) an->g[i] += bn->v[i] * on->g[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int i = 0; i < n; ++i) bn->g[i] += an->v[i] * on->g[i];
    }
  });
  return out;
}

template <typename T>
TensorT<T> mul_scalar(const TensorT<T>& x, T s) {
  return pointwise(
      x, [s](T v) { return s * v; }, [s](T, T) { return s; });
}

template <typename T>
TensorT<T> square(const TensorT<T>& x) {
  return pointwise(
      x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& xs) {
  if (xs.empty()) throw UsageError("concat_channels: empty input list");
  const int h = xs[0].dim(1), w = xs[0].dim(2);
  int ctot = 0;
  for (const auto& x : xs) {
    detail::check_chw(x, "concat input");
    if (x.dim(1) != h || x.dim(2) != w)
      throw ShapeError("concat_channels: spatial extents differ (" + std::to_string(x.dim(1)) +
                       "x" + std::to_string(x.dim(2)) + " vs " + std::to_string(h) + "x" +
                       std::to_string(w) + ")");
    ctot += x.dim(0);
  }
  auto out = TensorT<T>::zeros({ctot, h, w});
  const size_t plane = static_cast<size_t>(h) * w;
  size_t off = 0;
  for (const auto& x : xs) {
    std::copy(x.data(), x.data() + x.numel(), out.data() + off);
    off += static_cast<size_t>(x.dim(0)) * plane;
  }
  std::vector<typename TensorT<T>::NodePtr> nodes;
  for (const auto& x : xs) nodes.push_back(x.node());
  auto on = out.node();
  detail::record<T>(out, xs, [=]() {
    size_t o = 0;
    for (auto& xn : nodes) {
      size_t count = xn->v.size();
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (size_t i = 0; i < count; ++i) xn->g[i] += on->g[o + i];
      }
      o += count;
    }
  });
  return out;
}

template <typename T>
TensorT<T> slice_channels(const TensorT<T>& x, int c0, int count) {
  detail::check_chw(x, "slice input");
  if (c0 < 0 || c0 + count > x.dim(0))
    throw ShapeError("slice_channels: range [" + std::to_string(c0) + ", " +
                     std::to_string(c0 + count) + ") exceeds channel extent " +
                     std::to_string(x.dim(0)));
  const size_t plane = static_cast<size_t>(x.dim(1)) * x.dim(2);
  auto out = TensorT<T>::zeros({count, x.dim(1), x.dim(2)});
  std::copy(x.data() + c0 * plane, x.data() + (c0 + count) * plane, out.data());
  auto xn = x.node(), on = out.node();
  detail::record<T>(out, {x}, [=]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < static_cast<size_t>(count) * plane; ++i)
      xn->g[c0 * plane + i] += on->g[i];
  });
  return out;
}

// Multiplies `count` channels starting at `offset` by per-channel constants;
// the remaining channels pass through.
template <typename T>
TensorT<T> scale_channels(const TensorT<T>& x, const std::vector<T>& coeffs, int offset) {
  detail::check_chw(x, "scale_channels input");
  const int count = static_cast<int>(coeffs.size());
  if (offset + count > x.dim(0))
    throw ConfigError("scale_channels needs channels [" + std::to_string(offset) + ", " +
                      std::to_string(offset + count) + ") but input has " +
                      std::to_string(x.dim(0)));
  auto out = TensorT<T>::zeros(x.shape());
  const size_t plane = static_cast<size_t>(x.dim(1)) * x.dim(2);
  std::copy(x.data(), x.data() + x.numel(), out.data());
  for (int c = 0; c < count; ++c) {
    T* p = out.data() + (offset + c) * plane;
    for (size_t i = 0; i < plane; ++i) p[i] *= coeffs[c];
  }
  auto xn = x.node(), on = out.node();
  detail::record<T>(out, {x}, [=]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    const size_t n = xn->v.size();
    for (size_t i = 0; i < n; ++i) xn->g[i] += on->g[i];
    for (int c = 0; c < count; ++c) {
      T* gp = xn->g.data() + (offset + c) * plane;
      const T* og = on->g.data() + (offset + c) * plane;
      for (size_t i = 0; i < plane; ++i) gp[i] += (coeffs[c] - T(1)) * og[i];
    }
  });
  return out;
}

// Tiles a vector [m] into [m][h][w].
template <typename T>
TensorT<T> broadcast_vector(const TensorT<T>& v, int h, int w) {
  if (v.rank() != 1) throw ShapeError("broadcast_vector expects a rank-1 tensor");
  const int m = v.dim(0);
  auto out = TensorT<T>::zeros({m, h, w});
  const size_t plane = static_cast<size_t>(h) * w;
  for (int c = 0; c < m; ++c) std::fill_n(out.data() + c * plane, plane, v.data()[c]);
  auto vn = v.node(), on = out.node();
  detail::record<T>(out, {v}, [=]() {
    if (!vn->requires_grad) return;
    vn->ensure_grad();
    for (int c = 0; c < m; ++c) {
      double acc = 0;
      const T* g = on->g.data() + c * plane;
      for (size_t i = 0; i < plane; ++i) acc += g[i];
      vn->g[c] += static_cast<T>(acc);
    }
  });
  return out;
}

// Dense layer: w [out][in] * x [in] + b [out].
template <typename T>
TensorT<T> affine(const TensorT<T>& w, const TensorT<T>& x, const TensorT<T>& b) {
  if (w.rank() != 2 || x.rank() != 1)
    throw ShapeError("affine expects w rank-2 and x rank-1");
  const int nout = w.dim(0), nin = w.dim(1);
  if (x.dim(0) != nin)
    throw ShapeError("affine input extent " + std::to_string(x.dim(0)) +
                     " does not match weight columns " + std::to_string(nin));
  if (b.numel() != nout) throw ShapeError("affine bias extent mismatch");
  auto out = TensorT<T>::zeros({nout});
  for (int o = 0; o < nout; ++o) {
    double acc = b.data()[o];
    const T* row = w.data() + static_cast<size_t>(o) * nin;
    for (int i = 0; i < nin; ++i) acc += static_cast<double>(row[i]) * x.data()[i];
    out.data()[o] = static_cast<T>(acc);
  }
  auto wn = w.node(), xn = x.node(), bn = b.node(), on = out.node();
  detail::record<T>(out, {w, x, b}, [=]() {
    for (int o = 0; o < nout; ++o) {
      T g = on->g[o];
      if (wn->requires_grad) {
        wn->ensure_grad();
        for (int i = 0; i < nin; ++i) wn->g[static_cast<size_t>(o) * nin + i] += g * xn->v[i];
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (int i = 0; i < nin; ++i) xn->g[i] += g * wn->v[static_cast<size_t>(o) * nin + i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        bn->g[o] += g;
      }
    }
  });
  return out;
}

template <typename T>
TensorT<T> crop_spatial(const TensorT<T>& x, int y0, int x0, int h, int w) {
  detail::check_chw(x, "crop input");
  if (y0 < 0 || x0 < 0 || y0 + h > x.dim(1) || x0 + w > x.dim(2))
    throw ShapeError("crop window exceeds input extents");
  const int c = x.dim(0), ih = x.dim(1), iw = x.dim(2);
  auto out = TensorT<T>::zeros({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      std::copy(x.data() + (static_cast<size_t>(ch) * ih + y0 + y) * iw + x0,
                x.data() + (static_cast<size_t>(ch) * ih + y0 + y) * iw + x0 + w,
                out.data() + (static_cast<size_t>(ch) * h + y) * w);
  auto xn = x.node(), on = out.node();
  detail::record<T>(out, {x}, [=]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
          xn->g[(static_cast<size_t>(ch) * ih + y0 + y) * iw + x0 + xx] +=
              on->g[(static_cast<size_t>(ch) * h + y) * w + xx];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and losses

template <typename T>
TensorT<T> sum(const TensorT<T>& x) {
  auto out = TensorT<T>::zeros({1});
  double acc = 0;
  for (int i = 0; i < x.numel(); ++i) acc += x.data()[i];
  out.data()[0] = static_cast<T>(acc);
  auto xn = x.node(), on = out.node();
  detail::record<T>(out, {x}, [=]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    T g = on->g[0];
    for (auto& v : xn->g) v += g;
  });
  return out;
}

template <typename T>
TensorT<T> mean(const TensorT<T>& x) {
  return mul_scalar(sum(x), T(1) / static_cast<T>(x.numel()));
}

// Mean absolute difference; subgradient 0 at ties.
template <typename T>
TensorT<T> l1(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape() != b.shape()) throw UsageError("l1: operand shapes differ");
  auto out = TensorT<T>::zeros({1});
  const int n = a.numel();
  double acc = 0;
  for (int i = 0; i < n; ++i) acc += std::abs(static_cast<double>(a.data()[i]) - b.data()[i]);
  out.data()[0] = static_cast<T>(acc / n);
  auto an = a.node(), bn = b.node(), on = out.node();
  detail::record<T>(out, {a, b}, [=]() {
    T g = on->g[0] / static_cast<T>(n);
    for (int i = 0; i < n; ++i) {
      T d = an->v[i] - bn->v[i];
      T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      if (an->requires_grad) {
        an->ensure_grad();
        an->g[i] += g * s;
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        bn->g[i] -= g * s;
      }
    }
  });
  return out;
}

// L1 over pixels where mask[0][y][x] > 0.5, averaged over channels and
// covered pixels. Mask is data (no gradient path).
template <typename T>
TensorT<T> masked_l1(const TensorT<T>& a, const TensorT<T>& b, const TensorT<T>& mask) {
  if (a.shape() != b.shape()) throw UsageError("masked_l1: operand shapes differ");
  detail::check_chw(a, "masked_l1 input");
  if (mask.dim(1) != a.dim(1) || mask.dim(2) != a.dim(2))
    throw UsageError("masked_l1: mask spatial extents differ from inputs");
  const int c = a.dim(0);
  const size_t plane = static_cast<size_t>(a.dim(1)) * a.dim(2);
  double covered = 0;
  for (size_t i = 0; i < plane; ++i) covered += mask.data()[i] > T(0.5) ? 1.0 : 0.0;
  const double denom = std::max(1.0, covered) * c;
  auto out = TensorT<T>::zeros({1});
  double acc = 0;
  for (int ch = 0; ch < c; ++ch)
    for (size_t i = 0; i < plane; ++i)
      if (mask.data()[i] > T(0.5))
        acc += std::abs(static_cast<double>(a.data()[ch * plane + i]) - b.data()[ch * plane + i]);
  out.data()[0] = static_cast<T>(acc / denom);
  auto an = a.node(), bn = b.node(), mn = mask.node(), on = out.node();
  detail::record<T>(out, {a, b}, [=]() {
    T g = static_cast<T>(on->g[0] / denom);
    for (int ch = 0; ch < c; ++ch)
      for (size_t i = 0; i < plane; ++i) {
        if (mn->v[i] <= T(0.5)) continue;
        T d = an->v[ch * plane + i] - bn->v[ch * plane + i];
        T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
        if (an->requires_grad) {
          an->ensure_grad();
          an->g[ch * plane + i] += g * s;
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          bn->g[ch * plane + i] -= g * s;
        }
      }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Spherical harmonics

// Real SH basis for l in {0,1,2} without the Condon-Shortley phase, ordered
// (Y00, Y1-1, Y10, Y11, Y2-2, Y2-1, Y20, Y21, Y22). Input is normalized here;
// a zero vector is a domain error.
template <typename T>
std::array<T, 9> sh_basis9(T x, T y, T z) {
  double n = std::sqrt(static_cast<double>(x) * x + static_cast<double>(y) * y +
                       static_cast<double>(z) * z);
  if (n < 1e-12) throw UsageError("sh_basis9: zero-length direction");
  double xr = x / n, yr = y / n, zr = z / n;
  constexpr double k0 = 0.2820947917738781;   // 1 / (2 sqrt(pi))
  constexpr double k1 = 0.4886025119029199;   // sqrt(3 / (4 pi))
  constexpr double k2 = 1.0925484305920792;   // sqrt(15 / (4 pi))
  constexpr double k20 = 0.31539156525252005; // sqrt(5 / (16 pi))
  constexpr double k22 = 0.5462742152960396;  // sqrt(15 / (16 pi))
  return {static_cast<T>(k0),
          static_cast<T>(k1 * yr),
          static_cast<T>(k1 * zr),
          static_cast<T>(k1 * xr),
          static_cast<T>(k2 * xr * yr),
          static_cast<T>(k2 * yr * zr),
          static_cast<T>(k20 * (3 * zr * zr - 1)),
          static_cast<T>(k2 * xr * zr),
          static_cast<T>(k22 * (xr * xr - yr * yr))};
}

}  // namespace ncr
