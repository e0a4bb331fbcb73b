#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

// OpenMP compute kernels behind the recorded ops. Every parallel loop writes
// disjoint output ranges per thread (no atomics, no reductions across
// threads), so results are bit-identical regardless of thread count.

namespace ncr::kern {

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

template <typename T>
void conv2d_fwd(const T* in, int cin, int h, int w, const T* weight, int cout, int kh, int kw,
                const T* bias, int stride, int pad, T* out, int ho, int wo) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < cout; ++oc)
    for (int oy = 0; oy < ho; ++oy) {
      T* orow = out + (static_cast<size_t>(oc) * ho + oy) * wo;
      T b = bias ? bias[oc] : T(0);
      for (int ox = 0; ox < wo; ++ox) orow[ox] = b;
      for (int ic = 0; ic < cin; ++ic)
        for (int ky = 0; ky < kh; ++ky) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const T* irow = in + (static_cast<size_t>(ic) * h + iy) * w;
          const T* wrow = weight + ((static_cast<size_t>(oc) * cin + ic) * kh + ky) * kw;
          if (stride == 1) {
            for (int kx = 0; kx < kw; ++kx) {
              T wv = wrow[kx];
              int x0 = std::max(0, pad - kx);
              int x1 = std::min(wo, w + pad - kx);
              const T* ishift = irow + x0 - pad + kx;
              for (int ox = x0; ox < x1; ++ox) orow[ox] += wv * ishift[ox - x0];
            }
          } else {
            for (int kx = 0; kx < kw; ++kx) {
              T wv = wrow[kx];
              for (int ox = 0; ox < wo; ++ox) {
                int ix = ox * stride - pad + kx;
                if (ix >= 0 && ix < w) orow[ox] += wv * irow[ix];
              }
            }
          }
        }
    }
}

template <typename T>
void conv2d_bwd_input(const T* weight, int cout, int cin, int kh, int kw, const T* gout, int ho,
                      int wo, int stride, int pad, T* gin, int h, int w) {
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < cin; ++ic)
    for (int oc = 0; oc < cout; ++oc)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          T wv = weight[((static_cast<size_t>(oc) * cin + ic) * kh + ky) * kw + kx];
          if (wv == T(0)) continue;
          for (int oy = 0; oy < ho; ++oy) {
            int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            const T* grow = gout + (static_cast<size_t>(oc) * ho + oy) * wo;
            T* irow = gin + (static_cast<size_t>(ic) * h + iy) * w;
            for (int ox = 0; ox < wo; ++ox) {
              int ix = ox * stride - pad + kx;
              if (ix >= 0 && ix < w) irow[ix] += wv * grow[ox];
            }
          }
        }
}

template <typename T>
void conv2d_bwd_weight(const T* in, int cin, int h, int w, const T* gout, int cout, int ho,
                       int wo, int stride, int pad, int kh, int kw, T* gweight) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < cout; ++oc)
    for (int ic = 0; ic < cin; ++ic)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          double acc = 0;
          for (int oy = 0; oy < ho; ++oy) {
            int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            const T* grow = gout + (static_cast<size_t>(oc) * ho + oy) * wo;
            const T* irow = in + (static_cast<size_t>(ic) * h + iy) * w;
            for (int ox = 0; ox < wo; ++ox) {
              int ix = ox * stride - pad + kx;
              if (ix >= 0 && ix < w) acc += static_cast<double>(grow[ox]) * irow[ix];
            }
          }
          gweight[((static_cast<size_t>(oc) * cin + ic) * kh + ky) * kw + kx] +=
              static_cast<T>(acc);
        }
}

template <typename T>
void conv2d_bwd_bias(const T* gout, int cout, int ho, int wo, T* gbias) {
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < cout; ++oc) {
    double acc = 0;
    const T* p = gout + static_cast<size_t>(oc) * ho * wo;
    for (int i = 0; i < ho * wo; ++i) acc += p[i];
    gbias[oc] += static_cast<T>(acc);
  }
}

// Transpose convolution, weight layout [cin][cout][kh][kw], gather form:
// out(oc,oy,ox) sums x(ic,iy,ix) with oy = iy*stride - pad + ky.
template <typename T>
void conv_transpose2d_fwd(const T* in, int cin, int h, int w, const T* weight, int cout, int kh,
                          int kw, const T* bias, int stride, int pad, T* out, int ho, int wo) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < cout; ++oc)
    for (int oy = 0; oy < ho; ++oy) {
      T* orow = out + (static_cast<size_t>(oc) * ho + oy) * wo;
      T b = bias ? bias[oc] : T(0);
      for (int ox = 0; ox < wo; ++ox) orow[ox] = b;
      for (int ic = 0; ic < cin; ++ic)
        for (int ky = 0; ky < kh; ++ky) {
          int t = oy + pad - ky;
          if (t % stride != 0) continue;
          int iy = t / stride;
          if (iy < 0 || iy >= h) continue;
          const T* irow = in + (static_cast<size_t>(ic) * h + iy) * w;
          const T* wrow = weight + ((static_cast<size_t>(ic) * cout + oc) * kh + ky) * kw;
          for (int kx = 0; kx < kw; ++kx) {
            int s = pad - kx;
            T wv = wrow[kx];
            for (int ox = 0; ox < wo; ++ox) {
              int u = ox + s;
              if (u % stride != 0) continue;
              int ix = u / stride;
              if (ix >= 0 && ix < w) orow[ox] += wv * irow[ix];
            }
          }
        }
    }
}

template <typename T>
void conv_transpose2d_bwd_input(const T* weight, int cin, int cout, int kh, int kw,
                                const T* gout, int ho, int wo, int stride, int pad, T* gin,
                                int h, int w) {
  // d out(oc, iy*stride-pad+ky, ix*stride-pad+kx) / d in(ic,iy,ix) = w(ic,oc,ky,kx)
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < cin; ++ic)
    for (int iy = 0; iy < h; ++iy)
      for (int ix = 0; ix < w; ++ix) {
        double acc = 0;
        for (int oc = 0; oc < cout; ++oc)
          for (int ky = 0; ky < kh; ++ky) {
            int oy = iy * stride - pad + ky;
            if (oy < 0 || oy >= ho) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int ox = ix * stride - pad + kx;
              if (ox < 0 || ox >= wo) continue;
              acc += static_cast<double>(
                         weight[((static_cast<size_t>(ic) * cout + oc) * kh + ky) * kw + kx]) *
                     gout[(static_cast<size_t>(oc) * ho + oy) * wo + ox];
            }
          }
        gin[(static_cast<size_t>(ic) * h + iy) * w + ix] += static_cast<T>(acc);
      }
}

template <typename T>
void conv_transpose2d_bwd_weight(const T* in, int cin, int h, int w, const T* gout, int cout,
                                 int ho, int wo, int stride, int pad, int kh, int kw,
                                 T* gweight) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int ic = 0; ic < cin; ++ic)
    for (int oc = 0; oc < cout; ++oc)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          double acc = 0;
          for (int iy = 0; iy < h; ++iy) {
            int oy = iy * stride - pad + ky;
            if (oy < 0 || oy >= ho) continue;
            const T* irow = in + (static_cast<size_t>(ic) * h + iy) * w;
            const T* grow = gout + (static_cast<size_t>(oc) * ho + oy) * wo;
            for (int ix = 0; ix < w; ++ix) {
              int ox = ix * stride - pad + kx;
              if (ox >= 0 && ox < wo) acc += static_cast<double>(irow[ix]) * grow[ox];
            }
          }
          gweight[((static_cast<size_t>(ic) * cout + oc) * kh + ky) * kw + kx] +=
              static_cast<T>(acc);
        }
}

struct BilinearTap {
  int x0, x1, y0, y1;
  double fx, fy;
};

inline BilinearTap bilinear_setup(double x, double y, int h, int w) {
  if (x < 0) x = 0;
  if (y < 0) y = 0;
  if (x > w - 1) x = static_cast<double>(w - 1);
  if (y > h - 1) y = static_cast<double>(h - 1);
  BilinearTap t;
  t.x0 = static_cast<int>(std::floor(x));
  t.y0 = static_cast<int>(std::floor(y));
  t.x1 = std::min(t.x0 + 1, w - 1);
  t.y1 = std::min(t.y0 + 1, h - 1);
  t.fx = x - t.x0;
  t.fy = y - t.y0;
  return t;
}

// Align-corners-false resize: source coord of output pixel o is
// (o + 0.5) * in/out - 0.5, borders clamped.
template <typename T>
void resize_bilinear_fwd(const T* in, int c, int h, int w, T* out, int ho, int wo) {
  std::vector<BilinearTap> taps(static_cast<size_t>(ho) * wo);
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox)
      taps[static_cast<size_t>(oy) * wo + ox] =
          bilinear_setup((ox + 0.5) * static_cast<double>(w) / wo - 0.5,
                         (oy + 0.5) * static_cast<double>(h) / ho - 0.5, h, w);
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const T* plane = in + static_cast<size_t>(ch) * h * w;
    T* oplane = out + static_cast<size_t>(ch) * ho * wo;
    for (size_t i = 0; i < taps.size(); ++i) {
      const BilinearTap& t = taps[i];
      double v0 = plane[t.y0 * w + t.x0] * (1 - t.fx) + plane[t.y0 * w + t.x1] * t.fx;
      double v1 = plane[t.y1 * w + t.x0] * (1 - t.fx) + plane[t.y1 * w + t.x1] * t.fx;
      oplane[i] = static_cast<T>(v0 * (1 - t.fy) + v1 * t.fy);
    }
  }
}

template <typename T>
void resize_bilinear_bwd(const T* gout, int c, int ho, int wo, T* gin, int h, int w) {
  std::vector<BilinearTap> taps(static_cast<size_t>(ho) * wo);
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox)
      taps[static_cast<size_t>(oy) * wo + ox] =
          bilinear_setup((ox + 0.5) * static_cast<double>(w) / wo - 0.5,
                         (oy + 0.5) * static_cast<double>(h) / ho - 0.5, h, w);
  // Scatter per channel; channels are independent so threads never collide.
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const T* gplane = gout + static_cast<size_t>(ch) * ho * wo;
    T* iplane = gin + static_cast<size_t>(ch) * h * w;
    for (size_t i = 0; i < taps.size(); ++i) {
      const BilinearTap& t = taps[i];
      T g = gplane[i];
      iplane[t.y0 * w + t.x0] += static_cast<T>(g * (1 - t.fx) * (1 - t.fy));
      iplane[t.y0 * w + t.x1] += static_cast<T>(g * t.fx * (1 - t.fy));
      iplane[t.y1 * w + t.x0] += static_cast<T>(g * (1 - t.fx) * t.fy);
      iplane[t.y1 * w + t.x1] += static_cast<T>(g * t.fx * t.fy);
    }
  }
}

// coords layout [2][h][w] in [0,1]^2, u along texture width.
template <typename T>
std::vector<BilinearTap> grid_taps(const T* coords, int h, int w, int ht, int wt) {
  std::vector<BilinearTap> taps(static_cast<size_t>(h) * w);
  const T* us = coords;
  const T* vs = coords + static_cast<size_t>(h) * w;
  for (size_t i = 0; i < taps.size(); ++i)
    taps[i] = bilinear_setup(static_cast<double>(us[i]) * wt - 0.5,
                             static_cast<double>(vs[i]) * ht - 0.5, ht, wt);
  return taps;
}

template <typename T>
void grid_sample_fwd(const T* tex, int c, int ht, int wt, const std::vector<BilinearTap>& taps,
                     T* out) {
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const T* plane = tex + static_cast<size_t>(ch) * ht * wt;
    T* oplane = out + static_cast<size_t>(ch) * taps.size();
    for (size_t i = 0; i < taps.size(); ++i) {
      const BilinearTap& t = taps[i];
      double v0 = plane[t.y0 * wt + t.x0] * (1 - t.fx) + plane[t.y0 * wt + t.x1] * t.fx;
      double v1 = plane[t.y1 * wt + t.x0] * (1 - t.fx) + plane[t.y1 * wt + t.x1] * t.fx;
      oplane[i] = static_cast<T>(v0 * (1 - t.fy) + v1 * t.fy);
    }
  }
}

template <typename T>
void grid_sample_bwd_tex(const T* gout, int c, const std::vector<BilinearTap>& taps, T* gtex,
                         int ht, int wt) {
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const T* gplane = gout + static_cast<size_t>(ch) * taps.size();
    T* tplane = gtex + static_cast<size_t>(ch) * ht * wt;
    for (size_t i = 0; i < taps.size(); ++i) {
      const BilinearTap& t = taps[i];
      T g = gplane[i];
      tplane[t.y0 * wt + t.x0] += static_cast<T>(g * (1 - t.fx) * (1 - t.fy));
      tplane[t.y0 * wt + t.x1] += static_cast<T>(g * t.fx * (1 - t.fy));
      tplane[t.y1 * wt + t.x0] += static_cast<T>(g * (1 - t.fx) * t.fy);
      tplane[t.y1 * wt + t.x1] += static_cast<T>(g * t.fx * t.fy);
    }
  }
}

// Separable filter with clamped borders, one axis at a time.
// axis 0 = along width, axis 1 = along height.
template <typename T>
void sep_filter_fwd(const T* in, int c, int h, int w, const std::vector<T>& k, int axis, T* out) {
  const int r = static_cast<int>(k.size()) / 2;
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const T* plane = in + static_cast<size_t>(ch) * h * w;
    T* oplane = out + static_cast<size_t>(ch) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int d = -r; d <= r; ++d) {
          int sy = y, sx = x;
          if (axis == 0)
            sx = std::clamp(x + d, 0, w - 1);
          else
            sy = std::clamp(y + d, 0, h - 1);
          acc += static_cast<double>(k[d + r]) * plane[sy * w + sx];
        }
        oplane[y * w + x] = static_cast<T>(acc);
      }
  }
}

template <typename T>
void sep_filter_bwd(const T* gout, int c, int h, int w, const std::vector<T>& k, int axis,
                    T* gin) {
  const int r = static_cast<int>(k.size()) / 2;
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const T* gplane = gout + static_cast<size_t>(ch) * h * w;
    T* iplane = gin + static_cast<size_t>(ch) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        T g = gplane[y * w + x];
        for (int d = -r; d <= r; ++d) {
          int sy = y, sx = x;
          if (axis == 0)
            sx = std::clamp(x + d, 0, w - 1);
          else
            sy = std::clamp(y + d, 0, h - 1);
          iplane[sy * w + sx] += k[d + r] * g;
        }
      }
  }
}

}  // namespace ncr::kern
