#pragma once

#include <cmath>
#include <vector>

// Serial reference kernels. Straight quadruple loops, no tiling, no threading.
// These are the ground truth the OpenMP kernels are tested against and the
// baseline the kernel benchmark compares with. Keep them boring.

namespace ncr::ref {

template <typename T>
std::vector<T> conv2d(const std::vector<T>& in, int cin, int h, int w,
                      const std::vector<T>& weight, int cout, int kh, int kw,
                      const std::vector<T>& bias, int stride, int pad) {
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  std::vector<T> out(static_cast<size_t>(cout) * ho * wo, T(0));
  for (int oc = 0; oc < cout; ++oc)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        T acc = bias.empty() ? T(0) : bias[oc];
        for (int ic = 0; ic < cin; ++ic)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              int iy = oy * stride - pad + ky;
              int ix = ox * stride - pad + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += weight[((static_cast<size_t>(oc) * cin + ic) * kh + ky) * kw + kx] *
                     in[(static_cast<size_t>(ic) * h + iy) * w + ix];
            }
        out[(static_cast<size_t>(oc) * ho + oy) * wo + ox] = acc;
      }
  return out;
}

// Single bilinear tap at texel-space coordinates (align-corners false,
// borders clamped). (x, y) are in pixel units where texel i is centered at i.
template <typename T>
T bilinear_tap(const T* plane, int h, int w, double x, double y) {
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  if (x < 0) x = 0;
  if (y < 0) y = 0;
  if (x > w - 1) x = w - 1;
  if (y > h - 1) y = h - 1;
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  int x1 = clampi(x0 + 1, 0, w - 1);
  int y1 = clampi(y0 + 1, 0, h - 1);
  double fx = x - x0;
  double fy = y - y0;
  double v00 = plane[y0 * w + x0], v01 = plane[y0 * w + x1];
  double v10 = plane[y1 * w + x0], v11 = plane[y1 * w + x1];
  return static_cast<T>((v00 * (1 - fx) + v01 * fx) * (1 - fy) +
                        (v10 * (1 - fx) + v11 * fx) * fy);
}

template <typename T>
std::vector<T> resize_bilinear(const std::vector<T>& in, int c, int h, int w, int ho, int wo) {
  std::vector<T> out(static_cast<size_t>(c) * ho * wo);
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        double sy = (oy + 0.5) * static_cast<double>(h) / ho - 0.5;
        double sx = (ox + 0.5) * static_cast<double>(w) / wo - 0.5;
        out[(static_cast<size_t>(ch) * ho + oy) * wo + ox] =
            bilinear_tap(in.data() + static_cast<size_t>(ch) * h * w, h, w, sx, sy);
      }
  return out;
}

// Sample a texture at normalized [0,1]^2 coordinates, u along width.
template <typename T>
std::vector<T> grid_sample(const std::vector<T>& tex, int c, int ht, int wt,
                           const std::vector<T>& coords, int h, int w) {
  std::vector<T> out(static_cast<size_t>(c) * h * w);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double u = coords[static_cast<size_t>(y) * w + x];
        double v = coords[static_cast<size_t>(h) * w + static_cast<size_t>(y) * w + x];
        out[(static_cast<size_t>(ch) * h + y) * w + x] =
            bilinear_tap(tex.data() + static_cast<size_t>(ch) * ht * wt, ht, wt,
                         u * wt - 0.5, v * ht - 0.5);
      }
  return out;
}

template <typename T>
std::vector<T> gaussian_kernel(int size, T sigma) {
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

// Non-separable clamped-border Gaussian blur via the full outer-product
// kernel; slow on purpose.
template <typename T>
std::vector<T> gaussian_blur(const std::vector<T>& in, int c, int h, int w, int size, T sigma) {
  auto k1 = gaussian_kernel(size, sigma);
  const int r = size / 2;
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  std::vector<T> out(in.size());
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            int sy = clampi(y + dy, 0, h - 1);
            int sx = clampi(x + dx, 0, w - 1);
            acc += static_cast<double>(k1[dy + r]) * k1[dx + r] *
                   in[(static_cast<size_t>(ch) * h + sy) * w + sx];
          }
        out[(static_cast<size_t>(ch) * h + y) * w + x] = static_cast<T>(acc);
      }
  return out;
}

}  // namespace ncr::ref
