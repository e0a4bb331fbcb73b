#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ncr/adam.hpp"
#include "ncr/ops.hpp"
#include "ncr/reference.hpp"
#include "ncr/tensor.hpp"
#include "test_support.hpp"

using namespace ncr;
using testsup::DTensor;
using testsup::finite_diff_check;
using testsup::rel_err;

namespace {

// Independent SH oracle built on std::sph_legendre. The standard function
// carries the Condon-Shortley phase, which our convention drops, hence the
// (-1)^m factor.
double sh_oracle(int l, int m, double x, double y, double z) {
  double theta = std::acos(z);
  double phi = std::atan2(y, x);
  int am = std::abs(m);
  double sign = (am % 2 == 0) ? 1.0 : -1.0;
  double p = sign * std::sph_legendre(static_cast<unsigned>(l), static_cast<unsigned>(am), theta);
  if (m == 0) return p;
  return std::sqrt(2.0) * p * (m > 0 ? std::cos(am * phi) : std::sin(am * phi));
}

}  // namespace

TEST_CASE("tensor basics and invariants") {
  auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.shape() == std::vector<int>{2, 3});
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  t.set_requires_grad(true);
  CHECK(t.grad().size() == 6);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3, 4}).item(), UsageError);
}

TEST_CASE("backward requires a scalar and populates reachable grads") {
  auto x = Tensor::from({2, 2}, {1, 2, 3, 4}).set_requires_grad(true);
  CHECK_THROWS_AS(x.backward(), UsageError);
  auto loss = sum(x);
  loss.backward();
  for (float g : x.grad()) CHECK(g == doctest::Approx(1.0f));
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
  auto x = Tensor::from({3}, {0.5f, -1.0f, 2.0f}).set_requires_grad(true);
  auto loss = sum(mul(x, x));
  loss.backward();
  std::vector<float> once = x.grad();
  loss.backward();
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(2 * once[i]));
  x.zero_grad();
  loss.backward();
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(once[i]));
}

TEST_CASE("conv2d identity kernel") {
  std::mt19937 rng(7);
  auto x = Tensor::randn({1, 5, 6}, rng, 1.0f);
  auto w = Tensor::from({1, 1, 1, 1}, {1.0f});
  auto b = Tensor::zeros({1});
  auto y = conv2d(x, w, b, 1, 0);
  REQUIRE(y.shape() == x.shape());
  for (int i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv2d box filter on constant interior") {
  auto x = Tensor::full({1, 5, 5}, 7.0f);
  auto w = Tensor::full({1, 1, 3, 3}, 1.0f / 9.0f);
  auto b = Tensor::zeros({1});
  auto y = conv2d(x, w, b, 1, 1);
  CHECK(y.data()[2 * 5 + 2] == doctest::Approx(7.0f));
}

TEST_CASE("conv2d matches the quadruple-loop reference") {
  std::mt19937 rng(11);
  for (auto [cin, cout, h, w, k, stride, pad] :
       {std::array<int, 7>{3, 2, 8, 8, 3, 1, 1}, std::array<int, 7>{4, 3, 16, 16, 3, 2, 1},
        std::array<int, 7>{2, 5, 9, 7, 5, 1, 2}, std::array<int, 7>{1, 1, 16, 16, 1, 1, 0}}) {
    auto x = Tensor::randn({cin, h, w}, rng, 1.0f);
    auto wt = Tensor::randn({cout, cin, k, k}, rng, 0.5f);
    auto b = Tensor::randn({cout}, rng, 0.1f);
    auto y = conv2d(x, wt, b, stride, pad);
    auto want = ref::conv2d(x.values(), cin, h, w, wt.values(), cout, k, k, b.values(), stride, pad);
    REQUIRE(static_cast<size_t>(y.numel()) == want.size());
    for (size_t i = 0; i < want.size(); ++i)
      CHECK(std::abs(y.data()[i] - want[i]) < 1e-6f);
  }
}

TEST_CASE("conv2d rejects mismatched shapes naming the dimension") {
  auto x = Tensor::zeros({3, 8, 8});
  auto w = Tensor::zeros({2, 4, 3, 3});
  auto b = Tensor::zeros({2});
  CHECK_THROWS_WITH_AS(conv2d(x, w, b, 1, 1),
                       doctest::Contains("Cin=4"), ShapeError);
  auto weven = Tensor::zeros({2, 3, 2, 2});
  CHECK_THROWS_AS(conv2d(x, weven, b, 1, 0), ConfigError);
}

TEST_CASE("conv2d gradients match finite differences") {
  std::mt19937 rng(13);
  auto x = DTensor::randn({2, 6, 6}, rng, 1.0).set_requires_grad(true);
  auto w = DTensor::randn({3, 2, 3, 3}, rng, 0.5).set_requires_grad(true);
  auto b = DTensor::randn({3}, rng, 0.1).set_requires_grad(true);
  auto eval = [&]() { return sum(square(conv2d(x, w, b, 1, 1))).item(); };
  sum(square(conv2d(x, w, b, 1, 1))).backward();
  CHECK(finite_diff_check(x, eval, x.grad()) < 1e-3);
  CHECK(finite_diff_check(w, eval, w.grad()) < 1e-3);
  CHECK(finite_diff_check(b, eval, b.grad()) < 1e-3);
}

TEST_CASE("conv_transpose2d doubles extent and matches finite differences") {
  std::mt19937 rng(17);
  auto x = DTensor::randn({2, 4, 4}, rng, 1.0).set_requires_grad(true);
  auto w = DTensor::randn({2, 3, 3, 3}, rng, 0.5).set_requires_grad(true);
  auto b = DTensor::zeros({3}).set_requires_grad(true);
  auto y = conv_transpose2d(x, w, b, 2, 1, 1);
  REQUIRE(y.shape() == std::vector<int>{3, 8, 8});
  auto eval = [&]() { return sum(square(conv_transpose2d(x, w, b, 2, 1, 1))).item(); };
  sum(square(conv_transpose2d(x, w, b, 2, 1, 1))).backward();
  CHECK(finite_diff_check(x, eval, x.grad()) < 1e-3);
  CHECK(finite_diff_check(w, eval, w.grad()) < 1e-3);
}

TEST_CASE("upconv2x constant input with identity kernel") {
  auto x = Tensor::full({1, 3, 3}, 2.5f);
  auto w = Tensor::from({1, 1, 1, 1}, {1.0f});
  auto b = Tensor::zeros({1});
  auto y = upconv2x(x, w, b);
  REQUIRE(y.shape() == std::vector<int>{1, 6, 6});
  for (int i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(2.5f));
}

TEST_CASE("upconv2x bilinear values match the reference resampler") {
  auto x = Tensor::from({1, 2, 2}, {0, 1, 2, 3});
  auto w = Tensor::from({1, 1, 1, 1}, {1.0f});
  auto b = Tensor::zeros({1});
  auto y = upconv2x(x, w, b);
  auto want = ref::resize_bilinear(x.values(), 1, 2, 2, 4, 4);
  for (int i = 0; i < 16; ++i) CHECK(y.data()[i] == doctest::Approx(want[static_cast<size_t>(i)]));
  // corners replicate under align-corners-false
  CHECK(y.data()[0] == doctest::Approx(0.0f));
  CHECK(y.data()[15] == doctest::Approx(3.0f));
  // spec'd center sample: source coord (0.25, 0.25)
  CHECK(y.data()[1 * 4 + 1] == doctest::Approx(0.75f));
}

TEST_CASE("upconv2x gradient matches finite differences") {
  std::mt19937 rng(23);
  auto x = DTensor::randn({2, 3, 3}, rng, 1.0).set_requires_grad(true);
  auto w = DTensor::randn({3, 2, 3, 3}, rng, 0.5).set_requires_grad(true);
  auto b = DTensor::randn({3}, rng, 0.1).set_requires_grad(true);
  auto eval = [&]() { return sum(upconv2x(x, w, b)).item(); };
  sum(upconv2x(x, w, b)).backward();
  CHECK(finite_diff_check(x, eval, x.grad()) < 1e-3);
  CHECK(finite_diff_check(w, eval, w.grad()) < 1e-3);
}

TEST_CASE("grid_sample at texel centers is exact identity") {
  std::mt19937 rng(29);
  const int ht = 5, wt = 7;
  auto tex = Tensor::randn({3, ht, wt}, rng, 1.0f);
  std::vector<float> coords(2 * ht * wt);
  for (int y = 0; y < ht; ++y)
    for (int x = 0; x < wt; ++x) {
      coords[static_cast<size_t>(y) * wt + x] = (x + 0.5f) / wt;
      coords[static_cast<size_t>(ht) * wt + static_cast<size_t>(y) * wt + x] = (y + 0.5f) / ht;
    }
  auto c = Tensor::from({2, ht, wt}, coords);
  auto out = grid_sample_bilinear(tex, c);
  for (int i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == doctest::Approx(tex.data()[i]));
}

TEST_CASE("grid_sample center of 2x2 averages four texels") {
  auto tex = Tensor::from({1, 2, 2}, {0, 1, 2, 3});
  auto c = Tensor::from({2, 1, 1}, {0.5f, 0.5f});
  CHECK(grid_sample_bilinear(tex, c).item() == doctest::Approx(1.5f));
}

TEST_CASE("grid_sample clamps out-of-range coordinates to the border") {
  auto tex = Tensor::from({1, 2, 2}, {0, 1, 2, 3});
  auto inside = Tensor::from({2, 1, 1}, {0.0f, 0.5f});
  auto outside = Tensor::from({2, 1, 1}, {-0.3f, 0.5f});
  CHECK(grid_sample_bilinear(tex, outside).item() ==
        doctest::Approx(grid_sample_bilinear(tex, inside).item()));
}

TEST_CASE("grid_sample texture gradient matches finite differences") {
  std::mt19937 rng(31);
  auto tex = DTensor::randn({2, 4, 4}, rng, 1.0).set_requires_grad(true);
  auto c = DTensor::from({2, 3, 3}, testsup::randu(18, rng, 0.05, 0.95));
  auto eval = [&]() { return sum(square(grid_sample_bilinear(tex, c))).item(); };
  sum(square(grid_sample_bilinear(tex, c))).backward();
  CHECK(finite_diff_check(tex, eval, tex.grad()) < 1e-3);
}

TEST_CASE("gaussian_lpf keeps constants and normalizes weights") {
  auto x = Tensor::full({2, 6, 6}, 3.25f);
  auto y = gaussian_lpf(x, 5, 1.0f);
  double mean_in = 3.25, mean_out = 0;
  for (int i = 0; i < y.numel(); ++i) mean_out += y.data()[i];
  mean_out /= y.numel();
  CHECK(std::abs(mean_out - mean_in) < 1e-5);
  for (int i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(3.25f));
  CHECK_THROWS_AS(gaussian_lpf(x, 4, 1.0f), ConfigError);
  CHECK_THROWS_AS(gaussian_lpf(x, 5, 0.0f), ConfigError);
}

TEST_CASE("gaussian kernel weights follow the closed form") {
  auto k = gaussian_kernel1d<double>(5, 1.0);
  double z = 0;
  for (int d = -2; d <= 2; ++d) z += std::exp(-d * d / 2.0);
  for (int d = -2; d <= 2; ++d)
    CHECK(k[static_cast<size_t>(d + 2)] == doctest::Approx(std::exp(-d * d / 2.0) / z));
}

TEST_CASE("gaussian_lpf impulse response is the kernel outer product") {
  const int n = 11;
  auto x = Tensor::zeros({1, n, n});
  x.data()[5 * n + 5] = 1.0f;
  auto y = gaussian_lpf(x, 5, 1.0f);
  auto k = gaussian_kernel1d<float>(5, 1.0f);
  for (int dy = -2; dy <= 2; ++dy)
    for (int dx = -2; dx <= 2; ++dx)
      CHECK(y.data()[(5 + dy) * n + (5 + dx)] ==
            doctest::Approx(k[static_cast<size_t>(dy + 2)] * k[static_cast<size_t>(dx + 2)]));
  // and it agrees with the dense reference blur
  auto want = ref::gaussian_blur(x.values(), 1, n, n, 5, 1.0f);
  for (int i = 0; i < n * n; ++i) CHECK(std::abs(y.data()[i] - want[static_cast<size_t>(i)]) < 1e-6f);
}

TEST_CASE("gaussian_lpf gradient matches finite differences") {
  std::mt19937 rng(37);
  auto x = DTensor::randn({1, 5, 5}, rng, 1.0).set_requires_grad(true);
  auto eval = [&]() { return sum(square(gaussian_lpf(x, 3, 0.8))).item(); };
  sum(square(gaussian_lpf(x, 3, 0.8))).backward();
  CHECK(finite_diff_check(x, eval, x.grad()) < 1e-3);
}

TEST_CASE("sh_basis9 constants and axis zeros") {
  auto h = sh_basis9(0.3f, -0.2f, 0.9f);
  CHECK(h[0] == doctest::Approx(0.2820948f));
  auto hz = sh_basis9(0.0f, 0.0f, 1.0f);
  CHECK(hz[2] == doctest::Approx(0.4886025f));
  CHECK(hz[1] == doctest::Approx(0.0f));
  CHECK(hz[3] == doctest::Approx(0.0f));
  CHECK_THROWS_AS(sh_basis9(0.0f, 0.0f, 0.0f), UsageError);
}

TEST_CASE("sh_basis9 matches the Legendre-based oracle on (1,1,1)/sqrt(3)") {
  double s = 1.0 / std::sqrt(3.0);
  auto h = sh_basis9(s, s, s);
  const int ls[9] = {0, 1, 1, 1, 2, 2, 2, 2, 2};
  const int ms[9] = {0, -1, 0, 1, -2, -1, 0, 1, 2};
  for (int i = 0; i < 9; ++i)
    CHECK(rel_err(h[static_cast<size_t>(i)], sh_oracle(ls[i], ms[i], s, s, s)) < 1e-6);
}

TEST_CASE("sh_basis9 matches the oracle on random directions") {
  std::mt19937 rng(41);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int ls[9] = {0, 1, 1, 1, 2, 2, 2, 2, 2};
  const int ms[9] = {0, -1, 0, 1, -2, -1, 0, 1, 2};
  for (int trial = 0; trial < 50; ++trial) {
    double x = nd(rng), y = nd(rng), z = nd(rng);
    double n = std::sqrt(x * x + y * y + z * z);
    if (n < 1e-3) continue;
    x /= n; y /= n; z /= n;
    auto h = sh_basis9(x, y, z);
    for (int i = 0; i < 9; ++i)
      CHECK(rel_err(h[static_cast<size_t>(i)], sh_oracle(ls[i], ms[i], x, y, z)) < 1e-6);
  }
}

TEST_CASE("sh_basis9 z-flip parity") {
  auto a = sh_basis9(0.4, 0.5, 0.7);
  auto b = sh_basis9(0.4, 0.5, -0.7);
  // negated: Y10, Y2-1, Y21
  CHECK(b[2] == doctest::Approx(-a[2]));
  CHECK(b[5] == doctest::Approx(-a[5]));
  CHECK(b[7] == doctest::Approx(-a[7]));
  // preserved: Y00, Y1-1, Y11, Y2-2, Y20, Y22
  for (int i : {0, 1, 3, 4, 6, 8}) CHECK(b[static_cast<size_t>(i)] == doctest::Approx(a[static_cast<size_t>(i)]));
}

TEST_CASE("structural op gradients: concat, slice, scale, broadcast, affine, crop") {
  std::mt19937 rng(43);
  auto a = DTensor::randn({2, 3, 3}, rng, 1.0).set_requires_grad(true);
  auto b = DTensor::randn({3, 3, 3}, rng, 1.0).set_requires_grad(true);
  {
    auto eval = [&]() { return sum(square(concat_channels<double>({a, b}))).item(); };
    sum(square(concat_channels<double>({a, b}))).backward();
    CHECK(finite_diff_check(a, eval, a.grad()) < 1e-3);
    CHECK(finite_diff_check(b, eval, b.grad()) < 1e-3);
  }
  {
    auto x = DTensor::randn({14, 2, 2}, rng, 1.0).set_requires_grad(true);
    std::vector<double> coef = {2, -1, 0.5, 3, 1, -2, 0.25, 4, -0.5};
    auto eval = [&]() {
      return sum(square(add(slice_channels(scale_channels(x, coef, 3), 1, 12),
                            slice_channels(x, 2, 12))))
          .item();
    };
    eval();
    x.zero_grad();
    sum(square(add(slice_channels(scale_channels(x, coef, 3), 1, 12), slice_channels(x, 2, 12))))
        .backward();
    CHECK(finite_diff_check(x, eval, x.grad()) < 1e-3);
  }
  {
    auto v = DTensor::randn({4}, rng, 1.0).set_requires_grad(true);
    auto eval = [&]() { return sum(square(broadcast_vector(v, 3, 5))).item(); };
    sum(square(broadcast_vector(v, 3, 5))).backward();
    CHECK(finite_diff_check(v, eval, v.grad()) < 1e-3);
  }
  {
    auto w = DTensor::randn({3, 5}, rng, 1.0).set_requires_grad(true);
    auto x = DTensor::randn({5}, rng, 1.0).set_requires_grad(true);
    auto bb = DTensor::randn({3}, rng, 1.0).set_requires_grad(true);
    auto eval = [&]() { return sum(square(leaky_relu(affine(w, x, bb)))).item(); };
    sum(square(leaky_relu(affine(w, x, bb)))).backward();
    CHECK(finite_diff_check(w, eval, w.grad()) < 1e-3);
    CHECK(finite_diff_check(x, eval, x.grad()) < 1e-3);
    CHECK(finite_diff_check(bb, eval, bb.grad()) < 1e-3);
  }
  {
    auto x = DTensor::randn({2, 5, 5}, rng, 1.0).set_requires_grad(true);
    auto eval = [&]() { return sum(square(crop_spatial(x, 1, 2, 3, 2))).item(); };
    sum(square(crop_spatial(x, 1, 2, 3, 2))).backward();
    CHECK(finite_diff_check(x, eval, x.grad()) < 1e-3);
  }
}

TEST_CASE("tanh01 stays in (0,1) and differentiates") {
  std::mt19937 rng(47);
  auto x = DTensor::randn({2, 4, 4}, rng, 2.0).set_requires_grad(true);
  auto y = tanh01(x);
  for (int i = 0; i < y.numel(); ++i) {
    CHECK(y.data()[i] > 0.0);
    CHECK(y.data()[i] < 1.0);
  }
  auto eval = [&]() { return sum(square(tanh01(x))).item(); };
  sum(square(tanh01(x))).backward();
  CHECK(finite_diff_check(x, eval, x.grad()) < 1e-3);
}

TEST_CASE("l1 and masked_l1 values and gradients") {
  auto zero = Tensor::zeros({3, 2, 2});
  auto one = Tensor::full({3, 2, 2}, 1.0f);
  CHECK(l1(zero, one).item() == doctest::Approx(1.0f));

  std::mt19937 rng(53);
  auto a = DTensor::randn({2, 3, 3}, rng, 1.0).set_requires_grad(true);
  auto b = DTensor::randn({2, 3, 3}, rng, 1.0);
  auto m = DTensor::zeros({1, 3, 3});
  for (int i : {0, 2, 4, 8}) m.data()[i] = 1.0;
  auto eval = [&]() { return masked_l1(a, b, m).item(); };
  masked_l1(a, b, m).backward();
  CHECK(finite_diff_check(a, eval, a.grad()) < 1e-3);

  // background pixels are fully ignored
  double before = masked_l1(a, b, m).item();
  b.data()[1] += 100.0;
  b.data()[5] -= 3.0;
  CHECK(masked_l1(a, b, m).item() == doctest::Approx(before));
}

TEST_CASE("no-grad mode records nothing") {
  auto x = Tensor::full({2, 2}, 1.0f).set_requires_grad(true);
  NoGradGuard guard;
  auto y = sum(mul(x, x));
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->parents.empty());
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  auto p = Tensor::from({3}, {1, 2, 3}).set_requires_grad(true);
  std::vector<Tensor> params = {p};
  AdamState<float> st;
  st.lr = 0.1f;
  st.init(params);
  p.zero_grad();
  adam_step(params, st);
  CHECK(p.data()[0] == doctest::Approx(1.0f));
  CHECK(p.data()[1] == doctest::Approx(2.0f));
  CHECK(p.data()[2] == doctest::Approx(3.0f));
  CHECK(st.step == 1);
}

TEST_CASE("adam: bias-corrected first step magnitude equals lr") {
  auto p = Tensor::from({1}, {0.0f}).set_requires_grad(true);
  std::vector<Tensor> params = {p};
  AdamState<float> st;
  st.lr = 0.1f;
  st.init(params);
  p.grad()[0] = 1.0f;
  adam_step(params, st);
  CHECK(p.data()[0] == doctest::Approx(-0.1f).epsilon(1e-4));
}

TEST_CASE("adam: converges on the shifted quadratic") {
  auto p = Tensor::from({1}, {0.0f}).set_requires_grad(true);
  std::vector<Tensor> params = {p};
  AdamState<float> st;
  st.lr = 0.1f;
  st.init(params);
  for (int i = 0; i < 100; ++i) {
    p.zero_grad();
    auto loss = square(sub(p, Tensor::from({1}, {3.0f})));
    loss.backward();
    adam_step(params, st);
  }
  CHECK(std::abs(p.data()[0] - 3.0f) < 0.5f);
  CHECK(st.step == 100);
}

TEST_CASE("adam: missing gradient is a usage error") {
  auto p = Tensor::from({2}, {1, 2}).set_requires_grad(true);
  auto q = Tensor::from({2}, {1, 2});  // no grad slot
  std::vector<Tensor> params = {p, q};
  AdamState<float> st;
  st.init(params);
  p.zero_grad();
  CHECK_THROWS_AS(adam_step(params, st), UsageError);
}
