#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "ncr/checkpoint.hpp"
#include "ncr/dataset.hpp"
#include "ncr/ops.hpp"
#include "ncr/renderer.hpp"
#include "ncr/training.hpp"
#include "ncr/warp.hpp"
#include "test_support.hpp"

using namespace ncr;
using testsup::DTensor;
using testsup::finite_diff_check;

namespace {

Dataset tiny_dataset(int frames = 6, int res = 32, uint32_t seed = 21) {
  GenDataConfig cfg;
  cfg.n_frames = frames;
  cfg.res = res;
  cfg.seed = seed;
  return generate_dataset(cfg);
}

ModelConfig tiny_model_config(int res = 32) {
  ModelConfig mc;
  mc.res = res;
  mc.tex_channels = 16;
  mc.tex_size = 64;
  mc.gen.base = 16;
  mc.gen.tex_channels = 16;
  mc.seed = 5;
  return mc;
}

}  // namespace

TEST_CASE("multiscale sampling: constant pyramid and single-level linearity") {
  std::mt19937 rng(3);
  NeuralTexture tex(16, 32, rng);
  for (int l = 0; l < 4; ++l)
    std::fill(tex.levels[static_cast<size_t>(l)].data(),
              tex.levels[static_cast<size_t>(l)].data() + tex.levels[static_cast<size_t>(l)].numel(),
              0.25f * (l + 1));
  auto uv = Tensor::full({2, 8, 8}, 0.4f);
  auto f = sample_multiscale_texture(tex, uv);
  float want = 0.25f * (1 + 2 + 3 + 4);
  for (int i = 0; i < f.numel(); ++i) CHECK(f.data()[i] == doctest::Approx(want));

  for (int l : {0, 2, 3})
    std::fill(tex.levels[static_cast<size_t>(l)].data(),
              tex.levels[static_cast<size_t>(l)].data() + tex.levels[static_cast<size_t>(l)].numel(), 0.0f);
  auto single = sample_multiscale_texture(tex, uv);
  auto direct = grid_sample_bilinear(tex.levels[1], uv);
  for (int i = 0; i < single.numel(); ++i) CHECK(single.data()[i] == doctest::Approx(direct.data()[i]));
}

TEST_CASE("multiscale sampling backward reaches every level with unit mass") {
  std::mt19937 rng(5);
  NeuralTexture tex(16, 32, rng);
  auto uv = Tensor::from({2, 4, 4}, std::vector<float>(32, 0.5f));
  auto f = sample_multiscale_texture(tex, uv);
  sum(f).backward();
  for (auto& level : tex.levels) {
    REQUIRE(level.has_grad());
    double mass = 0;
    for (float g : level.grad()) mass += g;
    // each of the 16 samples splats weights summing to 1, per channel
    CHECK(mass == doctest::Approx(16.0 * 16.0).epsilon(1e-3));
  }
}

TEST_CASE("sh_view_modulate: pass-through, constant coefficient, axis zeros") {
  std::mt19937 rng(7);
  auto f = Tensor::randn({16, 4, 4}, rng, 1.0f);
  auto out = sh_view_modulate(f, normalized({0.3, -0.4, 0.85}));
  const size_t plane = 16;
  for (int ch : {0, 1, 2, 12, 15})
    for (size_t i = 0; i < plane; ++i)
      CHECK(out.data()[static_cast<size_t>(ch) * plane + i] == f.data()[static_cast<size_t>(ch) * plane + i]);
  for (size_t i = 0; i < plane; ++i)
    CHECK(out.data()[3 * plane + i] == doctest::Approx(0.2820948f * f.data()[3 * plane + i]));

  auto axis = sh_view_modulate(f, {0, 0, 1});
  for (size_t i = 0; i < plane; ++i) {
    CHECK(axis.data()[4 * plane + i] == doctest::Approx(0.0f));  // Y1-1 channel
    CHECK(axis.data()[6 * plane + i] == doctest::Approx(0.0f));  // Y11 channel
  }
  auto thin = Tensor::zeros({8, 2, 2});
  CHECK_THROWS_AS(sh_view_modulate(thin, {0, 0, 1}), ConfigError);
}

TEST_CASE("generator shape contract and cache pyramid") {
  auto ds = tiny_dataset(3, 64);
  ModelConfig mc = tiny_model_config(64);
  mc.gen.base = 32;
  Models m = build_models(mc);
  auto out = m.gen.forward(m.tex, ds.frames[0].params);
  CHECK(out.image.shape() == std::vector<int>{3, 64, 64});
  CHECK(out.cache.c3.shape() == std::vector<int>{128, 16, 16});
  CHECK(out.cache.c4.shape() == std::vector<int>{64, 32, 32});
  CHECK(out.cache.c5.shape() == std::vector<int>{32, 64, 64});
  CHECK(out.cache.frame == 0);
  for (int i = 0; i < out.image.numel(); ++i) {
    CHECK(out.image.data()[i] > 0.0f);
    CHECK(out.image.data()[i] < 1.0f);
  }
}

TEST_CASE("generator rejects extents not divisible by 2^(depth/2)") {
  auto ds = tiny_dataset(2, 48);
  Models m = build_models(tiny_model_config(48));
  CHECK_THROWS_AS(m.gen.forward(m.tex, ds.frames[0].params), ConfigError);
}

TEST_CASE("generator forward is bit-deterministic") {
  auto ds = tiny_dataset(2, 32);
  Models m = build_models(tiny_model_config());
  NoGradGuard ng;
  auto a = m.gen.forward(m.tex, ds.frames[1].params);
  auto b = m.gen.forward(m.tex, ds.frames[1].params);
  for (int i = 0; i < a.image.numel(); ++i) CHECK(a.image.data()[i] == b.image.data()[i]);
  for (int i = 0; i < a.cache.c3.numel(); ++i) CHECK(a.cache.c3.data()[i] == b.cache.c3.data()[i]);
  for (int i = 0; i < a.cache.c5.numel(); ++i) CHECK(a.cache.c5.data()[i] == b.cache.c5.data()[i]);
}

TEST_CASE("end-to-end differentiability: loss reaches texture and all generator params") {
  auto ds = tiny_dataset(2, 32);
  Models m = build_models(tiny_model_config());
  auto out = m.gen.forward(m.tex, ds.frames[0].params);
  l1(out.image, ds.frames[0].image).backward();
  for (auto& level : m.tex.levels) {
    REQUIRE(level.has_grad());
    double s = 0;
    for (float g : level.grad()) s += std::abs(g);
    CHECK(s > 0.0);
  }
  std::vector<NamedParam<float>> params;
  m.gen.collect_params(params);
  for (auto& p : params) {
    REQUIRE(p.tensor.has_grad());
    double s = 0;
    for (float g : p.tensor.grad()) s += std::abs(g);
    CHECK_MESSAGE(s > 0.0, p.name);
  }
}

TEST_CASE("view dependence: changing the camera changes the image") {
  auto ds = tiny_dataset(2, 32);
  Models m = build_models(tiny_model_config());
  NoGradGuard ng;
  auto base = m.gen.forward(m.tex, ds.frames[0].params);
  FrameParams moved = ds.frames[0].params;
  moved.cam = moved.cam + Vec3{0.5, 0.2, -0.1};
  auto shifted = m.gen.forward(m.tex, moved);
  double maxdiff = 0;
  for (int i = 0; i < base.image.numel(); ++i)
    maxdiff = std::max(maxdiff,
                       std::abs(static_cast<double>(base.image.data()[i]) - shifted.image.data()[i]));
  CHECK(maxdiff > 0.0);
}

TEST_CASE("generator variants: transpose-conv decoder and two-frame input") {
  auto ds = tiny_dataset(2, 32);
  ModelConfig mc = tiny_model_config();
  mc.gen.use_upconv = false;
  Models m1 = build_models(mc);
  auto out1 = m1.gen.forward(m1.tex, ds.frames[0].params);
  CHECK(out1.image.shape() == std::vector<int>{3, 32, 32});

  ModelConfig mc2 = tiny_model_config();
  mc2.gen.two_frame_input = true;
  Models m2 = build_models(mc2);
  auto prev = sh_view_modulate(sample_multiscale_texture(m2.tex, ds.frames[0].params.uv_map),
                               view_direction(ds.frames[0].params));
  auto out2 = m2.gen.forward(m2.tex, ds.frames[1].params, &prev);
  CHECK(out2.image.shape() == std::vector<int>{3, 32, 32});
}

TEST_CASE("pose_embed: zero weights, identity slice, finite differences") {
  std::mt19937 rng(11);
  WarpWiring wiring;
  WarpNetT<double> net(wiring, 12, 12, 12, 4, 16, rng, 8, 6, 6);
  const int vin = net.cond_dim();
  REQUIRE(vin == 18 + 8 + 9);
  std::vector<double> cond(static_cast<size_t>(vin));
  for (int i = 0; i < vin; ++i) cond[static_cast<size_t>(i)] = 0.1 * i - 1.0;

  std::fill(net.mlp_w.data(), net.mlp_w.data() + net.mlp_w.numel(), 0.0);
  std::fill(net.mlp_b.data(), net.mlp_b.data() + net.mlp_b.numel(), 0.0);
  auto zero_out = pose_embed(net, cond);
  for (int i = 0; i < zero_out.numel(); ++i) CHECK(zero_out.data()[i] == doctest::Approx(0.0));

  for (int o = 0; o < net.embed_dim; ++o) net.mlp_w.data()[o * vin + o] = 1.0;
  auto ident = pose_embed(net, cond);
  for (int o = 0; o < net.embed_dim; ++o) {
    double v = cond[static_cast<size_t>(o)];
    double want = v > 0 ? v : 0.2 * v;
    CHECK(ident.data()[o] == doctest::Approx(want));
  }

  std::mt19937 rng2(13);
  net.mlp_w = DTensor::randn({net.embed_dim, vin}, rng2, 0.4).set_requires_grad(true);
  auto eval = [&]() { return sum(pose_embed(net, cond)).item(); };
  sum(pose_embed(net, cond)).backward();
  CHECK(finite_diff_check(net.mlp_w, eval, net.mlp_w.grad()) < 1e-3);
}

TEST_CASE("warp head gradients match finite differences (double precision)") {
  std::mt19937 rng(19);
  WarpWiring wiring;
  WarpNetT<double> net(wiring, 6, 12, 12, 2, 8, rng, 6, 5, 4);
  WarpInputT<double> in;
  in.c3 = DTensor::randn({6, 2, 2}, rng, 1.0).set_requires_grad(true);
  in.c4 = DTensor::randn({12, 4, 4}, rng, 1.0);
  in.c5 = DTensor::randn({12, 8, 8}, rng, 1.0);
  in.delta_uv = DTensor::randn({2, 8, 8}, rng, 0.1);
  in.cond.resize(static_cast<size_t>(net.cond_dim()));
  for (size_t i = 0; i < in.cond.size(); ++i) in.cond[i] = 0.05 * static_cast<double>(i) - 0.4;
  for (int i = 0; i < 9; ++i) in.delta_h[static_cast<size_t>(i)] = 0.1 * i - 0.4;

  // a tight step keeps central differences away from the leaky-relu kink
  const double step = 1e-5;
  auto eval = [&]() { return sum(square(warp_forward(in, net))).item(); };
  sum(square(warp_forward(in, net))).backward();
  CHECK(finite_diff_check(net.w1_w, eval, net.w1_w.grad(), step) < 1e-3);
  CHECK(finite_diff_check(net.w2_w, eval, net.w2_w.grad(), step) < 1e-3);
  CHECK(finite_diff_check(net.out_w, eval, net.out_w.grad(), step) < 1e-3);
  CHECK(finite_diff_check(net.mlp_w, eval, net.mlp_w.grad(), step) < 1e-3);
  CHECK(finite_diff_check(in.c3, eval, in.c3.grad(), step) < 1e-3);  // gradient into the cache
}

TEST_CASE("warp_forward shape contract, determinism, and delta consistency") {
  auto ds = tiny_dataset(4, 64);
  ModelConfig mc = tiny_model_config(64);
  mc.gen.base = 32;
  Models m = build_models(mc);
  NoGradGuard ng;
  auto gen_out = m.gen.forward(m.tex, ds.frames[0].params);

  auto in_same = make_warp_input(gen_out.cache, ds.frames[0].params, m.warp.wiring);
  CHECK(in_same.distance == 0);
  for (double v : in_same.delta_h) CHECK(v == 0.0);
  for (int i = 0; i < in_same.delta_uv.numel(); ++i) CHECK(in_same.delta_uv.data()[i] == 0.0f);
  // deltas inside the conditioning vector vanish as well
  // layout: p(3) dp(3) theta(6) dtheta(6) e(k) de(k) h(9)
  for (int i = 3; i < 6; ++i) CHECK(in_same.cond[static_cast<size_t>(i)] == 0.0f);
  for (int i = 12; i < 18; ++i) CHECK(in_same.cond[static_cast<size_t>(i)] == 0.0f);

  auto in_next = make_warp_input(gen_out.cache, ds.frames[2].params, m.warp.wiring);
  CHECK(in_next.distance == 2);
  auto img1 = warp_forward(in_next, m.warp);
  auto img2 = warp_forward(in_next, m.warp);
  CHECK(img1.shape() == std::vector<int>{3, 64, 64});
  for (int i = 0; i < img1.numel(); ++i) CHECK(img1.data()[i] == img2.data()[i]);

  std::mt19937 wrng(1);
  WarpNet wrong(m.warp.wiring, 99, 64, 32, 4, 16, wrng, 32, 24, 12);
  CHECK_THROWS_AS(warp_forward(in_next, wrong), ConfigError);
}

TEST_CASE("explicit warp baseline: shape and strictly larger FLOP count") {
  auto ds = tiny_dataset(3, 64);
  ModelConfig mc = tiny_model_config(64);
  mc.gen.base = 32;
  Models implicit = build_models(mc);
  ModelConfig mc_ex = mc;
  mc_ex.wiring.exwarp = true;
  mc_ex.wiring.exp = false;
  Models ex = build_models(mc_ex);
  NoGradGuard ng;
  auto cache = ex.gen.forward(ex.tex, ds.frames[0].params).cache;
  auto in = make_warp_input(cache, ds.frames[1].params, ex.warp.wiring);
  auto img = explicit_warp_baseline(in, ex.tex, ds.frames[1].params, ex.warp);
  CHECK(img.shape() == std::vector<int>{3, 64, 64});
  CHECK(total_macs(ex.warp.flop_plan(64, 64)) > total_macs(implicit.warp.flop_plan(64, 64)));
}

TEST_CASE("FLOP accounting: closed forms and generator-to-warp ratio") {
  CHECK(conv_macs(1, 1, 1, 1, 4, 4) == 16);
  CHECK(conv_macs(4, 2, 3, 3, 8, 8) == 4608);
  ModelConfig mc;  // defaults: base 32, D 16, warp 24/12
  Models m = build_models(mc);
  for (int res : {64, 128}) {
    long long gen = total_macs(m.gen.flop_plan(res, res));
    long long warp = total_macs(m.warp.flop_plan(res, res));
    CHECK(static_cast<double>(gen) / static_cast<double>(warp) >= 3.0);
  }
}

TEST_CASE("checkpoint: bit-exact round trip and distinct failure modes") {
  namespace fs = std::filesystem;
  ModelConfig mc = tiny_model_config();
  Models a = build_models(mc);
  auto path = (fs::temp_directory_path() / "ncr_test.nckp").string();
  save_models(path, a);

  ModelConfig mc2 = mc;
  mc2.seed = 99;  // different init, same shapes
  Models b = build_models(mc2);
  load_models(path, b);
  auto pa = a.named_params();
  auto pb = b.named_params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i)
    for (int j = 0; j < pa[i].tensor.numel(); ++j)
      CHECK(pa[i].tensor.data()[j] == pb[i].tensor.data()[j]);

  // truncation
  auto bytes = [&]() {
    std::ifstream is(path, std::ios::binary);
    return std::vector<char>{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  }();
  auto tpath = (fs::temp_directory_path() / "ncr_trunc.nckp").string();
  std::ofstream(tpath, std::ios::binary)
      .write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 1));
  Models c = build_models(mc);
  CHECK_THROWS_AS(load_models(tpath, c), CheckpointError);
  try {
    load_models(tpath, c);
  } catch (const CheckpointError& e) {
    CHECK(e.kind == CheckpointError::Kind::kTruncated);
  }

  // renamed parameter
  std::vector<NamedParam<float>> renamed;
  c.tex.collect_params(renamed);
  renamed[0].name = "tex/level_renamed";
  CHECK_THROWS_WITH_AS(load_checkpoint(path, renamed), doctest::Contains("tex/level_renamed"),
                       CheckpointError);

  // bad magic
  auto bpath = (fs::temp_directory_path() / "ncr_bad.nckp").string();
  std::ofstream(bpath, std::ios::binary).write("XXXX0000", 8);
  CHECK_THROWS_AS(load_models(bpath, c), CheckpointError);
  try {
    load_models(bpath, c);
  } catch (const CheckpointError& e) {
    CHECK(e.kind == CheckpointError::Kind::kBadMagic);
  }
  fs::remove(path);
  fs::remove(tpath);
  fs::remove(bpath);
}
