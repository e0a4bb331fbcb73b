#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ncr/dataset.hpp"
#include "ncr/ops.hpp"
#include "ncr/scene.hpp"

using namespace ncr;

namespace {

HeadProxy full_screen_quad() {
  HeadProxy p;
  p.base_vertices = {{-1, 1, 0}, {1, 1, 0}, {-1, -1, 0}, {1, -1, 0}};
  p.uv_coords = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  p.triangles = {{0, 2, 1}, {1, 2, 3}};
  return p;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("proxy invariants: indices, uv range, bounded blendshapes") {
  auto p = make_head_proxy(4, 20, 1);
  const int k = p.vertex_count();
  for (const auto& tri : p.triangles)
    for (int i : tri) {
      CHECK(i >= 0);
      CHECK(i < k);
    }
  for (const auto& uv : p.uv_coords) {
    CHECK(uv[0] >= 0.0);
    CHECK(uv[0] <= 1.0);
    CHECK(uv[1] >= 0.0);
    CHECK(uv[1] <= 1.0);
  }
  for (const auto& shape : p.blendshapes)
    for (const auto& off : shape) CHECK(norm(off) <= 0.2 + 1e-12);
  CHECK(p.landmark_left != p.landmark_right);
  // antipodal equator landmarks sit near +-x
  CHECK(p.base_vertices[static_cast<size_t>(p.landmark_left)].x > 0.5);
  CHECK(p.base_vertices[static_cast<size_t>(p.landmark_right)].x < -0.5);
}

TEST_CASE("deform_and_pose: identity, translation, one-hot blend") {
  auto p = make_head_proxy(4, 12, 2);
  std::array<double, 6> zero{};
  std::vector<double> e0(4, 0.0);
  auto base = deform_and_pose(p, zero, e0);
  for (int i = 0; i < p.vertex_count(); ++i)
    CHECK(norm(base[static_cast<size_t>(i)] - p.base_vertices[static_cast<size_t>(i)]) ==
          doctest::Approx(0.0));

  std::array<double, 6> shift{0, 0, 0, 1, 0, 0};
  auto moved = deform_and_pose(p, shift, e0);
  for (int i = 0; i < p.vertex_count(); ++i) {
    CHECK(moved[static_cast<size_t>(i)].x - base[static_cast<size_t>(i)].x == doctest::Approx(1.0));
    CHECK(moved[static_cast<size_t>(i)].y == doctest::Approx(base[static_cast<size_t>(i)].y));
  }

  std::vector<double> e1 = {1, 0, 0, 0};
  auto blended = deform_and_pose(p, zero, e1);
  for (int i = 0; i < p.vertex_count(); ++i) {
    Vec3 want = p.base_vertices[static_cast<size_t>(i)] + p.blendshapes[0][static_cast<size_t>(i)];
    CHECK(norm(blended[static_cast<size_t>(i)] - want) == doctest::Approx(0.0));
  }
}

TEST_CASE("deform_and_pose: linear in expression before rotation") {
  auto p = make_head_proxy(4, 12, 3);
  std::array<double, 6> zero{};
  std::vector<double> a = {0.5, -0.3, 0, 0.2}, b = {-0.1, 0.4, 0.6, 0};
  std::vector<double> ab(4);
  for (int i = 0; i < 4; ++i) ab[static_cast<size_t>(i)] = a[static_cast<size_t>(i)] + b[static_cast<size_t>(i)];
  auto base = deform_and_pose(p, zero, std::vector<double>(4, 0.0));
  auto da = deform_and_pose(p, zero, a);
  auto db = deform_and_pose(p, zero, b);
  auto dab = deform_and_pose(p, zero, ab);
  for (int i = 0; i < p.vertex_count(); ++i) {
    Vec3 lhs = dab[static_cast<size_t>(i)] - base[static_cast<size_t>(i)];
    Vec3 rhs = (da[static_cast<size_t>(i)] - base[static_cast<size_t>(i)]) +
               (db[static_cast<size_t>(i)] - base[static_cast<size_t>(i)]);
    CHECK(norm(lhs - rhs) < 1e-12);
  }
}

TEST_CASE("deform_and_pose clamps expressions to +-3") {
  auto p = make_head_proxy(1, 12, 4);
  std::array<double, 6> zero{};
  auto at3 = deform_and_pose(p, zero, {3.0});
  auto at9 = deform_and_pose(p, zero, {9.0});
  for (int i = 0; i < p.vertex_count(); ++i)
    CHECK(norm(at3[static_cast<size_t>(i)] - at9[static_cast<size_t>(i)]) == doctest::Approx(0.0));
}

TEST_CASE("rasterized quad reproduces pixel-center UVs") {
  auto quad = full_screen_quad();
  const int n = 32;
  CameraFrame cam{{0, 0, 2}, {0, 0, 0}, static_cast<double>(n)};
  auto verts = quad.base_vertices;
  auto r = rasterize_uv(verts, quad, cam, n, n);
  double worst = 0;
  int covered = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (r.mask.data()[y * n + x] < 0.5) continue;
      ++covered;
      double u = r.uv_map.data()[y * n + x];
      double v = r.uv_map.data()[n * n + y * n + x];
      worst = std::max(worst, std::abs(u - (x + 0.5) / n));
      worst = std::max(worst, std::abs(v - (y + 0.5) / n));
    }
  CHECK(covered == n * n);
  CHECK(worst < 1.0 / (2 * n));
}

TEST_CASE("camera behind the mesh rasterizes nothing") {
  auto p = make_head_proxy(4, 16, 5);
  auto verts = deform_and_pose(p, {}, std::vector<double>(4, 0.0));
  CameraFrame cam{{0, 0, 2.5}, {0, 0, 5.0}, 64};  // looking away from the head
  auto r = rasterize_uv(verts, p, cam, 32, 32);
  for (int i = 0; i < r.mask.numel(); ++i) CHECK(r.mask.data()[i] == 0.0f);
}

TEST_CASE("nearer triangle wins every contested pixel") {
  HeadProxy p;
  p.base_vertices = {{-1, 1, 0}, {1, 1, 0}, {-1, -1, 0}, {1, -1, 0},
                     {-1, 1, 0.5}, {1, 1, 0.5}, {-1, -1, 0.5}, {1, -1, 0.5}};
  // far quad uses uv 0, near quad uv 1 (constant per quad)
  p.uv_coords = {{0, 0}, {0, 0}, {0, 0}, {0, 0}, {1, 1}, {1, 1}, {1, 1}, {1, 1}};
  p.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 6, 5}, {5, 6, 7}};
  CameraFrame cam{{0, 0, 3}, {0, 0, 0}, 24};
  auto r = rasterize_uv(p.base_vertices, p, cam, 32, 32);
  for (int i = 0; i < 32 * 32; ++i)
    if (r.mask.data()[i] > 0.5) CHECK(r.uv_map.data()[i] == doctest::Approx(1.0f));
}

TEST_CASE("shader term isolation: zero specular weight leaves the Lambert term") {
  ShadingConfig cfg;
  cfg.spec_weight = 0.0;
  cfg.white_albedo = true;
  Vec3 n = normalized({0.2, 0.5, 0.8});
  cfg.light_dir = n;  // light along the normal
  auto rgb = shade_pixel(n, normalized({0, 0, 1}), 0.3, 0.7, cfg);
  double lambert = cfg.ambient + (1 - cfg.ambient) * 1.0;
  for (double c : rgb) CHECK(c == doctest::Approx(lambert));
}

TEST_CASE("reference render is deterministic and masks match coverage") {
  auto p = make_head_proxy(4, 20, 6);
  auto verts = deform_and_pose(p, {0.1, 0.3, 0, 0, 0, 0}, {0.5, -0.5, 0.2, 0});
  CameraFrame cam{{0.2, 0.1, 2.8}, {0, 0, 0}, 64};
  ShadingConfig cfg;
  auto img1 = reference_render(verts, p, cam, 48, 48, cfg);
  auto img2 = reference_render(verts, p, cam, 48, 48, cfg);
  for (int i = 0; i < img1.numel(); ++i) CHECK(img1.data()[i] == img2.data()[i]);

  // pixels that react to a background change are exactly the uncovered ones
  ShadingConfig cfg2 = cfg;
  cfg2.background = {0.9, 0.0, 0.9};
  auto img3 = reference_render(verts, p, cam, 48, 48, cfg2);
  auto cover = rasterize_uv(verts, p, cam, 48, 48);
  for (int i = 0; i < 48 * 48; ++i) {
    bool changed = false;
    for (int c = 0; c < 3; ++c)
      changed = changed || img1.data()[c * 48 * 48 + i] != img3.data()[c * 48 * 48 + i];
    CHECK(changed == (cover.mask.data()[i] < 0.5));
  }
}

TEST_CASE("camera motion only touches pixels inside the union of head masks") {
  auto p = make_head_proxy(4, 20, 7);
  auto verts = deform_and_pose(p, {}, std::vector<double>(4, 0.0));
  ShadingConfig cfg;
  CameraFrame cam1{{0.0, 0.05, 2.8}, {0, 0, 0}, 64};
  CameraFrame cam2{{0.35, 0.1, 2.7}, {0, 0, 0}, 64};
  auto img1 = reference_render(verts, p, cam1, 48, 48, cfg);
  auto img2 = reference_render(verts, p, cam2, 48, 48, cfg);
  auto m1 = rasterize_uv(verts, p, cam1, 48, 48).mask;
  auto m2 = rasterize_uv(verts, p, cam2, 48, 48).mask;
  int changed_pixels = 0;
  for (int i = 0; i < 48 * 48; ++i) {
    bool changed = false;
    for (int c = 0; c < 3; ++c)
      changed = changed || img1.data()[c * 48 * 48 + i] != img2.data()[c * 48 * 48 + i];
    if (changed) {
      ++changed_pixels;
      CHECK((m1.data()[i] > 0.5 || m2.data()[i] > 0.5));
    }
  }
  CHECK(changed_pixels > 0);  // the view change must be visible at all
}

TEST_CASE("stabilizer: constant track, impulse response, damping, oracle") {
  Stabilizer st;
  for (int t = 0; t < 10; ++t) {
    auto s = st.push({2, 3, 4}, 1.5);
    CHECK(s.center.x == doctest::Approx(2.0));
    CHECK(s.span == doctest::Approx(1.5));
  }

  Stabilizer imp;
  const auto& w = imp.weights();
  std::vector<double> outs;
  imp.push({0, 0, 0}, 0);  // history filled with zeros
  for (int t = 0; t < 10; ++t) {
    double v = (t == 2) ? 1.0 : 0.0;
    outs.push_back(imp.push({v, 0, 0}, 0).center.x);
  }
  for (int i = 0; i < 5; ++i) CHECK(outs[static_cast<size_t>(2 + i)] == doctest::Approx(w[static_cast<size_t>(4 - i)]));
  CHECK(outs[static_cast<size_t>(7)] == doctest::Approx(0.0));

  Stabilizer jit;
  jit.push({1, 0, 0}, 0);
  double max_out = 0;
  for (int t = 1; t < 64; ++t) {
    double v = (t % 2) ? -1.0 : 1.0;
    max_out = std::max(max_out, std::abs(jit.push({v, 0, 0}, 0).center.x));
  }
  CHECK(max_out < 1.0);

  // direct convolution oracle on a random-ish track
  Stabilizer conv;
  std::vector<double> track;
  for (int t = 0; t < 32; ++t) track.push_back(std::sin(0.3 * t) + 0.2 * std::cos(1.7 * t));
  std::vector<double> got;
  for (double v : track) got.push_back(conv.push({v, 0, 0}, 0).center.x);
  for (int t = 0; t < 32; ++t) {
    double want = 0;
    for (int i = 0; i < 5; ++i) {
      int src = std::max(0, t - 4 + i);
      want += w[static_cast<size_t>(i)] * track[static_cast<size_t>(src)];
    }
    CHECK(got[static_cast<size_t>(t)] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("trajectories: determinism, fps sharing, delta scaling") {
  TrajectoryConfig cfg;
  cfg.n_frames = 64;
  cfg.seed = 11;
  auto a = generate_trajectory(cfg);
  auto b = generate_trajectory(cfg);
  for (int t = 0; t < 64; ++t)
    for (int i = 0; i < 6; ++i)
      CHECK(a[static_cast<size_t>(t)].theta[static_cast<size_t>(i)] ==
            b[static_cast<size_t>(t)].theta[static_cast<size_t>(i)]);

  TrajectoryConfig cfg60 = cfg;
  cfg60.fps = 60;
  cfg60.n_frames = 128;
  auto hi = generate_trajectory(cfg60);
  for (int t = 0; t < 64; ++t)
    for (int i = 0; i < 6; ++i)
      CHECK(hi[static_cast<size_t>(2 * t)].theta[static_cast<size_t>(i)] ==
            doctest::Approx(a[static_cast<size_t>(t)].theta[static_cast<size_t>(i)]).epsilon(1e-12));

  TrajectoryConfig big = cfg;
  big.n_frames = 1001;
  auto lo_long = generate_trajectory(big);
  TrajectoryConfig big60 = big;
  big60.fps = 60;
  big60.n_frames = 2001;
  auto hi_long = generate_trajectory(big60);
  double d30 = 0, d60 = 0;
  for (int t = 0; t + 1 < 1000; ++t) {
    for (int i = 0; i < 6; ++i) {
      d30 += std::abs(lo_long[static_cast<size_t>(t + 1)].theta[static_cast<size_t>(i)] -
                      lo_long[static_cast<size_t>(t)].theta[static_cast<size_t>(i)]);
      d60 += std::abs(hi_long[static_cast<size_t>(t + 1)].theta[static_cast<size_t>(i)] -
                      hi_long[static_cast<size_t>(t)].theta[static_cast<size_t>(i)]);
    }
  }
  CHECK(d60 / d30 == doctest::Approx(0.5).epsilon(0.10));
}

TEST_CASE("frame pipeline: h_obj matches the posed forward axis") {
  GenDataConfig cfg;
  cfg.n_frames = 8;
  cfg.res = 32;
  cfg.seed = 3;
  auto ds = generate_dataset(cfg);
  for (const auto& f : ds.frames) {
    Mat3 rot = rodrigues({f.params.theta[0], f.params.theta[1], f.params.theta[2]});
    Vec3 fwd = rot * Vec3{0, 0, 1};
    auto sh = sh_basis9(static_cast<float>(fwd.x), static_cast<float>(fwd.y),
                        static_cast<float>(fwd.z));
    for (int i = 0; i < 9; ++i)
      CHECK(f.params.h_obj[static_cast<size_t>(i)] == doctest::Approx(sh[static_cast<size_t>(i)]));
    for (int i = 0; i < f.params.uv_map.numel(); ++i) {
      CHECK(f.params.uv_map.data()[i] >= 0.0f);
      CHECK(f.params.uv_map.data()[i] <= 1.0f);
    }
  }
}

TEST_CASE("dataset round trip is bit-exact and deterministic on disk") {
  GenDataConfig cfg;
  cfg.n_frames = 5;
  cfg.res = 32;
  cfg.seed = 9;
  auto ds = generate_dataset(cfg);
  auto dir1 = std::filesystem::temp_directory_path() / "ncr_ds_a";
  auto dir2 = std::filesystem::temp_directory_path() / "ncr_ds_b";
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
  write_dataset(dir1.string(), ds);
  auto ds2 = generate_dataset(cfg);
  write_dataset(dir2.string(), ds2);
  for (int t = 0; t < 5; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05d.ncr", t);
    CHECK(slurp((dir1 / name).string()) == slurp((dir2 / name).string()));
  }

  auto loaded = load_dataset(dir1.string());
  REQUIRE(loaded.size() == ds.size());
  CHECK(loaded.fps == ds.fps);
  CHECK(loaded.seed == ds.seed);
  for (int t = 0; t < 5; ++t) {
    const auto& a = ds.frames[static_cast<size_t>(t)];
    const auto& b = loaded.frames[static_cast<size_t>(t)];
    for (int i = 0; i < a.image.numel(); ++i) CHECK(a.image.data()[i] == b.image.data()[i]);
    for (int i = 0; i < a.params.uv_map.numel(); ++i)
      CHECK(a.params.uv_map.data()[i] == b.params.uv_map.data()[i]);
    for (int i = 0; i < 6; ++i)
      CHECK(static_cast<float>(a.params.theta[static_cast<size_t>(i)]) ==
            doctest::Approx(b.params.theta[static_cast<size_t>(i)]));
  }
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}
