#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <vector>

#include "ncr/geometry.hpp"
#include "ncr/tensor.hpp"

// Procedural stand-in for a reconstructed face: a deformable ellipsoid grid
// mesh with UV coordinates, a software UV rasterizer, a view-dependent
// shader producing ground-truth images, smooth random trajectories, and the
// camera stabilizer.

namespace ncr {

struct HeadProxy {
  std::vector<Vec3> base_vertices;             // K
  std::vector<std::array<int, 3>> triangles;   // T x 3 indices
  std::vector<std::array<double, 2>> uv_coords;  // K, in [0,1]^2
  std::vector<std::vector<Vec3>> blendshapes;  // k x K per-vertex offsets
  int landmark_left = 0;   // equator vertex on +x
  int landmark_right = 0;  // equator vertex on -x
  int expr_dims() const { return static_cast<int>(blendshapes.size()); }
  int vertex_count() const { return static_cast<int>(base_vertices.size()); }
};

// grid = latitude rows; longitude columns match. Blendshape bumps are seeded
// and bounded to 0.2 of the mesh radius.
HeadProxy make_head_proxy(int expr_dims = 4, int grid = 20, uint32_t seed = 1);

// vertices = Rot(theta[0:3]) * (base + sum_j expr_j * basis_j) + theta[3:6].
// Expression coefficients are clamped to [-3, 3].
std::vector<Vec3> deform_and_pose(const HeadProxy& proxy, const std::array<double, 6>& theta,
                                  const std::vector<double>& expr);

struct CameraFrame {
  Vec3 eye;
  Vec3 look_at;
  double focal = 96;  // pixels; principal point is the image center
};

// Per-pixel rasterization output shared by the UV pass and the shader.
struct FragmentBuffer {
  int h = 0, w = 0;
  std::vector<float> uv;       // [2][h][w]
  std::vector<uint8_t> mask;   // [h][w]
  std::vector<double> depth;   // [h][w]
  std::vector<Vec3> normal;    // [h][w]
  std::vector<Vec3> world;     // [h][w]
};

void rasterize_fragments(const std::vector<Vec3>& vertices, const HeadProxy& proxy,
                         const CameraFrame& cam, int h, int w, FragmentBuffer& out);

struct UvRaster {
  Tensor uv_map;  // [2][H][W] in [0,1], zero where uncovered
  Tensor mask;    // [1][H][W] in {0,1}
};

UvRaster rasterize_uv(const std::vector<Vec3>& vertices, const HeadProxy& proxy,
                      const CameraFrame& cam, int h, int w);

struct ShadingConfig {
  Vec3 light_dir{0.4, 0.7, 0.6};  // world, normalized on use
  double ambient = 0.15;
  double spec_weight = 0.35;
  double spec_exponent = 24.0;
  bool white_albedo = false;
  std::array<double, 3> background{0.12, 0.13, 0.16};
};

// Deterministic checker-plus-hash albedo.
std::array<double, 3> albedo_at(double u, double v, const ShadingConfig& cfg);

// Lambert + Blinn specular; exposed so the term isolation is testable.
std::array<double, 3> shade_pixel(const Vec3& n, const Vec3& view_dir, double u, double v,
                                  const ShadingConfig& cfg);

Tensor reference_render(const std::vector<Vec3>& vertices, const HeadProxy& proxy,
                        const CameraFrame& cam, int h, int w, const ShadingConfig& cfg);

// Delayed size-5 Gaussian smoother over head-center and landmark-span
// observations. Until five observations arrive, missing history replicates
// the first one.
class Stabilizer {
 public:
  explicit Stabilizer(double sigma = 1.0);
  struct Smoothed {
    Vec3 center;
    double span = 0;
  };
  Smoothed push(const Vec3& raw_center, double raw_span);
  const std::array<double, 5>& weights() const { return weights_; }

 private:
  std::array<double, 5> weights_{};
  std::deque<Vec3> centers_;
  std::deque<double> spans_;
};

struct RawFrameDrive {
  std::array<double, 6> theta{};  // axis-angle rotation xyz + translation xyz
  std::vector<double> expr;
  Vec3 cam;
};

struct TrajectoryConfig {
  int n_frames = 64;
  int fps = 30;
  double jitter_sigma = 0.0;
  uint32_t seed = 1;
  int expr_dims = 4;
};

// Smooth band-limited curves sampled at frame times; the same seed yields the
// same continuous parameterization at any fps.
std::vector<RawFrameDrive> generate_trajectory(const TrajectoryConfig& cfg);

struct FrameParams {
  int t = 0;
  std::array<double, 6> theta{};
  std::vector<double> expr;
  Vec3 cam;
  Vec3 look_at;
  double focal = 0;
  Tensor uv_map;               // [2][H][W]
  Tensor mask;                 // [1][H][W]
  std::array<float, 9> h_obj{};  // SH code of the posed forward axis
};

std::array<float, 9> pose_sh_code(const std::array<double, 6>& theta);

// Runs the stabilizer over the drive track and rasterizes each frame.
std::vector<FrameParams> build_frames(const HeadProxy& proxy,
                                      const std::vector<RawFrameDrive>& drives, int h, int w);

// Ground truth image for one frame (re-poses the proxy).
Tensor render_ground_truth(const HeadProxy& proxy, const FrameParams& frame, int h, int w,
                           const ShadingConfig& cfg);

}  // namespace ncr
