#include "ncr/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ncr/ops.hpp"

namespace ncr {

namespace {

constexpr double kPi = 3.14159265358979323846;

uint32_t hash2(uint32_t x, uint32_t y) {
  uint32_t h = x * 0x9E3779B1u ^ y * 0x85EBCA77u;
  h ^= h >> 16;
  h *= 0x7FEB352Du;
  h ^= h >> 15;
  h *= 0x846CA68Bu;
  h ^= h >> 16;
  return h;
}

double hash01(uint32_t x, uint32_t y) {
  return hash2(x, y) * (1.0 / 4294967296.0);
}

Vec3 ellipsoid_point(double theta, double phi) {
  const double rx = 0.80, ry = 1.00, rz = 0.88;
  double st = std::sin(theta);
  return {rx * st * std::cos(phi), ry * std::cos(theta), rz * st * std::sin(phi)};
}

}  // namespace

HeadProxy make_head_proxy(int expr_dims, int grid, uint32_t seed) {
  if (grid < 4) throw ConfigError("head proxy grid must be >= 4");
  HeadProxy p;
  const int rows = grid, cols = grid;
  auto idx = [cols](int i, int j) { return i * (cols + 1) + j; };
  for (int i = 0; i < rows; ++i) {
    double theta = kPi * (i + 0.5) / rows;
    for (int j = 0; j <= cols; ++j) {
      double phi = 2 * kPi * j / cols;
      p.base_vertices.push_back(ellipsoid_point(theta, phi));
      p.uv_coords.push_back({static_cast<double>(j) / cols, (i + 0.5) / rows});
    }
  }
  const int pole_top = static_cast<int>(p.base_vertices.size());
  p.base_vertices.push_back({0, 1.0, 0});
  p.uv_coords.push_back({0.5, 0.0});
  const int pole_bot = pole_top + 1;
  p.base_vertices.push_back({0, -1.0, 0});
  p.uv_coords.push_back({0.5, 1.0});

  for (int i = 0; i + 1 < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      p.triangles.push_back({idx(i, j), idx(i + 1, j), idx(i, j + 1)});
      p.triangles.push_back({idx(i, j + 1), idx(i + 1, j), idx(i + 1, j + 1)});
    }
  for (int j = 0; j < cols; ++j) {
    p.triangles.push_back({pole_top, idx(0, j), idx(0, j + 1)});
    p.triangles.push_back({pole_bot, idx(rows - 1, j + 1), idx(rows - 1, j)});
  }

  // Antipodal equator vertices; phi=0 is +x.
  p.landmark_left = idx(rows / 2, 0);
  p.landmark_right = idx(rows / 2, cols / 2);

  // Smooth radial bumps centered on the +z ("face") hemisphere. Per-vertex
  // displacement stays below 0.2 of the mesh radius.
  std::mt19937 rng(seed * 7919u + 17u);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  std::vector<Vec3> centers = {normalized({0.45, 0.30, 0.85}), normalized({-0.45, 0.30, 0.85}),
                               normalized({0.0, 0.72, 0.69}), normalized({0.0, -0.60, 0.80})};
  while (static_cast<int>(centers.size()) < expr_dims) {
    Vec3 c{un(rng), un(rng), std::abs(un(rng)) + 0.3};
    centers.push_back(normalized(c));
  }
  const double amp = 0.12, width = 0.45;
  for (int e = 0; e < expr_dims; ++e) {
    // seed-dependent wobble so different seeds give different identities
    Vec3 c = normalized(centers[static_cast<size_t>(e)] + Vec3{0.08 * un(rng), 0.08 * un(rng), 0.0});
    std::vector<Vec3> shape(p.base_vertices.size());
    for (size_t vi = 0; vi < p.base_vertices.size(); ++vi) {
      Vec3 d = normalized(p.base_vertices[vi]);
      double ang = std::acos(std::clamp(dot(d, c), -1.0, 1.0));
      double w = std::exp(-ang * ang / (2 * width * width));
      shape[vi] = d * (amp * w);
    }
    p.blendshapes.push_back(std::move(shape));
  }
  return p;
}

std::vector<Vec3> deform_and_pose(const HeadProxy& proxy, const std::array<double, 6>& theta,
                                  const std::vector<double>& expr) {
  Mat3 rot = rodrigues({theta[0], theta[1], theta[2]});
  Vec3 trans{theta[3], theta[4], theta[5]};
  std::vector<Vec3> out(proxy.base_vertices.size());
  for (size_t vi = 0; vi < out.size(); ++vi) {
    Vec3 v = proxy.base_vertices[vi];
    for (size_t e = 0; e < proxy.blendshapes.size() && e < expr.size(); ++e) {
      double c = std::clamp(expr[e], -3.0, 3.0);
      v += proxy.blendshapes[e][vi] * c;
    }
    out[vi] = rot * v + trans;
  }
  return out;
}

void rasterize_fragments(const std::vector<Vec3>& vertices, const HeadProxy& proxy,
                         const CameraFrame& cam, int h, int w, FragmentBuffer& out) {
  out.h = h;
  out.w = w;
  const size_t plane = static_cast<size_t>(h) * w;
  out.uv.assign(2 * plane, 0.0f);
  out.mask.assign(plane, 0);
  out.depth.assign(plane, std::numeric_limits<double>::infinity());
  out.normal.assign(plane, Vec3{});
  out.world.assign(plane, Vec3{});

  Vec3 fwd = normalized(cam.look_at - cam.eye);
  Vec3 up{0, 1, 0};
  if (std::abs(dot(fwd, up)) > 0.999) up = Vec3{0, 0, 1};
  Vec3 right = normalized(cross(fwd, up));
  Vec3 camup = cross(right, fwd);
  const double cx = w / 2.0, cy = h / 2.0, znear = 0.05;

  // Area-weighted vertex normals of the posed mesh.
  std::vector<Vec3> vnormal(vertices.size(), Vec3{});
  for (const auto& tri : proxy.triangles) {
    Vec3 n = cross(vertices[static_cast<size_t>(tri[1])] - vertices[static_cast<size_t>(tri[0])],
                   vertices[static_cast<size_t>(tri[2])] - vertices[static_cast<size_t>(tri[0])]);
    for (int k = 0; k < 3; ++k) vnormal[static_cast<size_t>(tri[k])] += n;
  }
  for (auto& n : vnormal) n = normalized(n);

  struct Projected {
    double sx, sy, z;
    bool ok;
  };
  std::vector<Projected> proj(vertices.size());
  for (size_t vi = 0; vi < vertices.size(); ++vi) {
    Vec3 d = vertices[vi] - cam.eye;
    double z = dot(fwd, d);
    if (z < znear) {
      proj[vi] = {0, 0, 0, false};
      continue;
    }
    proj[vi] = {cx + cam.focal * dot(right, d) / z, cy - cam.focal * dot(camup, d) / z, z, true};
  }

  auto edge = [](double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
  };

  for (const auto& tri : proxy.triangles) {
    const auto& p0 = proj[static_cast<size_t>(tri[0])];
    const auto& p1 = proj[static_cast<size_t>(tri[1])];
    const auto& p2 = proj[static_cast<size_t>(tri[2])];
    if (!p0.ok || !p1.ok || !p2.ok) continue;
    double area = edge(p0.sx, p0.sy, p1.sx, p1.sy, p2.sx, p2.sy);
    if (std::abs(area) < 1e-9) continue;  // degenerate in screen space
    int x0 = std::max(0, static_cast<int>(std::floor(std::min({p0.sx, p1.sx, p2.sx}) - 0.5)));
    int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max({p0.sx, p1.sx, p2.sx}))));
    int y0 = std::max(0, static_cast<int>(std::floor(std::min({p0.sy, p1.sy, p2.sy}) - 0.5)));
    int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max({p0.sy, p1.sy, p2.sy}))));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double px = x + 0.5, py = y + 0.5;
        double l0 = edge(p1.sx, p1.sy, p2.sx, p2.sy, px, py) / area;
        double l1 = edge(p2.sx, p2.sy, p0.sx, p0.sy, px, py) / area;
        double l2 = edge(p0.sx, p0.sy, p1.sx, p1.sy, px, py) / area;
        if (l0 < 0 || l1 < 0 || l2 < 0) continue;
        double inv_z = l0 / p0.z + l1 / p1.z + l2 / p2.z;
        double z = 1.0 / inv_z;
        size_t pix = static_cast<size_t>(y) * w + x;
        if (z >= out.depth[pix]) continue;
        out.depth[pix] = z;
        out.mask[pix] = 1;
        double w0 = l0 / p0.z * z, w1 = l1 / p1.z * z, w2 = l2 / p2.z * z;
        const auto& uv0 = proxy.uv_coords[static_cast<size_t>(tri[0])];
        const auto& uv1 = proxy.uv_coords[static_cast<size_t>(tri[1])];
        const auto& uv2 = proxy.uv_coords[static_cast<size_t>(tri[2])];
        out.uv[pix] = static_cast<float>(w0 * uv0[0] + w1 * uv1[0] + w2 * uv2[0]);
        out.uv[plane + pix] = static_cast<float>(w0 * uv0[1] + w1 * uv1[1] + w2 * uv2[1]);
        out.normal[pix] = normalized(vnormal[static_cast<size_t>(tri[0])] * w0 +
                                     vnormal[static_cast<size_t>(tri[1])] * w1 +
                                     vnormal[static_cast<size_t>(tri[2])] * w2);
        out.world[pix] = vertices[static_cast<size_t>(tri[0])] * w0 +
                         vertices[static_cast<size_t>(tri[1])] * w1 +
                         vertices[static_cast<size_t>(tri[2])] * w2;
      }
  }
}

UvRaster rasterize_uv(const std::vector<Vec3>& vertices, const HeadProxy& proxy,
                      const CameraFrame& cam, int h, int w) {
  if (h < 16 || w < 16) throw ConfigError("rasterize_uv requires extents >= 16");
  FragmentBuffer frags;
  rasterize_fragments(vertices, proxy, cam, h, w, frags);
  UvRaster r;
  r.uv_map = Tensor::from({2, h, w}, std::move(frags.uv));
  std::vector<float> m(frags.mask.begin(), frags.mask.end());
  r.mask = Tensor::from({1, h, w}, std::move(m));
  return r;
}

std::array<double, 3> albedo_at(double u, double v, const ShadingConfig& cfg) {
  if (cfg.white_albedo) return {1.0, 1.0, 1.0};
  u = std::clamp(u, 0.0, 1.0);
  v = std::clamp(v, 0.0, 1.0);
  int cu = static_cast<int>(u * 8) & 1;
  int cv = static_cast<int>(v * 8) & 1;
  std::array<double, 3> base = (cu ^ cv) ? std::array<double, 3>{0.72, 0.55, 0.42}
                                         : std::array<double, 3>{0.38, 0.31, 0.47};
  double n = (hash01(static_cast<uint32_t>(u * 32), static_cast<uint32_t>(v * 32)) - 0.5) * 0.36;
  for (auto& c : base) c = std::clamp(c + n, 0.0, 1.0);
  return base;
}

std::array<double, 3> shade_pixel(const Vec3& n, const Vec3& view_dir, double u, double v,
                                  const ShadingConfig& cfg) {
  Vec3 l = normalized(cfg.light_dir);
  auto alb = albedo_at(u, v, cfg);
  double nl = std::max(0.0, dot(n, l));
  double diffuse = cfg.ambient + (1.0 - cfg.ambient) * nl;
  Vec3 half = normalized(l + view_dir);
  double spec = cfg.spec_weight * std::pow(std::max(0.0, dot(n, half)), cfg.spec_exponent);
  std::array<double, 3> rgb;
  for (int c = 0; c < 3; ++c) rgb[static_cast<size_t>(c)] = std::clamp(alb[static_cast<size_t>(c)] * diffuse + spec, 0.0, 1.0);
  return rgb;
}

Tensor reference_render(const std::vector<Vec3>& vertices, const HeadProxy& proxy,
                        const CameraFrame& cam, int h, int w, const ShadingConfig& cfg) {
  FragmentBuffer frags;
  rasterize_fragments(vertices, proxy, cam, h, w, frags);
  const size_t plane = static_cast<size_t>(h) * w;
  std::vector<float> img(3 * plane);
  for (size_t pix = 0; pix < plane; ++pix) {
    std::array<double, 3> rgb = cfg.background;
    if (frags.mask[pix]) {
      Vec3 view = normalized(cam.eye - frags.world[pix]);
      rgb = shade_pixel(frags.normal[pix], view, frags.uv[pix], frags.uv[plane + pix], cfg);
    }
    for (int c = 0; c < 3; ++c) img[static_cast<size_t>(c) * plane + pix] = static_cast<float>(rgb[static_cast<size_t>(c)]);
  }
  return Tensor::from({3, h, w}, std::move(img));
}

Stabilizer::Stabilizer(double sigma) {
  double sum = 0;
  for (int i = 0; i < 5; ++i) {
    double d = i - 2;
    weights_[static_cast<size_t>(i)] = std::exp(-d * d / (2 * sigma * sigma));
    sum += weights_[static_cast<size_t>(i)];
  }
  for (auto& w : weights_) w /= sum;
}

Stabilizer::Smoothed Stabilizer::push(const Vec3& raw_center, double raw_span) {
  if (centers_.empty()) {
    centers_.assign(5, raw_center);
    spans_.assign(5, raw_span);
  } else {
    centers_.pop_front();
    centers_.push_back(raw_center);
    spans_.pop_front();
    spans_.push_back(raw_span);
  }
  Smoothed s;
  for (int i = 0; i < 5; ++i) {
    s.center += centers_[static_cast<size_t>(i)] * weights_[static_cast<size_t>(i)];
    s.span += spans_[static_cast<size_t>(i)] * weights_[static_cast<size_t>(i)];
  }
  return s;
}

namespace {

struct SinBank {
  // value(t) = sum_i amp[i] * sin(2 pi freq[i] t + phase[i])
  std::array<double, 3> amp{}, freq{}, phase{};
  double eval(double t) const {
    double v = 0;
    for (int i = 0; i < 3; ++i)
      v += amp[static_cast<size_t>(i)] * std::sin(2 * kPi * freq[static_cast<size_t>(i)] * t + phase[static_cast<size_t>(i)]);
    return v;
  }
};

SinBank make_bank(std::mt19937& rng, double amplitude) {
  std::uniform_real_distribution<double> uf(0.06, 0.45);
  std::uniform_real_distribution<double> up(0.0, 2 * kPi);
  std::uniform_real_distribution<double> ua(0.3, 1.0);
  SinBank b;
  double total = 0;
  for (int i = 0; i < 3; ++i) {
    b.amp[static_cast<size_t>(i)] = ua(rng);
    total += b.amp[static_cast<size_t>(i)];
    b.freq[static_cast<size_t>(i)] = uf(rng);
    b.phase[static_cast<size_t>(i)] = up(rng);
  }
  for (auto& a : b.amp) a *= amplitude / total;
  return b;
}

}  // namespace

std::vector<RawFrameDrive> generate_trajectory(const TrajectoryConfig& cfg) {
  if (cfg.n_frames < 1) throw ConfigError("trajectory needs n_frames >= 1");
  if (cfg.fps != 30 && cfg.fps != 60) throw ConfigError("trajectory fps must be 30 or 60");
  std::mt19937 rng(cfg.seed);
  SinBank rot[3] = {make_bank(rng, 0.12), make_bank(rng, 0.40), make_bank(rng, 0.10)};
  SinBank trans[3] = {make_bank(rng, 0.06), make_bank(rng, 0.05), make_bank(rng, 0.06)};
  std::vector<SinBank> expr;
  for (int e = 0; e < cfg.expr_dims; ++e) expr.push_back(make_bank(rng, 0.9));
  SinBank camb[3] = {make_bank(rng, 0.30), make_bank(rng, 0.18), make_bank(rng, 0.25)};
  const Vec3 cam_base{0.0, 0.05, 2.8};

  std::mt19937 jrng(cfg.seed ^ 0x9E3779B9u);
  std::normal_distribution<double> jn(0.0, 1.0);

  std::vector<RawFrameDrive> out(static_cast<size_t>(cfg.n_frames));
  for (int t = 0; t < cfg.n_frames; ++t) {
    double ts = static_cast<double>(t) / cfg.fps;
    auto& f = out[static_cast<size_t>(t)];
    for (int i = 0; i < 3; ++i) {
      f.theta[static_cast<size_t>(i)] = rot[i].eval(ts);
      f.theta[static_cast<size_t>(i + 3)] = trans[i].eval(ts);
    }
    f.expr.resize(static_cast<size_t>(cfg.expr_dims));
    for (int e = 0; e < cfg.expr_dims; ++e) f.expr[static_cast<size_t>(e)] = expr[static_cast<size_t>(e)].eval(ts);
    f.cam = cam_base + Vec3{camb[0].eval(ts), camb[1].eval(ts), camb[2].eval(ts)};
    if (cfg.jitter_sigma > 0) {
      for (auto& v : f.theta) v += cfg.jitter_sigma * jn(jrng);
      for (auto& v : f.expr) v += cfg.jitter_sigma * jn(jrng);
      f.cam += Vec3{jn(jrng), jn(jrng), jn(jrng)} * cfg.jitter_sigma;
    }
  }
  return out;
}

std::array<float, 9> pose_sh_code(const std::array<double, 6>& theta) {
  Mat3 rot = rodrigues({theta[0], theta[1], theta[2]});
  Vec3 fwd = rot * Vec3{0, 0, 1};
  auto sh = sh_basis9(fwd.x, fwd.y, fwd.z);
  std::array<float, 9> out;
  for (int i = 0; i < 9; ++i) out[static_cast<size_t>(i)] = static_cast<float>(sh[static_cast<size_t>(i)]);
  return out;
}

std::vector<FrameParams> build_frames(const HeadProxy& proxy,
                                      const std::vector<RawFrameDrive>& drives, int h, int w) {
  Stabilizer stab;
  std::vector<FrameParams> frames;
  frames.reserve(drives.size());
  for (size_t t = 0; t < drives.size(); ++t) {
    const auto& d = drives[t];
    auto verts = deform_and_pose(proxy, d.theta, d.expr);
    Vec3 center{};
    for (const auto& v : verts) center += v * (1.0 / static_cast<double>(verts.size()));
    double span = norm(verts[static_cast<size_t>(proxy.landmark_left)] -
                       verts[static_cast<size_t>(proxy.landmark_right)]);
    auto s = stab.push(center, span);

    FrameParams fp;
    fp.t = static_cast<int>(t);
    fp.theta = d.theta;
    fp.expr = d.expr;
    fp.cam = d.cam;
    fp.look_at = s.center;
    fp.focal = 0.5 * w * norm(d.cam - s.center) / std::max(1e-6, s.span);
    CameraFrame cf{fp.cam, fp.look_at, fp.focal};
    auto raster = rasterize_uv(verts, proxy, cf, h, w);
    fp.uv_map = std::move(raster.uv_map);
    fp.mask = std::move(raster.mask);
    fp.h_obj = pose_sh_code(d.theta);
    frames.push_back(std::move(fp));
  }
  return frames;
}

Tensor render_ground_truth(const HeadProxy& proxy, const FrameParams& frame, int h, int w,
                           const ShadingConfig& cfg) {
  auto verts = deform_and_pose(proxy, frame.theta, frame.expr);
  CameraFrame cf{frame.cam, frame.look_at, frame.focal};
  return reference_render(verts, proxy, cf, h, w, cfg);
}

}  // namespace ncr
