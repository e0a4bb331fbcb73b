#include "ncr/dataset.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ncr {

namespace fs = std::filesystem;

Dataset generate_dataset(const GenDataConfig& cfg) {
  HeadProxy proxy = make_head_proxy(cfg.expr_dims, 20, cfg.seed);
  TrajectoryConfig tc;
  tc.n_frames = cfg.n_frames;
  tc.fps = cfg.fps;
  tc.jitter_sigma = cfg.jitter_sigma;
  tc.seed = cfg.seed;
  tc.expr_dims = cfg.expr_dims;
  auto drives = generate_trajectory(tc);
  auto frames = build_frames(proxy, drives, cfg.res, cfg.res);

  Dataset ds;
  ds.h = ds.w = cfg.res;
  ds.expr_dims = cfg.expr_dims;
  ds.fps = cfg.fps;
  ds.seed = cfg.seed;
  ds.frames.reserve(frames.size());
  for (auto& fp : frames) {
    DatasetFrame df;
    df.image = render_ground_truth(proxy, fp, cfg.res, cfg.res, cfg.shading);
    df.params = std::move(fp);
    ds.frames.push_back(std::move(df));
  }
  return ds;
}

namespace {

void put_u32(std::ofstream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

void put_f32(std::ofstream& os, const float* p, size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 4));
}

uint32_t get_u32(std::ifstream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

void get_f32(std::ifstream& is, float* p, size_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 4));
}

std::string frame_path(const std::string& dir, int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05d.ncr", t);
  return dir + "/" + buf;
}

}  // namespace

void write_dataset(const std::string& dir, const Dataset& ds) {
  fs::create_directories(dir);
  for (int t = 0; t < ds.size(); ++t) {
    const auto& f = ds.frames[static_cast<size_t>(t)];
    std::ofstream os(frame_path(dir, t), std::ios::binary);
    if (!os) throw UsageError("cannot open " + frame_path(dir, t) + " for writing");
    os.write("NCR1", 4);
    put_u32(os, static_cast<uint32_t>(ds.h));
    put_u32(os, static_cast<uint32_t>(ds.w));
    put_u32(os, static_cast<uint32_t>(ds.expr_dims));
    put_f32(os, f.params.uv_map.data(), static_cast<size_t>(f.params.uv_map.numel()));
    put_f32(os, f.params.mask.data(), static_cast<size_t>(f.params.mask.numel()));
    put_f32(os, f.image.data(), static_cast<size_t>(f.image.numel()));
    float theta[6], cam[3];
    for (int i = 0; i < 6; ++i) theta[i] = static_cast<float>(f.params.theta[static_cast<size_t>(i)]);
    cam[0] = static_cast<float>(f.params.cam.x);
    cam[1] = static_cast<float>(f.params.cam.y);
    cam[2] = static_cast<float>(f.params.cam.z);
    put_f32(os, theta, 6);
    std::vector<float> expr(f.params.expr.begin(), f.params.expr.end());
    put_f32(os, expr.data(), expr.size());
    put_f32(os, cam, 3);
  }
  std::ofstream man(dir + "/manifest.txt");
  man << "frames " << ds.size() << "\n"
      << "fps " << ds.fps << "\n"
      << "seed " << ds.seed << "\n";
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream man(dir + "/manifest.txt");
  if (!man) throw UsageError("dataset manifest not found in " + dir);
  Dataset ds;
  std::string key;
  long value;
  while (man >> key >> value) {
    if (key == "frames") ds.frames.resize(static_cast<size_t>(value));
    else if (key == "fps") ds.fps = static_cast<int>(value);
    else if (key == "seed") ds.seed = static_cast<uint32_t>(value);
    else throw UsageError("unknown manifest key: " + key);
  }
  if (ds.frames.empty()) throw UsageError("dataset manifest declares no frames");

  for (int t = 0; t < ds.size(); ++t) {
    std::ifstream is(frame_path(dir, t), std::ios::binary);
    if (!is) throw UsageError("missing dataset record " + frame_path(dir, t));
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, "NCR1", 4) != 0)
      throw UsageError("bad magic in " + frame_path(dir, t));
    int h = static_cast<int>(get_u32(is));
    int w = static_cast<int>(get_u32(is));
    int k = static_cast<int>(get_u32(is));
    if (t == 0) {
      ds.h = h;
      ds.w = w;
      ds.expr_dims = k;
    } else if (h != ds.h || w != ds.w || k != ds.expr_dims) {
      throw UsageError("inconsistent record header in " + frame_path(dir, t));
    }
    auto& f = ds.frames[static_cast<size_t>(t)];
    f.params.t = t;
    f.params.uv_map = Tensor::zeros({2, h, w});
    get_f32(is, f.params.uv_map.data(), static_cast<size_t>(2 * h * w));
    f.params.mask = Tensor::zeros({1, h, w});
    get_f32(is, f.params.mask.data(), static_cast<size_t>(h * w));
    f.image = Tensor::zeros({3, h, w});
    get_f32(is, f.image.data(), static_cast<size_t>(3 * h * w));
    float theta[6], cam[3];
    get_f32(is, theta, 6);
    std::vector<float> expr(static_cast<size_t>(k));
    get_f32(is, expr.data(), expr.size());
    get_f32(is, cam, 3);
    if (!is) throw UsageError("truncated dataset record " + frame_path(dir, t));
    for (int i = 0; i < 6; ++i) f.params.theta[static_cast<size_t>(i)] = theta[i];
    f.params.expr.assign(expr.begin(), expr.end());
    f.params.cam = {cam[0], cam[1], cam[2]};
    f.params.look_at = {theta[3], theta[4], theta[5]};
    f.params.h_obj = pose_sh_code(f.params.theta);
  }
  return ds;
}

}  // namespace ncr
