#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncr/scene.hpp"
#include "ncr/tensor.hpp"

// On-disk frame records: one binary file per frame plus a plain-text
// manifest. Record layout (little-endian 32-bit words):
//   magic "NCR1", u32 H, u32 W, u32 k,
//   f32 uv_map[2*H*W], f32 mask[H*W], f32 image[3*H*W],
//   f32 theta[6], f32 expr[k], f32 cam[3]

namespace ncr {

struct DatasetFrame {
  FrameParams params;
  Tensor image;  // [3][H][W] ground truth
};

struct Dataset {
  int h = 0, w = 0, expr_dims = 0, fps = 30;
  uint32_t seed = 0;
  std::vector<DatasetFrame> frames;
  int size() const { return static_cast<int>(frames.size()); }
};

struct GenDataConfig {
  uint32_t seed = 7;
  int n_frames = 64;
  int fps = 30;
  int res = 64;
  int expr_dims = 4;
  double jitter_sigma = 0.0;
  ShadingConfig shading;
};

// Builds proxy + trajectory + stabilized framing + rasterized UVs + ground
// truth images, all seed-deterministic.
Dataset generate_dataset(const GenDataConfig& cfg);

void write_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

}  // namespace ncr
