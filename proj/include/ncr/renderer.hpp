#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ncr/adam.hpp"
#include "ncr/flops.hpp"
#include "ncr/scene.hpp"
#include "ncr/tensor.hpp"

namespace ncr {

// Four-level learnable feature pyramid; channels 1..3 of any sampled map are
// trained toward RGB. Level l has extent size >> l.
struct NeuralTexture {
  int channels = 16;
  int size = 256;
  std::vector<Tensor> levels;  // 4 entries, [D][S/2^l][S/2^l]

  NeuralTexture() = default;
  NeuralTexture(int d, int s, std::mt19937& rng);
  void collect_params(std::vector<NamedParam<float>>& out);
};

// F = sum over levels of grid_sample(level, uv).
Tensor sample_multiscale_texture(const NeuralTexture& tex, const Tensor& uv);

// Multiplies channels 4..12 (1-indexed) by the 9 SH coefficients of the view
// direction; other channels pass through. Requires at least 12 channels.
Tensor sh_view_modulate(const Tensor& f, const Vec3& view_dir);

// View reference point: the posed head center (theta translation).
Vec3 view_direction(const FrameParams& frame);

struct GeneratorConfig {
  int depth = 10;       // stages = depth/2 down + depth/2 up
  int base = 32;        // channel budget unit
  int tex_channels = 16;
  bool use_upconv = true;      // bilinear upsample + conv decoder
  bool use_lpf = true;         // Gaussian low-pass on the bottleneck
  bool two_frame_input = false;  // concat previous frame's sampled features
  int stages() const { return depth / 2; }
};

// Snapshot taken from one generator pass: the last three decoder maps at
// H/4, H/2, H plus the frame parameters they were computed from.
struct Cache {
  int frame = -1;
  Tensor c3, c4, c5;
  std::array<float, 6> theta{};
  std::array<float, 3> cam{};
  std::vector<float> expr;
  std::array<float, 9> h_obj{};
  Tensor uv_map;
};

struct GenOutput {
  Tensor image;    // [3][H][W] in [0,1]
  Cache cache;
  Tensor sampled;  // modulated feature map, reusable as next frame's history
};

class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorConfig& cfg, std::mt19937& rng);

  GenOutput forward(const NeuralTexture& tex, const FrameParams& frame,
                    const Tensor* prev_sampled = nullptr) const;

  void collect_params(std::vector<NamedParam<float>>& out);
  std::vector<LayerCost> flop_plan(int h, int w) const;
  const GeneratorConfig& config() const { return cfg_; }

  // channel extents of the cached decoder maps
  int c3_channels() const { return 4 * cfg_.base; }
  int c4_channels() const { return 2 * cfg_.base; }
  int c5_channels() const { return cfg_.base; }

 private:
  GeneratorConfig cfg_;
  std::vector<Tensor> enc_w_, enc_b_;
  std::vector<Tensor> dec_w_, dec_b_;
  Tensor out_w_, out_b_;
  std::vector<int> enc_out_, dec_out_;  // channel schedule
  int input_channels() const {
    return cfg_.two_frame_input ? 2 * cfg_.tex_channels : cfg_.tex_channels;
  }
};

}  // namespace ncr
