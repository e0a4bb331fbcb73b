#pragma once

#include <random>
#include <string>
#include <vector>

#include "ncr/adam.hpp"
#include "ncr/dataset.hpp"
#include "ncr/losses.hpp"
#include "ncr/renderer.hpp"
#include "ncr/warp.hpp"

namespace ncr {

struct ModelConfig {
  int res = 64;
  int tex_channels = 16;
  int tex_size = 256;
  GeneratorConfig gen;
  WarpWiring wiring;
  int warp_embed = 32;
  int warp_c1 = 24;
  int warp_c2 = 12;
  int expr_dims = 4;
  uint32_t seed = 1;
};

struct Models {
  ModelConfig cfg;
  NeuralTexture tex;
  Generator gen;
  WarpNet warp;
  PerceptualNet perc;

  std::vector<NamedParam<float>> named_params();
  std::vector<Tensor> texture_group();
  std::vector<Tensor> net_group();
  void zero_grads();
};

Models build_models(const ModelConfig& cfg);

void save_models(const std::string& path, Models& models);
void load_models(const std::string& path, Models& models);

struct TrainConfig {
  int epochs = 30;
  float lr_nets = 1e-4f;
  float lr_texture = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  int batch = 1;
  uint32_t seed = 1;
  bool crop = true;
  double crop_frac = 0.75;
  int d_min = 1;
  int d_max = 2;
  double curriculum_frac = 0.2;  // leading fraction of epochs trains G alone
  bool train_warp = true;
  LossWeights weights;
  std::string log_csv;  // per-epoch metrics, empty disables
};

struct EpochStats {
  int epoch = 0;
  LossMode mode = LossMode::kBaseline;
  float l_tex = 0, l_img_t = 0, l_img_d = 0, l_p = 0, total = 0;
  double wall_ms = 0;
};

// Largest crop extent compatible with the generator's downsampling factor.
int snapped_crop_size(int res, int stages, double frac);

// View of one dataset frame restricted to a crop window (pure data copies).
struct CropWindow {
  int y0 = 0, x0 = 0, size = 0;
};
FrameParams crop_frame(const FrameParams& f, const CropWindow& wnd);
Tensor crop_image(const Tensor& img, const CropWindow& wnd);

class Trainer {
 public:
  Trainer(Models& models, const TrainConfig& cfg);

  // One Adam update over `batch` sampled frame (pairs); returns mean terms.
  LossBreakdown step(const Dataset& ds, LossMode mode);
  std::vector<EpochStats> run(const Dataset& ds);

 private:
  Models& models_;
  TrainConfig cfg_;
  std::mt19937 rng_;
  AdamState<float> opt_tex_, opt_nets_;
  std::vector<Tensor> tex_params_, net_params_;
  long long steps_ = 0;
};

}  // namespace ncr
