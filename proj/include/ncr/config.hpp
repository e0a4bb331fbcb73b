#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ncr/dataset.hpp"
#include "ncr/protocols.hpp"
#include "ncr/scheduler.hpp"
#include "ncr/training.hpp"

// Flat key=value run configuration. Every tunable has exactly one key; CLI
// flags mirror keys one-to-one (underscores become dashes). Unknown keys are
// rejected and the effective config is echoed before any work.

namespace ncr {

struct RunConfig {
  // data generation
  int seed = 7;
  int data_seed = -1;  // -1: derive from seed
  int frames = 512;
  int fps = 30;
  int res = 64;
  int expr_dims = 4;
  double jitter_sigma = 0.0;

  // model
  int tex_channels = 16;
  int tex_size = 256;
  int gen_depth = 10;
  int gen_base = 32;
  bool use_upconv = true;
  bool use_lpf = true;
  bool two_frame_input = false;
  int warp_embed = 32;
  int warp_c1 = 24;
  int warp_c2 = 12;
  bool warp_concat_uv = true;
  bool warp_use_theta = true;
  bool warp_use_mlp = true;
  bool warp_sh_pose = true;
  bool warp_sh_skips = true;
  bool warp_exwarp = false;
  bool warp_exp = true;
  bool warp_use_c4 = true;
  bool warp_use_c5 = true;

  // training
  int epochs = 30;
  int batch = 1;
  double lr_nets = 1e-4;
  double lr_texture = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double lambda_tex = 1.0;
  double lambda_img = 1.0;
  double lambda_p = 0.1;
  double warp_base_img = 0.1;
  bool crop = true;
  double crop_frac = 0.75;
  int d_min = 1;
  int d_max = 2;
  double curriculum_frac = 0.2;
  bool train_warp = true;

  // scheduler / simulation
  int workers = 2;
  int num_warps = 1;
  int cache_depth = 2;
  int queue_bound = 0;
  double tg_ms = 47.02;
  double tw_ms = 14.62;
  double tsync_ms = 0.25;
  double input_fps = 0;
  int sim_frames = 400;
  std::string sim_mode = "parallel";  // parallel | sequential
  bool drop_stale = false;

  // evaluation / bench
  std::string protocol = "offline";  // offline | online | novel-view
  int eval_warps = 1;
  int sweep_d_max = 5;
  int sweep_stride = 4;
  int threads = 0;
  bool dump_images = false;

  // io
  std::string out_dir;
  std::string dataset;
  std::string test_dataset;
  std::string checkpoint;

  // ---------------------------------------------------------------------
  void set(const std::string& key, const std::string& value);
  void load_file(const std::string& path);
  std::string echo() const;
  void echo_to(const std::string& dir) const;  // writes <dir>/config.effective
  static std::vector<std::string> keys();

  GenDataConfig gen_data_config() const;
  ModelConfig model_config() const;
  TrainConfig train_config() const;
  ProtocolConfig protocol_config() const;
  SimConfig sim_config() const;

  // resolves out_dir: explicit value, else $NCR_OUT_ROOT/<leaf>, else ./out/<leaf>
  std::string resolved_out_dir(const std::string& leaf) const;
};

}  // namespace ncr
