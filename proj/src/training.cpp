#include "ncr/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "ncr/checkpoint.hpp"
#include "ncr/ops.hpp"

namespace ncr {

Models build_models(const ModelConfig& cfg) {
  Models m;
  m.cfg = cfg;
  std::mt19937 rng(cfg.seed * 1000003u + 5u);
  m.tex = NeuralTexture(cfg.tex_channels, cfg.tex_size, rng);
  GeneratorConfig gcfg = cfg.gen;
  gcfg.tex_channels = cfg.tex_channels;
  m.gen = Generator(gcfg, rng);
  m.warp = WarpNet(cfg.wiring, m.gen.c3_channels(), m.gen.c4_channels(), m.gen.c5_channels(),
                   cfg.expr_dims, cfg.tex_channels, rng, cfg.warp_embed, cfg.warp_c1,
                   cfg.warp_c2);
  m.perc = PerceptualNet(cfg.seed);
  return m;
}

std::vector<NamedParam<float>> Models::named_params() {
  std::vector<NamedParam<float>> out;
  tex.collect_params(out);
  gen.collect_params(out);
  warp.collect_params(out);
  return out;
}

std::vector<Tensor> Models::texture_group() {
  std::vector<Tensor> out;
  for (auto& l : tex.levels) out.push_back(l);
  return out;
}

std::vector<Tensor> Models::net_group() {
  std::vector<NamedParam<float>> named;
  gen.collect_params(named);
  warp.collect_params(named);
  std::vector<Tensor> out;
  for (auto& p : named) out.push_back(p.tensor);
  return out;
}

void Models::zero_grads() {
  for (auto& p : named_params()) p.tensor.zero_grad();
}

void save_models(const std::string& path, Models& models) {
  auto params = models.named_params();
  save_checkpoint(path, params);
}

void load_models(const std::string& path, Models& models) {
  auto params = models.named_params();
  load_checkpoint(path, params);
}

int snapped_crop_size(int res, int stages, double frac) {
  int unit = 1 << stages;
  int want = static_cast<int>(std::floor(res * frac));
  int snapped = (want / unit) * unit;
  return std::max(unit, std::min(snapped, res));
}

FrameParams crop_frame(const FrameParams& f, const CropWindow& wnd) {
  FrameParams out = f;
  NoGradGuard ng;
  out.uv_map = crop_spatial(f.uv_map, wnd.y0, wnd.x0, wnd.size, wnd.size);
  out.mask = crop_spatial(f.mask, wnd.y0, wnd.x0, wnd.size, wnd.size);
  return out;
}

Tensor crop_image(const Tensor& img, const CropWindow& wnd) {
  NoGradGuard ng;
  return crop_spatial(img, wnd.y0, wnd.x0, wnd.size, wnd.size);
}

Trainer::Trainer(Models& models, const TrainConfig& cfg)
    : models_(models), cfg_(cfg), rng_(cfg.seed * 48271u + 11u) {
  tex_params_ = models_.texture_group();
  net_params_ = models_.net_group();
  opt_tex_.lr = cfg.lr_texture;
  opt_nets_.lr = cfg.lr_nets;
  opt_tex_.beta1 = opt_nets_.beta1 = cfg.beta1;
  opt_tex_.beta2 = opt_nets_.beta2 = cfg.beta2;
  opt_tex_.eps = opt_nets_.eps = cfg.adam_eps;
  opt_tex_.init(tex_params_);
  opt_nets_.init(net_params_);
}

LossBreakdown Trainer::step(const Dataset& ds, LossMode mode) {
  const int n = ds.size();
  if (n < 2) throw UsageError("training needs at least 2 frames");
  const int stages = models_.gen.config().stages();
  const int crop = cfg_.crop ? snapped_crop_size(ds.h, stages, cfg_.crop_frac) : ds.h;

  Tensor total;
  LossBreakdown mean;
  for (int bi = 0; bi < cfg_.batch; ++bi) {
    int d = cfg_.d_min == cfg_.d_max
                ? cfg_.d_min
                : std::uniform_int_distribution<int>(cfg_.d_min, cfg_.d_max)(rng_);
    int tmax = (mode == LossMode::kWarp) ? n - 1 - d : n - 1;
    int t = std::uniform_int_distribution<int>(0, tmax)(rng_);

    CropWindow wnd{0, 0, ds.h};
    if (crop < ds.h) {
      wnd.size = crop;
      wnd.y0 = std::uniform_int_distribution<int>(0, ds.h - crop)(rng_);
      wnd.x0 = std::uniform_int_distribution<int>(0, ds.w - crop)(rng_);
    }
    const bool cropped = wnd.size < ds.h;

    const auto& rec_t = ds.frames[static_cast<size_t>(t)];
    FrameParams frame_t = cropped ? crop_frame(rec_t.params, wnd) : rec_t.params;
    Tensor gt_t = cropped ? crop_image(rec_t.image, wnd) : rec_t.image;

    Tensor prev_sampled;
    if (models_.gen.config().two_frame_input) {
      const auto& rec_p = ds.frames[static_cast<size_t>(std::max(0, t - 1))];
      FrameParams frame_p = cropped ? crop_frame(rec_p.params, wnd) : rec_p.params;
      prev_sampled = sh_view_modulate(sample_multiscale_texture(models_.tex, frame_p.uv_map),
                                      view_direction(frame_p));
    }

    auto gen_out = models_.gen.forward(models_.tex, frame_t,
                                       prev_sampled.defined() ? &prev_sampled : nullptr);
    Tensor tex_rgb = slice_channels(gen_out.sampled, 0, 3);

    LossBreakdown lb;
    if (mode == LossMode::kWarp) {
      const auto& rec_d = ds.frames[static_cast<size_t>(t + d)];
      FrameParams frame_d = cropped ? crop_frame(rec_d.params, wnd) : rec_d.params;
      Tensor gt_d = cropped ? crop_image(rec_d.image, wnd) : rec_d.image;
      auto winput = make_warp_input(gen_out.cache, frame_d, models_.warp.wiring);
      Tensor pred_d = models_.warp.wiring.exwarp
                          ? explicit_warp_baseline(winput, models_.tex, frame_d, models_.warp)
                          : warp_forward(winput, models_.warp);
      lb = compute_losses<float>(gen_out.image, &pred_d, tex_rgb, gt_t, &gt_d, frame_t.mask,
                                 &models_.perc, cfg_.weights, LossMode::kWarp);
    } else {
      lb = compute_losses<float>(gen_out.image, nullptr, tex_rgb, gt_t, nullptr, frame_t.mask,
                                 &models_.perc, cfg_.weights, LossMode::kBaseline);
    }

    const struct {
      const char* name;
      float v;
    } terms[] = {{"L_tex", lb.l_tex},
                 {"L_img(t)", lb.l_img_t},
                 {"L_img(t+d)", lb.l_img_d},
                 {"L_p", lb.l_p},
                 {"total", lb.total.item()}};
    for (const auto& term : terms)
      if (!std::isfinite(term.v))
        throw UsageError(std::string("non-finite loss term ") + term.name + " at step " +
                         std::to_string(steps_));

    mean.l_tex += lb.l_tex / static_cast<float>(cfg_.batch);
    mean.l_img_t += lb.l_img_t / static_cast<float>(cfg_.batch);
    mean.l_img_d += lb.l_img_d / static_cast<float>(cfg_.batch);
    mean.l_p += lb.l_p / static_cast<float>(cfg_.batch);
    Tensor scaled = mul_scalar(lb.total, 1.0f / static_cast<float>(cfg_.batch));
    total = total.defined() ? add(total, scaled) : scaled;
  }

  total.backward();
  for (auto& p : tex_params_) p.grad();  // size untouched grads so Adam sees zeros
  for (auto& p : net_params_) p.grad();
  adam_step(tex_params_, opt_tex_);
  adam_step(net_params_, opt_nets_);
  models_.zero_grads();
  ++steps_;
  mean.total = Tensor::scalar(total.item());
  return mean;
}

std::vector<EpochStats> Trainer::run(const Dataset& ds) {
  std::ofstream csv;
  if (!cfg_.log_csv.empty()) {
    csv.open(cfg_.log_csv);
    csv << "epoch,mode,l_tex,l_img_t,l_img_d,l_p,total,wall_ms\n";
  }
  const int steps_per_epoch = (ds.size() + cfg_.batch - 1) / cfg_.batch;
  const int baseline_epochs =
      cfg_.train_warp ? static_cast<int>(std::ceil(cfg_.curriculum_frac * cfg_.epochs))
                      : cfg_.epochs;
  std::vector<EpochStats> history;
  for (int e = 0; e < cfg_.epochs; ++e) {
    LossMode mode = (cfg_.train_warp && e >= baseline_epochs) ? LossMode::kWarp
                                                              : LossMode::kBaseline;
    auto t0 = std::chrono::steady_clock::now();
    EpochStats st;
    st.epoch = e;
    st.mode = mode;
    for (int s = 0; s < steps_per_epoch; ++s) {
      auto lb = step(ds, mode);
      st.l_tex += lb.l_tex / steps_per_epoch;
      st.l_img_t += lb.l_img_t / steps_per_epoch;
      st.l_img_d += lb.l_img_d / steps_per_epoch;
      st.l_p += lb.l_p / steps_per_epoch;
      st.total += lb.total.item() / steps_per_epoch;
    }
    st.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                     .count();
    if (csv.is_open()) {
      csv << st.epoch << ',' << (mode == LossMode::kWarp ? "warp" : "base") << ',' << st.l_tex
          << ',' << st.l_img_t << ',' << st.l_img_d << ',' << st.l_p << ',' << st.total << ','
          << st.wall_ms << '\n';
      csv.flush();
    }
    history.push_back(st);
  }
  return history;
}

}  // namespace ncr
