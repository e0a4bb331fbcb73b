#include "ncr/renderer.hpp"

#include <cmath>

#include "ncr/ops.hpp"

namespace ncr {

NeuralTexture::NeuralTexture(int d, int s, std::mt19937& rng) : channels(d), size(s) {
  if (d < 12) throw ConfigError("neural texture needs >= 12 channels for SH modulation, got " +
                                std::to_string(d));
  if (s % 8 != 0) throw ConfigError("texture size must be divisible by 8");
  for (int l = 0; l < 4; ++l) {
    int e = s >> l;
    levels.push_back(Tensor::randn({d, e, e}, rng, 0.05f).set_requires_grad(true));
  }
}

void NeuralTexture::collect_params(std::vector<NamedParam<float>>& out) {
  for (size_t l = 0; l < levels.size(); ++l)
    out.push_back({"tex/level" + std::to_string(l), levels[l]});
}

Tensor sample_multiscale_texture(const NeuralTexture& tex, const Tensor& uv) {
  Tensor f;
  for (const auto& level : tex.levels) {
    Tensor s = grid_sample_bilinear(level, uv);
    f = f.defined() ? add(f, s) : s;
  }
  return f;
}

Tensor sh_view_modulate(const Tensor& f, const Vec3& view_dir) {
  if (f.dim(0) < 12)
    throw ConfigError("sh_view_modulate needs >= 12 channels, got " + std::to_string(f.dim(0)));
  auto sh = sh_basis9(static_cast<float>(view_dir.x), static_cast<float>(view_dir.y),
                      static_cast<float>(view_dir.z));
  return scale_channels(f, std::vector<float>(sh.begin(), sh.end()), 3);
}

Vec3 view_direction(const FrameParams& frame) {
  Vec3 head_center{frame.theta[3], frame.theta[4], frame.theta[5]};
  return normalized(head_center - frame.cam);
}

namespace {

Tensor he_conv(int cout, int cin, int k, std::mt19937& rng) {
  float stddev = std::sqrt(2.0f / (static_cast<float>(cin) * k * k));
  return Tensor::randn({cout, cin, k, k}, rng, stddev).set_requires_grad(true);
}

// Skip connections always match the upsampled extent in a correctly
// configured net; resizing guards odd intermediate extents.
Tensor skip_to(const Tensor& like, const Tensor& skip) {
  if (skip.dim(1) == like.dim(1) && skip.dim(2) == like.dim(2)) return skip;
  return resize_bilinear(skip, like.dim(1), like.dim(2));
}

}  // namespace

Generator::Generator(const GeneratorConfig& cfg, std::mt19937& rng) : cfg_(cfg) {
  if (cfg.depth % 2 != 0 || cfg.depth < 4) throw ConfigError("generator depth must be even, >= 4");
  if (cfg.base < 12) throw ConfigError("generator base channels must be >= 12 for SH skips");
  const int n = cfg.stages();
  // encoder doubles channels up to 8*base; decoder tapers to C3/C4/C5 =
  // 4b/2b/b on the last three stages.
  enc_out_.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) enc_out_[static_cast<size_t>(i)] = cfg.base * std::min(8, 1 << i);
  dec_out_.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    // stage i consumes features at H/2^(n-i); the last three stages emit
    // 4b, 2b, b.
    int remaining = n - i;
    if (remaining == 3) dec_out_[static_cast<size_t>(i)] = 4 * cfg.base;
    else if (remaining == 2) dec_out_[static_cast<size_t>(i)] = 2 * cfg.base;
    else if (remaining == 1) dec_out_[static_cast<size_t>(i)] = cfg.base;
    else dec_out_[static_cast<size_t>(i)] = enc_out_[static_cast<size_t>(n - 2 - i)];
  }

  int cin = input_channels();
  for (int i = 0; i < n; ++i) {
    enc_w_.push_back(he_conv(enc_out_[static_cast<size_t>(i)], cin, 3, rng));
    enc_b_.push_back(Tensor::zeros({enc_out_[static_cast<size_t>(i)]}).set_requires_grad(true));
    cin = enc_out_[static_cast<size_t>(i)];
  }
  for (int i = 0; i < n; ++i) {
    int skip = (i + 1 < n) ? enc_out_[static_cast<size_t>(n - 2 - i)] : input_channels();
    int in_ch = cin + skip;
    if (cfg.use_upconv) {
      dec_w_.push_back(he_conv(dec_out_[static_cast<size_t>(i)], in_ch, 3, rng));
    } else {
      // transpose-conv weight layout is [cin][cout][k][k]
      float stddev = std::sqrt(2.0f / (static_cast<float>(in_ch) * 9));
      dec_w_.push_back(
          Tensor::randn({in_ch, dec_out_[static_cast<size_t>(i)], 3, 3}, rng, stddev).set_requires_grad(true));
    }
    dec_b_.push_back(Tensor::zeros({dec_out_[static_cast<size_t>(i)]}).set_requires_grad(true));
    cin = dec_out_[static_cast<size_t>(i)];
  }
  out_w_ = he_conv(3, cfg.base, 1, rng);
  out_b_ = Tensor::zeros({3}).set_requires_grad(true);
}

GenOutput Generator::forward(const NeuralTexture& tex, const FrameParams& frame,
                             const Tensor* prev_sampled) const {
  const int n = cfg_.stages();
  const int h = frame.uv_map.dim(1), w = frame.uv_map.dim(2);
  if (h % (1 << n) != 0 || w % (1 << n) != 0)
    throw ConfigError("spatial extent " + std::to_string(h) + "x" + std::to_string(w) +
                      " is not divisible by 2^" + std::to_string(n));

  Tensor f = sample_multiscale_texture(tex, frame.uv_map);
  Tensor fmod = sh_view_modulate(f, view_direction(frame));
  Tensor x = fmod;
  if (cfg_.two_frame_input) {
    Tensor prev = prev_sampled && prev_sampled->defined() ? *prev_sampled : fmod;
    x = concat_channels<float>({fmod, prev});
  }

  std::vector<Tensor> enc_feats;  // post-activation outputs per stage
  Tensor cur = x;
  for (int i = 0; i < n; ++i) {
    cur = leaky_relu(conv2d(cur, enc_w_[static_cast<size_t>(i)], enc_b_[static_cast<size_t>(i)], 2, 1));
    enc_feats.push_back(cur);
  }
  if (cfg_.use_lpf) cur = gaussian_lpf(cur, 5, 1.0f);

  Cache cache;
  for (int i = 0; i < n; ++i) {
    Tensor skip = (i + 1 < n) ? enc_feats[static_cast<size_t>(n - 2 - i)] : x;
    if (cfg_.use_upconv) {
      Tensor up = resize_bilinear(cur, 2 * cur.dim(1), 2 * cur.dim(2));
      cur = conv2d(concat_channels<float>({up, skip_to(up, skip)}), dec_w_[static_cast<size_t>(i)],
                   dec_b_[static_cast<size_t>(i)], 1, 1);
    } else {
      Tensor merged = concat_channels<float>({cur, resize_bilinear(skip, cur.dim(1), cur.dim(2))});
      cur = conv_transpose2d(merged, dec_w_[static_cast<size_t>(i)], dec_b_[static_cast<size_t>(i)], 2, 1, 1);
    }
    cur = leaky_relu(cur);
    int remaining = n - i;
    if (remaining == 3) cache.c3 = cur;
    else if (remaining == 2) cache.c4 = cur;
    else if (remaining == 1) cache.c5 = cur;
  }
  Tensor image = tanh01(conv2d(cur, out_w_, out_b_, 1, 0));

  cache.frame = frame.t;
  for (int i = 0; i < 6; ++i) cache.theta[static_cast<size_t>(i)] = static_cast<float>(frame.theta[static_cast<size_t>(i)]);
  cache.cam = {static_cast<float>(frame.cam.x), static_cast<float>(frame.cam.y),
               static_cast<float>(frame.cam.z)};
  cache.expr.assign(frame.expr.begin(), frame.expr.end());
  cache.h_obj = frame.h_obj;
  cache.uv_map = frame.uv_map;
  return {image, cache, fmod};
}

void Generator::collect_params(std::vector<NamedParam<float>>& out) {
  for (size_t i = 0; i < enc_w_.size(); ++i) {
    out.push_back({"gen/enc" + std::to_string(i) + "/w", enc_w_[i]});
    out.push_back({"gen/enc" + std::to_string(i) + "/b", enc_b_[i]});
  }
  for (size_t i = 0; i < dec_w_.size(); ++i) {
    out.push_back({"gen/dec" + std::to_string(i) + "/w", dec_w_[i]});
    out.push_back({"gen/dec" + std::to_string(i) + "/b", dec_b_[i]});
  }
  out.push_back({"gen/out/w", out_w_});
  out.push_back({"gen/out/b", out_b_});
}

std::vector<LayerCost> Generator::flop_plan(int h, int w) const {
  const int n = cfg_.stages();
  std::vector<LayerCost> plan;
  int cin = input_channels();
  int ch = h, cw = w;
  for (int i = 0; i < n; ++i) {
    ch /= 2;
    cw /= 2;
    plan.push_back({"gen/enc" + std::to_string(i),
                    conv_macs(enc_out_[static_cast<size_t>(i)], cin, 3, 3, ch, cw)});
    cin = enc_out_[static_cast<size_t>(i)];
  }
  for (int i = 0; i < n; ++i) {
    ch *= 2;
    cw *= 2;
    int skip = (i + 1 < n) ? enc_out_[static_cast<size_t>(n - 2 - i)] : input_channels();
    plan.push_back({"gen/dec" + std::to_string(i),
                    conv_macs(dec_out_[static_cast<size_t>(i)], cin + skip, 3, 3, ch, cw)});
    cin = dec_out_[static_cast<size_t>(i)];
  }
  plan.push_back({"gen/out", conv_macs(3, cfg_.base, 1, 1, h, w)});
  return plan;
}

}  // namespace ncr
