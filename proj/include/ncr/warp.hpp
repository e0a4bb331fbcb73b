#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "ncr/adam.hpp"
#include "ncr/flops.hpp"
#include "ncr/ops.hpp"
#include "ncr/renderer.hpp"
#include "ncr/tensor.hpp"

// Implicit warp head: a single-layer pose MLP plus two up-convolution stages
// that turn cached decoder features and parameter deltas into the next
// frame's image.

namespace ncr {

// Input gates, one per ablation table row.
struct WarpWiring {
  bool concat_uv = true;  // include resized delta-UV channels
  bool use_theta = true;  // pose + camera (and their deltas) in the conditioning vector
  bool use_mlp = true;    // pass the conditioning vector through the embed layer
  bool sh_pose = true;    // append the new frame's SH pose code
  bool sh_skips = true;   // modulate C4/C5 by delta-h
  bool exwarp = false;    // concat freshly sampled texture features (explicit baseline)
  bool exp = true;        // expression coefficients (and deltas)
  bool use_c4 = true;     // consume the C4 cache layer (cache-layer ablation)
  bool use_c5 = true;     // consume the C5 cache layer
};

template <typename T>
struct WarpInputT {
  TensorT<T> c3, c4, c5;        // cached decoder maps at H/4, H/2, H
  TensorT<T> delta_uv;          // [2][H][W], new UV minus cached UV
  std::vector<T> cond;          // conditioning vector, layout per wiring
  std::array<T, 9> delta_h{};   // SH pose code delta
  TensorT<T> exwarp_feat;       // sampled texture at the new UV, resized to H/4
  int distance = 1;             // frames between cache and target
};

template <typename T>
struct WarpNetT {
  WarpWiring wiring;
  int embed_dim = 32;
  int c1 = 24, c2 = 12;
  int expr_dims = 4;
  int tex_channels = 16;
  int c3_in = 128, c4_in = 64, c5_in = 32;

  TensorT<T> mlp_w, mlp_b;
  TensorT<T> w1_w, w1_b, w2_w, w2_b;
  TensorT<T> out_w, out_b;

  int cond_dim() const {
    return (wiring.use_theta ? 18 : 0) + (wiring.exp ? 2 * expr_dims : 0) +
           (wiring.sh_pose ? 9 : 0);
  }
  int cond_channels() const {
    int d = cond_dim();
    return (d > 0 && wiring.use_mlp) ? embed_dim : d;
  }
  int w1_in() const {
    return c3_in + (wiring.concat_uv ? 2 : 0) + cond_channels() +
           (wiring.exwarp ? tex_channels : 0);
  }
  int w2_in() const { return c1 + (wiring.use_c4 ? c4_in : 0); }
  int out_in() const { return c2 + (wiring.use_c5 ? c5_in : 0); }

  WarpNetT() = default;
  WarpNetT(const WarpWiring& w, int c3ch, int c4ch, int c5ch, int exprd, int texch,
           std::mt19937& rng, int m = 32, int ch1 = 24, int ch2 = 12)
      : wiring(w), embed_dim(m), c1(ch1), c2(ch2), expr_dims(exprd), tex_channels(texch),
        c3_in(c3ch), c4_in(c4ch), c5_in(c5ch) {
    auto he = [&rng](int cout, int cin, int k) {
      T stddev = std::sqrt(T(2) / (static_cast<T>(cin) * k * k));
      return TensorT<T>::randn({cout, cin, k, k}, rng, stddev).set_requires_grad(true);
    };
    if (cond_dim() > 0 && wiring.use_mlp) {
      T stddev = std::sqrt(T(2) / static_cast<T>(cond_dim()));
      mlp_w = TensorT<T>::randn({embed_dim, cond_dim()}, rng, stddev).set_requires_grad(true);
      mlp_b = TensorT<T>::zeros({embed_dim}).set_requires_grad(true);
    }
    w1_w = he(c1, w1_in(), 3);
    w1_b = TensorT<T>::zeros({c1}).set_requires_grad(true);
    w2_w = he(c2, w2_in(), 3);
    w2_b = TensorT<T>::zeros({c2}).set_requires_grad(true);
    out_w = he(3, out_in(), 1);
    out_b = TensorT<T>::zeros({3}).set_requires_grad(true);
  }

  void collect_params(std::vector<NamedParam<T>>& out) {
    if (mlp_w.defined()) {
      out.push_back({"warp/mlp/w", mlp_w});
      out.push_back({"warp/mlp/b", mlp_b});
    }
    out.push_back({"warp/w1/w", w1_w});
    out.push_back({"warp/w1/b", w1_b});
    out.push_back({"warp/w2/w", w2_w});
    out.push_back({"warp/w2/b", w2_b});
    out.push_back({"warp/out/w", out_w});
    out.push_back({"warp/out/b", out_b});
  }

  std::vector<LayerCost> flop_plan(int h, int w) const {
    std::vector<LayerCost> plan;
    if (cond_dim() > 0 && wiring.use_mlp)
      plan.push_back({"warp/mlp", static_cast<long long>(embed_dim) * cond_dim()});
    plan.push_back({"warp/w1", conv_macs(c1, w1_in(), 3, 3, h / 2, w / 2)});
    plan.push_back({"warp/w2", conv_macs(c2, w2_in(), 3, 3, h, w)});
    plan.push_back({"warp/out", conv_macs(3, out_in(), 1, 1, h, w)});
    return plan;
  }
};

// Single-layer pose embedding (Eq. 2 style): leaky(A * cond + b).
template <typename T>
TensorT<T> pose_embed(const WarpNetT<T>& net, const std::vector<T>& cond) {
  if (static_cast<int>(cond.size()) != net.cond_dim())
    throw ConfigError("pose_embed: conditioning vector has extent " +
                      std::to_string(cond.size()) + ", net expects " +
                      std::to_string(net.cond_dim()));
  auto x = TensorT<T>::from({static_cast<int>(cond.size())}, cond);
  return leaky_relu(affine(net.mlp_w, x, net.mlp_b));
}

// Two up-convolution stages over the cache.
// Stage 1 at H/4: upconv(concat(C3, resize(dUV), broadcast(embed)[, exwarp])),
// then concat C4 (x) dh. Stage 2: upconv to H, concat C5 (x) dh, 1x1 conv,
// squash to [0,1]. Modulation multiplies channels 4..12 by the 9 delta-h values.
template <typename T>
TensorT<T> warp_forward(const WarpInputT<T>& in, const WarpNetT<T>& net) {
  if (in.c3.dim(0) != net.c3_in || in.c4.dim(0) != net.c4_in || in.c5.dim(0) != net.c5_in)
    throw ConfigError("warp_forward: cache channels (" + std::to_string(in.c3.dim(0)) + "," +
                      std::to_string(in.c4.dim(0)) + "," + std::to_string(in.c5.dim(0)) +
                      ") do not match net (" + std::to_string(net.c3_in) + "," +
                      std::to_string(net.c4_in) + "," + std::to_string(net.c5_in) + ")");
  const int h4 = in.c3.dim(1), w4 = in.c3.dim(2);
  if (in.c4.dim(1) != 2 * h4 || in.c5.dim(1) != 4 * h4)
    throw ConfigError("warp_forward: cache resolutions must be in 1:2:4 ratio");

  std::vector<TensorT<T>> parts = {in.c3};
  if (net.wiring.concat_uv) parts.push_back(resize_bilinear(in.delta_uv, h4, w4));
  if (net.cond_dim() > 0) {
    if (net.wiring.use_mlp)
      parts.push_back(broadcast_vector(pose_embed(net, in.cond), h4, w4));
    else
      parts.push_back(broadcast_vector(TensorT<T>::from({net.cond_dim()}, in.cond), h4, w4));
  }
  if (net.wiring.exwarp) {
    if (!in.exwarp_feat.defined())
      throw ConfigError("warp_forward: exwarp wiring needs sampled texture features");
    parts.push_back(in.exwarp_feat);
  }

  std::vector<T> dh(in.delta_h.begin(), in.delta_h.end());
  auto modulate = [&](const TensorT<T>& c) {
    return net.wiring.sh_skips ? scale_channels(c, dh, 3) : c;
  };

  auto f1 = leaky_relu(upconv2x(concat_channels<T>(parts), net.w1_w, net.w1_b));
  auto f1c = net.wiring.use_c4 ? concat_channels<T>({f1, modulate(in.c4)}) : f1;
  auto f2 = leaky_relu(upconv2x(f1c, net.w2_w, net.w2_b));
  auto f2c = net.wiring.use_c5 ? concat_channels<T>({f2, modulate(in.c5)}) : f2;
  return tanh01(conv2d(f2c, net.out_w, net.out_b, 1, 0));
}

using WarpNet = WarpNetT<float>;
using WarpInput = WarpInputT<float>;

// Assembles deltas against exactly the cached frame's values; layout of the
// conditioning vector is (p, dp, theta, dtheta, e, de, h_obj) gated by wiring.
WarpInput make_warp_input(const Cache& cache, const FrameParams& frame, const WarpWiring& wiring);

// Explicit-warp baseline: resamples the neural texture at the new frame's UV
// map and feeds it to a net built with exwarp wiring.
Tensor explicit_warp_baseline(WarpInput input, const NeuralTexture& tex,
                              const FrameParams& frame, const WarpNet& net);

}  // namespace ncr
