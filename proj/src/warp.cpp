#include "ncr/warp.hpp"

namespace ncr {

WarpInput make_warp_input(const Cache& cache, const FrameParams& frame,
                          const WarpWiring& wiring) {
  if (!cache.c3.defined()) throw UsageError("make_warp_input: cache is empty");
  WarpInput in;
  in.c3 = cache.c3;
  in.c4 = cache.c4;
  in.c5 = cache.c5;
  in.distance = frame.t - cache.frame;
  in.delta_uv = sub(frame.uv_map, cache.uv_map);

  std::array<float, 3> p{static_cast<float>(frame.cam.x), static_cast<float>(frame.cam.y),
                         static_cast<float>(frame.cam.z)};
  if (wiring.use_theta) {
    for (int i = 0; i < 3; ++i) in.cond.push_back(p[static_cast<size_t>(i)]);
    in.cond.push_back(p[0] - cache.cam[0]);
    in.cond.push_back(p[1] - cache.cam[1]);
    in.cond.push_back(p[2] - cache.cam[2]);
    for (int i = 0; i < 6; ++i) in.cond.push_back(static_cast<float>(frame.theta[static_cast<size_t>(i)]));
    for (int i = 0; i < 6; ++i)
      in.cond.push_back(static_cast<float>(frame.theta[static_cast<size_t>(i)]) - cache.theta[static_cast<size_t>(i)]);
  }
  if (wiring.exp) {
    for (size_t i = 0; i < frame.expr.size(); ++i) in.cond.push_back(static_cast<float>(frame.expr[i]));
    for (size_t i = 0; i < frame.expr.size(); ++i)
      in.cond.push_back(static_cast<float>(frame.expr[i]) - cache.expr[i]);
  }
  if (wiring.sh_pose)
    for (int i = 0; i < 9; ++i) in.cond.push_back(frame.h_obj[static_cast<size_t>(i)]);
  for (int i = 0; i < 9; ++i)
    in.delta_h[static_cast<size_t>(i)] = frame.h_obj[static_cast<size_t>(i)] - cache.h_obj[static_cast<size_t>(i)];
  return in;
}

Tensor explicit_warp_baseline(WarpInput input, const NeuralTexture& tex,
                              const FrameParams& frame, const WarpNet& net) {
  if (!net.wiring.exwarp)
    throw ConfigError("explicit_warp_baseline needs a net built with exwarp wiring");
  const int h4 = input.c3.dim(1), w4 = input.c3.dim(2);
  Tensor sampled = sample_multiscale_texture(tex, frame.uv_map);
  input.exwarp_feat = resize_bilinear(sampled, h4, w4);
  return warp_forward(input, net);
}

}  // namespace ncr
