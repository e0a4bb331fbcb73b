#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ncr/ops.hpp"
#include "ncr/tensor.hpp"

namespace ncr {

// Weights follow the paper's training objective: texture, photometric and
// perceptual terms at 1 / 1 / 0.1, and in warp mode the base-frame
// photometric term is down-weighted by 0.1 while the future frame carries
// full weight.
template <typename T>
struct LossWeightsT {
  T lambda_tex = T(1);
  T lambda_img = T(1);
  T lambda_p = T(0.1);
  T warp_base_img = T(0.1);
};
using LossWeights = LossWeightsT<float>;

enum class LossMode { kBaseline, kWarp };

// Perceptual distance proxy: a fixed, seeded, never-trained 3-layer strided
// conv feature extractor. L_p is the L1 gap between feature maps.
template <typename T>
struct PerceptualNetT {
  std::vector<TensorT<T>> w, b;

  PerceptualNetT() = default;
  explicit PerceptualNetT(uint32_t seed) {
    std::mt19937 rng(seed * 2654435761u + 97u);
    const int chans[4] = {3, 8, 16, 16};
    for (int l = 0; l < 3; ++l) {
      T stddev = std::sqrt(T(2) / (static_cast<T>(chans[l]) * 9));
      w.push_back(TensorT<T>::randn({chans[l + 1], chans[l], 3, 3}, rng, stddev));
      b.push_back(TensorT<T>::zeros({chans[l + 1]}));
    }
  }

  TensorT<T> features(const TensorT<T>& img) const {
    TensorT<T> x = img;
    for (size_t l = 0; l < w.size(); ++l) x = leaky_relu(conv2d(x, w[l], b[l], 2, 1));
    return x;
  }

  TensorT<T> distance(const TensorT<T>& a, const TensorT<T>& b_img) const {
    return l1(features(a), features(b_img));
  }
};
using PerceptualNet = PerceptualNetT<float>;

template <typename T>
struct LossBreakdownT {
  TensorT<T> total;
  T l_tex = 0, l_img_t = 0, l_img_d = 0, l_p = 0;
};
using LossBreakdown = LossBreakdownT<float>;

// Baseline mode scores frame t only; warp mode adds the future frame and
// re-weights the base photometric term.
template <typename T>
LossBreakdownT<T> compute_losses(const TensorT<T>& pred_t, const TensorT<T>* pred_td,
                                 const TensorT<T>& sampled_tex_rgb, const TensorT<T>& gt_t,
                                 const TensorT<T>* gt_td, const TensorT<T>& mask_t,
                                 const PerceptualNetT<T>* perc, const LossWeightsT<T>& wts,
                                 LossMode mode) {
  if (pred_t.shape() != gt_t.shape())
    throw UsageError("compute_losses: prediction and ground truth shapes differ");
  LossBreakdownT<T> out;
  auto ltex = masked_l1(sampled_tex_rgb, gt_t, mask_t);
  out.l_tex = ltex.item();
  auto limg_t = l1(pred_t, gt_t);
  out.l_img_t = limg_t.item();

  if (mode == LossMode::kBaseline) {
    out.total = add(mul_scalar(ltex, wts.lambda_tex), mul_scalar(limg_t, wts.lambda_img));
    if (wts.lambda_p != T(0)) {
      if (!perc) throw UsageError("compute_losses: lambda_p > 0 but no perceptual net");
      auto lp = perc->distance(pred_t, gt_t);
      out.l_p = lp.item();
      out.total = add(out.total, mul_scalar(lp, wts.lambda_p));
    }
    return out;
  }

  if (!pred_td || !gt_td) throw UsageError("compute_losses: warp mode needs the future frame");
  if (pred_td->shape() != gt_td->shape())
    throw UsageError("compute_losses: future prediction and ground truth shapes differ");
  auto limg_d = l1(*pred_td, *gt_td);
  out.l_img_d = limg_d.item();
  out.total = add(add(mul_scalar(ltex, wts.lambda_tex),
                      mul_scalar(limg_t, wts.warp_base_img * wts.lambda_img)),
                  mul_scalar(limg_d, wts.lambda_img));
  if (wts.lambda_p != T(0)) {
    if (!perc) throw UsageError("compute_losses: lambda_p > 0 but no perceptual net");
    auto lp = perc->distance(*pred_td, *gt_td);
    out.l_p = lp.item();
    out.total = add(out.total, mul_scalar(lp, wts.lambda_p));
  }
  return out;
}

}  // namespace ncr
