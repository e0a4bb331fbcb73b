#pragma once

#include <string>

#include "ncr/tensor.hpp"

namespace ncr {

// l1 is mean absolute error; psnr in dB against peak 1.0, capped at 99 for
// zero error; ssim uses 11x11 Gaussian windows (sigma 1.5), K1=0.01, K2=0.03,
// averaged over channels and valid window positions.
struct MetricsResult {
  double l1 = 0;
  double psnr = 0;
  double ssim = 0;
};

MetricsResult compute_metrics(const Tensor& pred, const Tensor& gt);

struct MetricsAccumulator {
  double l1 = 0, psnr = 0, ssim = 0;
  int count = 0;
  void add(const MetricsResult& m) {
    l1 += m.l1;
    psnr += m.psnr;
    ssim += m.ssim;
    ++count;
  }
  MetricsResult mean() const {
    if (count == 0) return {};
    return {l1 / count, psnr / count, ssim / count};
  }
};

std::string metrics_json(const MetricsResult& m);

// 8-bit image dumps; both encoders are byte-stable for identical inputs.
void write_ppm(const Tensor& image, const std::string& path);
void write_png(const Tensor& image, const std::string& path);

}  // namespace ncr
