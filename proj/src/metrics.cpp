#include "ncr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <zlib.h>

namespace ncr {

namespace {

std::vector<double> ssim_window() {
  std::vector<double> w(11 * 11);
  const double sigma = 1.5;
  double sum = 0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      double dy = y - 5, dx = x - 5;
      w[static_cast<size_t>(y) * 11 + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      sum += w[static_cast<size_t>(y) * 11 + x];
    }
  for (auto& v : w) v /= sum;
  return w;
}

}  // namespace

MetricsResult compute_metrics(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape())
    throw UsageError("compute_metrics: image shapes differ");
  if (pred.rank() != 3) throw UsageError("compute_metrics expects [C][H][W] images");
  const int c = pred.dim(0), h = pred.dim(1), w = pred.dim(2);
  const size_t plane = static_cast<size_t>(h) * w;

  MetricsResult r;
  double abs_sum = 0, sq_sum = 0;
  for (int i = 0; i < pred.numel(); ++i) {
    double d = static_cast<double>(pred.data()[i]) - gt.data()[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  r.l1 = abs_sum / pred.numel();
  double mse = sq_sum / pred.numel();
  r.psnr = mse < 1e-12 ? 99.0 : std::min(99.0, 10.0 * std::log10(1.0 / mse));

  if (h < 11 || w < 11) {
    r.ssim = 1.0 - r.l1;  // degenerate extents: no valid 11x11 window
    return r;
  }
  static const std::vector<double> win = ssim_window();
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double ssim_sum = 0;
  long long ssim_count = 0;
#pragma omp parallel for reduction(+ : ssim_sum, ssim_count) schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const float* a = pred.data() + static_cast<size_t>(ch) * plane;
    const float* b = gt.data() + static_cast<size_t>(ch) * plane;
    for (int y = 0; y + 11 <= h; ++y)
      for (int x = 0; x + 11 <= w; ++x) {
        double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
        for (int wy = 0; wy < 11; ++wy)
          for (int wx = 0; wx < 11; ++wx) {
            double wt = win[static_cast<size_t>(wy) * 11 + wx];
            double pa = a[(y + wy) * w + (x + wx)];
            double pb = b[(y + wy) * w + (x + wx)];
            ma += wt * pa;
            mb += wt * pb;
            va += wt * pa * pa;
            vb += wt * pb * pb;
            cov += wt * pa * pb;
          }
        va -= ma * ma;
        vb -= mb * mb;
        cov -= ma * mb;
        double s = ((2 * ma * mb + c1) * (2 * cov + c2)) /
                   ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ssim_sum += s;
        ++ssim_count;
      }
  }
  r.ssim = ssim_sum / static_cast<double>(ssim_count);
  return r;
}

std::string metrics_json(const MetricsResult& m) {
  std::ostringstream os;
  os << "{\"l1\":" << m.l1 << ",\"psnr\":" << m.psnr << ",\"ssim\":" << m.ssim << "}";
  return os.str();
}

namespace {

std::vector<uint8_t> to_rgb8(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw UsageError("image dump expects a [3][H][W] tensor");
  const int h = image.dim(1), w = image.dim(2);
  const size_t plane = static_cast<size_t>(h) * w;
  std::vector<uint8_t> rgb(3 * plane);
  for (size_t i = 0; i < plane; ++i)
    for (int ch = 0; ch < 3; ++ch) {
      float v = std::clamp(image.data()[static_cast<size_t>(ch) * plane + i], 0.0f, 1.0f);
      rgb[3 * i + static_cast<size_t>(ch)] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
  return rgb;
}

void put_be32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(static_cast<uint8_t>(x >> 24));
  v.push_back(static_cast<uint8_t>(x >> 16));
  v.push_back(static_cast<uint8_t>(x >> 8));
  v.push_back(static_cast<uint8_t>(x));
}

void put_chunk(std::ofstream& os, const char type[4], const std::vector<uint8_t>& payload) {
  std::vector<uint8_t> head;
  put_be32(head, static_cast<uint32_t>(payload.size()));
  os.write(reinterpret_cast<const char*>(head.data()), 4);
  std::vector<uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  uint32_t crc = static_cast<uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
  os.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  std::vector<uint8_t> tail;
  put_be32(tail, crc);
  os.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void write_ppm(const Tensor& image, const std::string& path) {
  auto rgb = to_rgb8(image);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot open " + path + " for writing");
  os << "P6\n" << image.dim(2) << ' ' << image.dim(1) << "\n255\n";
  os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

void write_png(const Tensor& image, const std::string& path) {
  auto rgb = to_rgb8(image);
  const int h = image.dim(1), w = image.dim(2);
  // filter byte 0 per scanline
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(h) * (1 + 3 * static_cast<size_t>(w)));
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), rgb.begin() + static_cast<long>(3) * y * w,
               rgb.begin() + static_cast<long>(3) * (y + 1) * w);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw UsageError("png: deflate failed");
  compressed.resize(bound);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot open " + path + " for writing");
  const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  os.write(reinterpret_cast<const char*>(sig), 8);
  std::vector<uint8_t> ihdr;
  put_be32(ihdr, static_cast<uint32_t>(w));
  put_be32(ihdr, static_cast<uint32_t>(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);   // deflate
  ihdr.push_back(0);   // filter method
  ihdr.push_back(0);   // no interlace
  put_chunk(os, "IHDR", ihdr);
  put_chunk(os, "IDAT", compressed);
  put_chunk(os, "IEND", {});
}

}  // namespace ncr
