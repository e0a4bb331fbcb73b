#include "ncr/protocols.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "ncr/ops.hpp"
#include "ncr/warp.hpp"

namespace ncr {

namespace {

using Clock = std::chrono::steady_clock;

double wall_ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

Tensor warp_one(const Models& models, const Cache& cache, const FrameParams& frame) {
  auto input = make_warp_input(cache, frame, models.warp.wiring);
  if (models.warp.wiring.exwarp)
    return explicit_warp_baseline(input, models.tex, frame, models.warp);
  return warp_forward(input, models.warp);
}

}  // namespace

OfflineResult evaluate_offline(const Models& models, const Dataset& test, int num_warps) {
  if (test.size() < 2) throw UsageError("offline evaluation needs at least 2 frames");
  NoGradGuard ng;
  OfflineResult out;
  MetricsAccumulator gen_acc, warp_acc;
  double dist_sum = 0;
  int dist_count = 0;

  Cache cache;
  for (int f = 0; f < test.size(); ++f) {
    const auto& rec = test.frames[static_cast<size_t>(f)];
    auto gen_out = models.gen.forward(models.tex, rec.params);
    gen_acc.add(compute_metrics(gen_out.image, rec.image));
    if (f % num_warps == 0) {
      // refresh after warping this frame (the warp below must use the older cache)
      if (f > 0) {
        Tensor warped = warp_one(models, cache, rec.params);
        warp_acc.add(compute_metrics(warped, rec.image));
        dist_sum += rec.params.t - cache.frame;
        ++dist_count;
      }
      cache = gen_out.cache;
    } else {
      Tensor warped = warp_one(models, cache, rec.params);
      warp_acc.add(compute_metrics(warped, rec.image));
      dist_sum += rec.params.t - cache.frame;
      ++dist_count;
    }
  }
  out.generator = gen_acc.mean();
  out.warp = warp_acc.mean();
  out.mean_warp_distance = dist_count ? dist_sum / dist_count : 0;

  // rasterization cost, reported separately from model latency
  HeadProxy proxy = make_head_proxy(test.expr_dims, 20, test.seed);
  auto verts = deform_and_pose(proxy, test.frames[0].params.theta, test.frames[0].params.expr);
  CameraFrame cam{test.frames[0].params.cam, test.frames[0].params.look_at,
                  test.frames[0].params.focal > 0 ? test.frames[0].params.focal : 96.0};
  auto t0 = Clock::now();
  const int iters = 5;
  for (int i = 0; i < iters; ++i) rasterize_uv(verts, proxy, cam, test.h, test.w);
  out.raster_ms_per_frame = wall_ms(t0, Clock::now()) / iters;
  return out;
}

OnlineResult evaluate_online(const Models& models, const Dataset& test,
                             const ProtocolConfig& cfg) {
  NoGradGuard ng;
  SimConfig sim;
  sim.sequential = cfg.num_warps <= 1;
  sim.drop_stale = true;
  sim.n_workers = sim.sequential ? 1 : cfg.n_workers;
  sim.num_warps = cfg.num_warps;
  sim.tg_ms = cfg.tg_ms;
  sim.tw_ms = cfg.tw_ms;
  sim.tsync_ms = cfg.tsync_ms;
  sim.input_fps = test.fps;
  sim.n_frames = test.size();
  auto simulated = simulate_schedule(sim);

  OnlineResult out;
  out.timing = simulated.report;
  out.total = test.size();

  // Re-run the models on exactly the (frame, cache) pairs the schedule chose.
  // Cache indices are non-decreasing, so one resident cache per worker is
  // enough.
  std::vector<Cache> resident(static_cast<size_t>(std::max(1, sim.n_workers)));
  std::vector<int> resident_idx(static_cast<size_t>(std::max(1, sim.n_workers)), -2);
  MetricsAccumulator acc;
  double dist_ms_sum = 0;
  for (const auto& ft : simulated.report.frames) {
    int cf = std::max(0, ft.cache_frame);
    auto& res_idx = resident_idx[static_cast<size_t>(ft.worker)];
    auto& res = resident[static_cast<size_t>(ft.worker)];
    if (res_idx != cf) {
      res = models.gen.forward(models.tex, test.frames[static_cast<size_t>(cf)].params).cache;
      res_idx = cf;
    }
    const auto& rec = test.frames[static_cast<size_t>(ft.frame)];
    Tensor warped = warp_one(models, res, rec.params);
    acc.add(compute_metrics(warped, rec.image));
    dist_ms_sum += (ft.frame - cf) * 1000.0 / test.fps;
    ++out.emitted;
  }
  out.warp = acc.mean();
  out.mean_warp_distance_ms = out.emitted ? dist_ms_sum / out.emitted : 0;
  return out;
}

std::vector<std::pair<double, MetricsResult>> evaluate_novel_view(
    const Models& models, const GenDataConfig& base, const std::vector<double>& yaw_deg_bins,
    int frames_per_bin) {
  NoGradGuard ng;
  std::vector<std::pair<double, MetricsResult>> out;
  HeadProxy proxy = make_head_proxy(base.expr_dims, 20, base.seed);
  TrajectoryConfig tc;
  tc.n_frames = frames_per_bin + 1;
  tc.fps = base.fps;
  tc.seed = base.seed;
  tc.expr_dims = base.expr_dims;
  auto drives = generate_trajectory(tc);

  for (double deg : yaw_deg_bins) {
    auto rotated = drives;
    for (auto& d : rotated) d.theta[1] += deg * 3.14159265358979323846 / 180.0;
    auto frames = build_frames(proxy, rotated, base.res, base.res);
    MetricsAccumulator acc;
    Cache cache;
    for (int f = 0; f < static_cast<int>(frames.size()); ++f) {
      auto gen_out = models.gen.forward(models.tex, frames[static_cast<size_t>(f)]);
      if (f == 0) {
        cache = gen_out.cache;
        continue;
      }
      Tensor warped = warp_one(models, cache, frames[static_cast<size_t>(f)]);
      Tensor gt = render_ground_truth(proxy, frames[static_cast<size_t>(f)], base.res, base.res,
                                      base.shading);
      acc.add(compute_metrics(warped, gt));
      cache = gen_out.cache;  // 1x-warp pattern: refresh every frame
    }
    out.emplace_back(deg, acc.mean());
  }
  return out;
}

std::vector<std::pair<int, MetricsResult>> warp_distance_sweep(const Models& models,
                                                               const Dataset& test, int d_max,
                                                               int stride) {
  if (test.size() <= d_max) throw UsageError("warp_distance_sweep: dataset shorter than d_max");
  NoGradGuard ng;
  std::vector<MetricsAccumulator> acc(static_cast<size_t>(d_max) + 1);
  for (int c = 0; c + d_max < test.size(); c += stride) {
    auto cache = models.gen.forward(models.tex, test.frames[static_cast<size_t>(c)].params).cache;
    for (int d = 1; d <= d_max; ++d) {
      const auto& rec = test.frames[static_cast<size_t>(c + d)];
      Tensor warped = warp_one(models, cache, rec.params);
      acc[static_cast<size_t>(d)].add(compute_metrics(warped, rec.image));
    }
  }
  std::vector<std::pair<int, MetricsResult>> out;
  for (int d = 1; d <= d_max; ++d) out.emplace_back(d, acc[static_cast<size_t>(d)].mean());
  return out;
}

double linear_fit_r2(const std::vector<std::pair<int, MetricsResult>>& sweep) {
  const int n = static_cast<int>(sweep.size());
  if (n < 3) return 1.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [d, m] : sweep) {
    sx += d;
    sy += m.psnr;
    sxx += static_cast<double>(d) * d;
    sxy += d * m.psnr;
  }
  double denom = n * sxx - sx * sx;
  double slope = (n * sxy - sx * sy) / denom;
  double icept = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0, mean_y = sy / n;
  for (const auto& [d, m] : sweep) {
    double fit = slope * d + icept;
    ss_res += (m.psnr - fit) * (m.psnr - fit);
    ss_tot += (m.psnr - mean_y) * (m.psnr - mean_y);
  }
  if (ss_tot < 1e-12) return 1.0;
  return 1.0 - ss_res / ss_tot;
}

std::vector<AblationRow> ablation_rows() {
  std::vector<AblationRow> rows;
  auto make = [](bool uv, bool theta, bool mlp, bool shp, bool shs, bool exw, bool exp) {
    WarpWiring w;
    w.concat_uv = uv;
    w.use_theta = theta;
    w.use_mlp = mlp;
    w.sh_pose = shp;
    w.sh_skips = shs;
    w.exwarp = exw;
    w.exp = exp;
    return w;
  };
  rows.push_back({"uv", make(true, false, false, false, false, false, false)});
  rows.push_back({"uv+theta", make(true, true, false, false, false, false, false)});
  rows.push_back({"uv+theta+mlp", make(true, true, true, false, false, false, false)});
  rows.push_back({"uv+theta+mlp+shpose", make(true, true, true, true, false, false, false)});
  rows.push_back({"uv+theta+mlp+shpose+shskips", make(true, true, true, true, true, false, false)});
  rows.push_back({"exwarp", make(true, true, true, true, true, true, false)});
  rows.push_back({"full", make(true, true, true, true, true, false, true)});
  return rows;
}

std::vector<AblationRow> cache_layer_rows() {
  std::vector<AblationRow> rows;
  WarpWiring full;  // defaults: full implicit configuration
  WarpWiring c3 = full;
  c3.use_c4 = c3.use_c5 = false;
  WarpWiring c34 = full;
  c34.use_c5 = false;
  rows.push_back({"C3", c3});
  rows.push_back({"C3+C4", c34});
  rows.push_back({"C3+C4+C5", full});
  return rows;
}

double measure_warp_latency_ms(const Models& models, const Dataset& ds, int iters) {
  NoGradGuard ng;
  auto cache = models.gen.forward(models.tex, ds.frames[0].params).cache;
  const auto& frame = ds.frames[1].params;
  warp_one(models, cache, frame);  // warm up
  std::vector<double> times;
  for (int i = 0; i < iters; ++i) {
    auto t0 = Clock::now();
    warp_one(models, cache, frame);
    times.push_back(wall_ms(t0, Clock::now()));
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

double measure_generator_latency_ms(const Models& models, const Dataset& ds, int iters) {
  NoGradGuard ng;
  const auto& frame = ds.frames[0].params;
  models.gen.forward(models.tex, frame);  // warm up
  std::vector<double> times;
  for (int i = 0; i < iters; ++i) {
    auto t0 = Clock::now();
    models.gen.forward(models.tex, frame);
    times.push_back(wall_ms(t0, Clock::now()));
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

std::vector<AblationResult> run_ablation(const Dataset& train, const Dataset& test,
                                         const ModelConfig& base_cfg, const TrainConfig& tcfg,
                                         const std::vector<AblationRow>& rows) {
  std::vector<AblationResult> out;
  for (const auto& row : rows) {
    ModelConfig mc = base_cfg;
    mc.wiring = row.wiring;
    Models models = build_models(mc);
    TrainConfig tc = tcfg;
    Trainer trainer(models, tc);
    trainer.run(train);
    AblationResult res;
    res.name = row.name;
    res.metrics = evaluate_offline(models, test, 1).warp;
    res.latency_ms = measure_warp_latency_ms(models, test);
    res.warp_macs = total_macs(models.warp.flop_plan(test.h, test.w));
    out.push_back(res);
  }
  // relative latency against the last row (the full configuration by
  // convention of ablation_rows())
  if (!out.empty()) {
    double ref = 0;
    for (const auto& r : out)
      if (r.name == "full") ref = r.latency_ms;
    if (ref == 0) ref = out.back().latency_ms;
    for (auto& r : out) r.rel_latency_ms = r.latency_ms - ref;
  }
  return out;
}

void NeuralWorkerModel::run_cache(int frame, int record_as) {
  NoGradGuard ng;
  cache_ = models_.gen.forward(models_.tex, ds_.frames[static_cast<size_t>(frame)].params).cache;
  cache_.frame = record_as;
}

int NeuralWorkerModel::run_warp(int frame) {
  NoGradGuard ng;
  Tensor image = warp_one(models_, cache_, ds_.frames[static_cast<size_t>(frame)].params);
  if (sink_) (*sink_)[static_cast<size_t>(frame)] = std::move(image);
  return cache_.frame;
}

void write_ablation_csv(const std::vector<AblationResult>& rows, const std::string& path) {
  std::ofstream os(path);
  os << "config,l1,psnr,ssim,latency_ms,rel_latency_ms,warp_macs\n";
  for (const auto& r : rows)
    os << r.name << ',' << r.metrics.l1 << ',' << r.metrics.psnr << ',' << r.metrics.ssim << ','
       << r.latency_ms << ',' << r.rel_latency_ms << ',' << r.warp_macs << '\n';
}

}  // namespace ncr
