#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ncr/dataset.hpp"
#include "ncr/metrics.hpp"
#include "ncr/scheduler.hpp"
#include "ncr/training.hpp"

// Evaluation protocols (offline / online / novel view), the warp-distance
// sweep, and the ablation harness.

namespace ncr {

// Published pipeline durations drive online frame-drop arithmetic so the
// protocol stays deterministic across machines.
struct ProtocolConfig {
  int num_warps = 1;
  int n_workers = 2;
  double tg_ms = 47.02;
  double tw_ms = 14.62;
  double tsync_ms = 0.25;
};

struct OfflineResult {
  MetricsResult generator;  // full generator on every frame
  MetricsResult warp;       // warp at the sequential cache pattern
  double raster_ms_per_frame = 0;
  double mean_warp_distance = 0;
};

// Warp pattern: caches at frame indices = 0 (mod num_warps), frame f warped
// against the newest cache strictly older than f (d in 1..num_warps).
OfflineResult evaluate_offline(const Models& models, const Dataset& test, int num_warps);

struct OnlineResult {
  MetricsResult warp;
  TimingReport timing;
  int emitted = 0, total = 0;
  double mean_warp_distance_ms = 0;
};

// Virtual-clock schedule decides which frames are processed and which cache
// each warp uses; the models then run offline on exactly those pairs.
// num_warps==1 uses the sequential pipeline, otherwise the parallel one.
OnlineResult evaluate_online(const Models& models, const Dataset& test,
                             const ProtocolConfig& cfg);

// Rotates the head trajectory's yaw beyond the training range while holding
// expressions fixed; returns mean 1x-warp PSNR per rotation bin (degrees).
std::vector<std::pair<double, MetricsResult>> evaluate_novel_view(
    const Models& models, const GenDataConfig& base, const std::vector<double>& yaw_deg_bins,
    int frames_per_bin = 24);

// Mean warped PSNR per distance d in 1..d_max, cache stride `stride`.
std::vector<std::pair<int, MetricsResult>> warp_distance_sweep(const Models& models,
                                                               const Dataset& test, int d_max,
                                                               int stride = 4);

// Least-squares fit quality of psnr-vs-d (for the linear-degradation check).
double linear_fit_r2(const std::vector<std::pair<int, MetricsResult>>& sweep);

// ---------------------------------------------------------------------------
// Ablations

struct AblationRow {
  std::string name;
  WarpWiring wiring;
};

// Cumulative Table-3-style rows plus the full implicit configuration.
std::vector<AblationRow> ablation_rows();
// C3 / C3+C4 / C3+C4+C5 cache-layer rows.
std::vector<AblationRow> cache_layer_rows();

struct AblationResult {
  std::string name;
  MetricsResult metrics;       // 1x-warp offline on the test split
  double latency_ms = 0;       // measured warp_forward wall time
  double rel_latency_ms = 0;   // against the full configuration
  long long warp_macs = 0;
};

std::vector<AblationResult> run_ablation(const Dataset& train, const Dataset& test,
                                         const ModelConfig& base_cfg, const TrainConfig& tcfg,
                                         const std::vector<AblationRow>& rows);

void write_ablation_csv(const std::vector<AblationResult>& rows, const std::string& path);

// Median wall time of one call, NoGrad, after a warm-up call.
double measure_warp_latency_ms(const Models& models, const Dataset& ds, int iters = 9);
double measure_generator_latency_ms(const Models& models, const Dataset& ds, int iters = 5);

// Scheduler worker backed by the real models; owns the worker-resident cache.
// When image_sink is set, warped frames are stored by frame index.
class NeuralWorkerModel : public WorkerModel {
 public:
  NeuralWorkerModel(const Models& models, const Dataset& ds,
                    std::vector<Tensor>* image_sink = nullptr)
      : models_(models), ds_(ds), sink_(image_sink) {}
  void run_cache(int frame, int record_as) override;
  int run_warp(int frame) override;

 private:
  const Models& models_;
  const Dataset& ds_;
  std::vector<Tensor>* sink_;
  Cache cache_;
};

}  // namespace ncr
