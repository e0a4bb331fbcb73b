#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace ncr {

// ---------------------------------------------------------------------------
// Jobs and reports

enum class JobRole { kCache, kWarp };

struct FrameTiming {
  int frame = -1;
  JobRole role = JobRole::kWarp;
  int worker = 0;
  double enqueue_ms = 0;  // viewpoint arrival
  double start_ms = 0;
  double emit_ms = 0;     // image available at the consumer
  double latency_ms = 0;  // emit - enqueue
  int cache_frame = -2;   // cache the warp consumed (-1 = primed)
};

struct TimingReport {
  std::vector<FrameTiming> frames;      // one row per emitted frame, emission order
  std::vector<FrameTiming> cache_jobs;  // one row per cache refresh
  double fps = 0;                       // steady state, warm-up excluded
  double mean_latency_ms = 0;
  double median_latency_ms = 0;
  double p95_latency_ms = 0;
  double sync_overhead_ms = 0;
  int order_violations = 0;
  int warmup_frames = 0;
  double wall_ms = 0;
  double raster_ms_per_frame = 0;  // reported separately, never part of latency
};

void finalize_report(TimingReport& r, int warmup_frames);
void write_timing_csv(const TimingReport& r, const std::string& path);
std::string timing_summary_json(const TimingReport& r);

// ---------------------------------------------------------------------------
// Worker execution model

// One instance per worker; owns the worker-resident cache. `record_as` is the
// frame index the cache is filed under (-1 for the bootstrap prime).
class WorkerModel {
 public:
  virtual ~WorkerModel() = default;
  virtual void run_cache(int frame, int record_as) = 0;
  virtual int run_warp(int frame) = 0;  // returns resident cache index
};

using WorkerModelFactory = std::function<std::unique_ptr<WorkerModel>(int worker)>;

// Sleep-based stand-in whose durations mirror the simulated ones.
class SleepWorkerModel : public WorkerModel {
 public:
  SleepWorkerModel(double tg_ms, double tw_ms) : tg_(tg_ms), tw_(tw_ms) {}
  void run_cache(int frame, int record_as) override;
  int run_warp(int frame) override;

 private:
  double tg_, tw_;
  int resident_ = -2;
};

// ---------------------------------------------------------------------------
// Execution modes

struct SchedulerConfig {
  int n_workers = 2;
  int num_warps = 1;
  // Completion tokens in flight before the producer blocks. 1 reproduces the
  // strict serial gate (which caps throughput at num_warps/Tg); 2 lets caches
  // pipeline across workers while the warp ordering guarantees still hold
  // through per-worker FIFO queues.
  int cache_pipeline_depth = 2;
  int queue_bound = 0;    // 0 => 2 * num_warps
  double input_fps = 0;   // 0 => frames are available immediately
};

// Plain single-context loop: warp each frame against the newest cache, then
// refresh the cache once per block of num_warps frames.
TimingReport run_sequential(int n_frames, WorkerModel& model, int num_warps,
                            double input_fps = 0);

// Same schedule but routed through the queue harness (one worker thread, one
// input queue, one output queue); used to measure synchronization overhead.
TimingReport run_sequential_queued(int n_frames, const WorkerModelFactory& factory,
                                   int num_warps, double input_fps = 0);

// Queue-based parallel pipeline: one input queue per worker, one output
// queue, one cache-completion queue; the cache role alternates across
// workers every num_warps frames and each warp runs on the worker holding
// the cache of the previous block.
TimingReport run_parallel(int n_frames, const WorkerModelFactory& factory,
                          const SchedulerConfig& cfg);

// Mean per-frame latency difference between the plain sequential loop and the
// queued sequential harness.
double measure_sync_overhead(int n_frames, const WorkerModelFactory& factory, int num_warps);

// ---------------------------------------------------------------------------
// Virtual-clock simulation

struct SimConfig {
  bool sequential = false;
  bool queued = true;       // apply tsync per frame (queue harness present)
  bool drop_stale = false;  // online mode: jobs pull the newest arrived frame
  int n_workers = 2;
  int num_warps = 2;
  int cache_pipeline_depth = 2;
  double tg_ms = 47.02;
  double tw_ms = 14.62;
  double tsync_ms = 0.25;
  double input_fps = 0;  // 0 => all frames available at t=0 (pull-when-ready)
  int n_frames = 200;
};

struct SimEvent {
  double t_start = 0, t_end = 0;
  int worker = 0;
  int frame = -1;       // frame whose parameters the job consumed
  JobRole role = JobRole::kWarp;
  int cache_frame = -2; // for warps: the cache they used
};

struct SimResult {
  std::vector<SimEvent> events;
  TimingReport report;
};

// Pure discrete-event model of the two pipelines; no waiting, bit-stable.
SimResult simulate_schedule(const SimConfig& cfg);

// Simulated-mode overhead measurement: queued minus plain sequential latency.
double measure_sync_overhead_sim(const SimConfig& cfg);

}  // namespace ncr
