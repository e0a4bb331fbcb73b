#include "ncr/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace ncr {

// ---------------------------------------------------------------------------
// Report plumbing

void finalize_report(TimingReport& r, int warmup_frames) {
  r.warmup_frames = warmup_frames;
  r.order_violations = 0;
  for (size_t i = 0; i < r.frames.size(); ++i)
    if (r.frames[i].frame != static_cast<int>(i)) ++r.order_violations;

  std::vector<double> lat;
  std::vector<double> emits;
  for (size_t i = static_cast<size_t>(warmup_frames); i < r.frames.size(); ++i) {
    lat.push_back(r.frames[i].latency_ms);
    emits.push_back(r.frames[i].emit_ms);
  }
  if (lat.empty()) {
    for (const auto& f : r.frames) {
      lat.push_back(f.latency_ms);
      emits.push_back(f.emit_ms);
    }
  }
  if (lat.empty()) return;
  double sum = 0;
  for (double v : lat) sum += v;
  r.mean_latency_ms = sum / static_cast<double>(lat.size());
  std::vector<double> sorted = lat;
  std::sort(sorted.begin(), sorted.end());
  r.median_latency_ms = sorted[sorted.size() / 2];
  r.p95_latency_ms = sorted[static_cast<size_t>(0.95 * static_cast<double>(sorted.size() - 1))];
  if (emits.size() >= 2 && emits.back() > emits.front())
    r.fps = 1000.0 * static_cast<double>(emits.size() - 1) / (emits.back() - emits.front());
  if (!r.frames.empty()) r.wall_ms = r.frames.back().emit_ms;
}

void write_timing_csv(const TimingReport& r, const std::string& path) {
  std::ofstream os(path);
  os << "frame,role,worker,cache_frame,enqueue_ms,start_ms,emit_ms,latency_ms\n";
  auto row = [&os](const FrameTiming& f) {
    os << f.frame << ',' << (f.role == JobRole::kCache ? "cache" : "warp") << ',' << f.worker
       << ',' << f.cache_frame << ',' << f.enqueue_ms << ',' << f.start_ms << ',' << f.emit_ms
       << ',' << f.latency_ms << '\n';
  };
  for (const auto& f : r.cache_jobs) row(f);
  for (const auto& f : r.frames) row(f);
}

std::string timing_summary_json(const TimingReport& r) {
  std::ostringstream os;
  os << "{\"fps\":" << r.fps << ",\"mean_latency_ms\":" << r.mean_latency_ms
     << ",\"median_latency_ms\":" << r.median_latency_ms
     << ",\"p95_latency_ms\":" << r.p95_latency_ms
     << ",\"sync_overhead_ms\":" << r.sync_overhead_ms
     << ",\"order_violations\":" << r.order_violations
     << ",\"warmup_frames\":" << r.warmup_frames << ",\"frames\":" << r.frames.size()
     << ",\"raster_ms_per_frame\":" << r.raster_ms_per_frame << "}";
  return os.str();
}

// ---------------------------------------------------------------------------
// Queues and clocks

namespace {

template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(size_t bound) : bound_(bound) {}

  void push(T v) {
    std::unique_lock<std::mutex> lk(mu_);
    not_full_.wait(lk, [this] { return q_.size() < bound_; });
    q_.push_back(std::move(v));
    not_empty_.notify_one();
  }

  T pop() {
    std::unique_lock<std::mutex> lk(mu_);
    not_empty_.wait(lk, [this] { return !q_.empty(); });
    T v = std::move(q_.front());
    q_.pop_front();
    not_full_.notify_one();
    return v;
  }

 private:
  size_t bound_;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> q_;
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void sleep_until_ms(Clock::time_point t0, double ms) {
  std::this_thread::sleep_until(t0 + std::chrono::duration_cast<Clock::duration>(
                                         std::chrono::duration<double, std::milli>(ms)));
}

struct Job {
  enum class Kind { kCache, kWarp, kStop } kind = Kind::kWarp;
  int frame = 0;
  int record_as = 0;
  bool signal_done = true;
  double enqueue_ms = 0;
};

struct OutMsg {
  enum class Kind { kFrame, kCacheInfo, kError } kind = Kind::kFrame;
  FrameTiming timing;
  std::string error;
};

}  // namespace

void SleepWorkerModel::run_cache(int frame, int record_as) {
  std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(tg_));
  (void)frame;
  resident_ = record_as;
}

int SleepWorkerModel::run_warp(int frame) {
  (void)frame;
  std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(tw_));
  return resident_;
}

// ---------------------------------------------------------------------------
// Sequential execution

TimingReport run_sequential(int n_frames, WorkerModel& model, int num_warps, double input_fps) {
  if (num_warps < 1) throw std::invalid_argument("num_warps must be >= 1");
  TimingReport r;
  if (n_frames <= 0) return r;
  const auto t0 = Clock::now();
  auto arrival = [&](int f) { return input_fps > 0 ? 1000.0 * f / input_fps : 0.0; };

  auto do_cache = [&](int frame, int record_as) {
    FrameTiming ft;
    ft.role = JobRole::kCache;
    ft.frame = record_as;
    ft.enqueue_ms = ft.start_ms = ms_since(t0);
    model.run_cache(frame, record_as);
    ft.emit_ms = ms_since(t0);
    ft.latency_ms = ft.emit_ms - ft.enqueue_ms;
    r.cache_jobs.push_back(ft);
  };
  auto do_warp = [&](int frame) {
    if (input_fps > 0 && ms_since(t0) < arrival(frame)) sleep_until_ms(t0, arrival(frame));
    FrameTiming ft;
    ft.frame = frame;
    ft.enqueue_ms = ft.start_ms = ms_since(t0);  // newest viewpoint is pulled when ready
    ft.cache_frame = model.run_warp(frame);
    ft.emit_ms = ms_since(t0);
    ft.latency_ms = ft.emit_ms - ft.enqueue_ms;
    r.frames.push_back(ft);
  };

  do_cache(0, -1);  // bootstrap prime
  do_warp(0);
  for (int c = 0; c <= n_frames - 2; c += num_warps) {
    do_cache(c, c);
    for (int f = c + 1; f <= std::min(c + num_warps, n_frames - 1); ++f) do_warp(f);
  }
  finalize_report(r, num_warps);
  return r;
}

TimingReport run_sequential_queued(int n_frames, const WorkerModelFactory& factory,
                                   int num_warps, double input_fps) {
  if (num_warps < 1) throw std::invalid_argument("num_warps must be >= 1");
  TimingReport r;
  if (n_frames <= 0) return r;
  BoundedQueue<Job> input(4);
  BoundedQueue<OutMsg> output(4);
  BoundedQueue<int> cache_done(4);
  const auto t0 = Clock::now();

  std::thread worker([&]() {
    auto model = factory(0);
    try {
      for (;;) {
        Job job = input.pop();
        if (job.kind == Job::Kind::kStop) break;
        if (job.kind == Job::Kind::kCache) {
          model->run_cache(job.frame, job.record_as);
          cache_done.push(1);
        } else {
          FrameTiming ft;
          ft.frame = job.frame;
          ft.enqueue_ms = job.enqueue_ms;
          ft.start_ms = ms_since(t0);
          ft.cache_frame = model->run_warp(job.frame);
          OutMsg msg;
          msg.timing = ft;
          output.push(std::move(msg));
        }
      }
    } catch (const std::exception& e) {
      OutMsg msg;
      msg.kind = OutMsg::Kind::kError;
      msg.error = e.what();
      output.push(std::move(msg));
    }
  });

  auto arrival = [&](int f) { return input_fps > 0 ? 1000.0 * f / input_fps : 0.0; };
  std::string error;
  auto post_cache = [&](int frame, int record_as) {
    FrameTiming ft;
    ft.role = JobRole::kCache;
    ft.frame = record_as;
    ft.enqueue_ms = ms_since(t0);
    input.push({Job::Kind::kCache, frame, record_as, true, ft.enqueue_ms});
    cache_done.pop();  // lock-step with the worker, as the parallel mode does
    ft.emit_ms = ms_since(t0);
    ft.latency_ms = ft.emit_ms - ft.enqueue_ms;
    r.cache_jobs.push_back(ft);
  };
  auto post_warp = [&](int frame) -> bool {
    if (input_fps > 0 && ms_since(t0) < arrival(frame)) sleep_until_ms(t0, arrival(frame));
    input.push({Job::Kind::kWarp, frame, frame, false, ms_since(t0)});
    OutMsg msg = output.pop();
    if (msg.kind == OutMsg::Kind::kError) {
      error = msg.error;
      return false;
    }
    msg.timing.emit_ms = ms_since(t0);
    msg.timing.latency_ms = msg.timing.emit_ms - msg.timing.enqueue_ms;
    r.frames.push_back(msg.timing);
    return true;
  };

  bool ok = true;
  post_cache(0, -1);
  ok = post_warp(0);
  for (int c = 0; ok && c <= n_frames - 2; c += num_warps) {
    post_cache(c, c);
    for (int f = c + 1; ok && f <= std::min(c + num_warps, n_frames - 1); ++f) ok = post_warp(f);
  }
  input.push({Job::Kind::kStop, 0, 0, false, 0});
  worker.join();
  if (!ok) throw std::runtime_error("scheduler worker died: " + error);
  finalize_report(r, num_warps);
  return r;
}

// ---------------------------------------------------------------------------
// Parallel execution

TimingReport run_parallel(int n_frames, const WorkerModelFactory& factory,
                          const SchedulerConfig& cfg) {
  if (cfg.n_workers < 1) throw std::invalid_argument("run_parallel needs n_workers >= 1");
  if (cfg.num_warps < 1) throw std::invalid_argument("num_warps must be >= 1");
  TimingReport r;
  if (n_frames <= 0) return r;
  const int nw = cfg.num_warps, ng = cfg.n_workers;
  const size_t qbound = cfg.queue_bound > 0 ? static_cast<size_t>(cfg.queue_bound)
                                            : static_cast<size_t>(2 * nw);
  const int depth = std::max(1, cfg.cache_pipeline_depth);

  std::vector<std::unique_ptr<BoundedQueue<Job>>> inputs;
  for (int w = 0; w < ng; ++w) inputs.push_back(std::make_unique<BoundedQueue<Job>>(qbound));
  BoundedQueue<OutMsg> output(static_cast<size_t>(16));
  BoundedQueue<int> cache_done(static_cast<size_t>(depth + ng + 1));
  const auto t0 = Clock::now();

  std::vector<std::thread> workers;
  for (int w = 0; w < ng; ++w) {
    workers.emplace_back([&, w]() {
      auto model = factory(w);
      try {
        for (;;) {
          Job job = inputs[static_cast<size_t>(w)]->pop();
          if (job.kind == Job::Kind::kStop) break;
          if (job.kind == Job::Kind::kCache) {
            FrameTiming ft;
            ft.role = JobRole::kCache;
            ft.frame = job.record_as;
            ft.worker = w;
            ft.enqueue_ms = job.enqueue_ms;
            ft.start_ms = ms_since(t0);
            model->run_cache(job.frame, job.record_as);
            ft.emit_ms = ms_since(t0);
            ft.latency_ms = ft.emit_ms - ft.enqueue_ms;
            if (job.signal_done) cache_done.push(1);
            OutMsg msg;
            msg.kind = OutMsg::Kind::kCacheInfo;
            msg.timing = ft;
            output.push(std::move(msg));
          } else {
            FrameTiming ft;
            ft.frame = job.frame;
            ft.worker = w;
            ft.enqueue_ms = job.enqueue_ms;
            ft.start_ms = ms_since(t0);
            ft.cache_frame = model->run_warp(job.frame);
            ft.emit_ms = ms_since(t0);
            OutMsg msg;
            msg.timing = ft;
            output.push(std::move(msg));
          }
        }
      } catch (const std::exception& e) {
        OutMsg msg;
        msg.kind = OutMsg::Kind::kError;
        msg.error = e.what();
        output.push(std::move(msg));
      }
    });
  }

  // Consumer: reorders warp results into frame order before emission.
  std::string error;
  std::thread consumer([&]() {
    std::map<int, FrameTiming> pending;
    int expected = 0, received = 0;
    while (received < n_frames) {
      OutMsg msg = output.pop();
      if (msg.kind == OutMsg::Kind::kError) {
        error = msg.error;
        return;
      }
      if (msg.kind == OutMsg::Kind::kCacheInfo) {
        r.cache_jobs.push_back(msg.timing);
        continue;
      }
      ++received;
      pending.emplace(msg.timing.frame, msg.timing);
      while (!pending.empty() && pending.begin()->first == expected) {
        FrameTiming ft = pending.begin()->second;
        pending.erase(pending.begin());
        ft.emit_ms = ms_since(t0);
        ft.latency_ms = ft.emit_ms - ft.enqueue_ms;
        r.frames.push_back(ft);
        ++expected;
      }
    }
  });

  // Prime every worker so the first warps have a resident cache.
  for (int w = 0; w < ng; ++w)
    inputs[static_cast<size_t>(w)]->push({Job::Kind::kCache, 0, -1, false, 0.0});
  for (int i = 0; i < depth; ++i) cache_done.push(1);

  int cache_tid = 0, warp_tid = 0;
  for (int f = 0; f < n_frames; ++f) {
    double arrival = cfg.input_fps > 0 ? 1000.0 * f / cfg.input_fps : 0.0;
    if (cfg.input_fps > 0 && ms_since(t0) < arrival) sleep_until_ms(t0, arrival);
    if (f % nw == 0) {
      cache_done.pop();  // wait for an outstanding cache to complete
      cache_tid = (cache_tid + 1) % ng;
      // the previous cache worker holds the cache this block warps from
      warp_tid = (cache_tid + ng - 1) % ng;
      double enq = cfg.input_fps > 0 ? arrival : ms_since(t0);
      // warp first: a lone worker must not warp this block against its own
      // fresh cache
      inputs[static_cast<size_t>(warp_tid)]->push({Job::Kind::kWarp, f, f, false, enq});
      inputs[static_cast<size_t>(cache_tid)]->push({Job::Kind::kCache, f, f, true, enq});
    } else {
      double enq = cfg.input_fps > 0 ? arrival : ms_since(t0);
      inputs[static_cast<size_t>(warp_tid)]->push({Job::Kind::kWarp, f, f, false, enq});
    }
  }
  for (int w = 0; w < ng; ++w)
    inputs[static_cast<size_t>(w)]->push({Job::Kind::kStop, 0, 0, false, 0.0});
  consumer.join();
  for (auto& t : workers) t.join();
  if (!error.empty()) throw std::runtime_error("scheduler worker died: " + error);
  std::sort(r.cache_jobs.begin(), r.cache_jobs.end(),
            [](const FrameTiming& a, const FrameTiming& b) { return a.start_ms < b.start_ms; });
  finalize_report(r, nw * ng);
  return r;
}

double measure_sync_overhead(int n_frames, const WorkerModelFactory& factory, int num_warps) {
  auto plain_model = factory(0);
  TimingReport plain = run_sequential(n_frames, *plain_model, num_warps);
  TimingReport queued = run_sequential_queued(n_frames, factory, num_warps);
  return queued.mean_latency_ms - plain.mean_latency_ms;
}

// ---------------------------------------------------------------------------
// Virtual-clock simulation

namespace {

struct SimState {
  const SimConfig& cfg;
  TimingReport report;
  std::vector<SimEvent> events;

  double arrival(int f) const { return cfg.input_fps > 0 ? 1000.0 * f / cfg.input_fps : 0.0; }
  double sync() const { return cfg.queued ? cfg.tsync_ms : 0.0; }
};

void sim_sequential(SimState& s) {
  const auto& cfg = s.cfg;
  const int nw = cfg.num_warps;
  double t = 0;
  int resident = -1;

  auto do_cache = [&](int frame, int record_as) {
    double start = std::max(t, cfg.input_fps > 0 ? s.arrival(frame) : t);
    double end = start + cfg.tg_ms;
    s.events.push_back({start, end, 0, frame, JobRole::kCache, record_as});
    FrameTiming ft;
    ft.role = JobRole::kCache;
    ft.frame = record_as;
    ft.enqueue_ms = start;
    ft.start_ms = start;
    ft.emit_ms = end + s.sync();
    ft.latency_ms = ft.emit_ms - start;
    s.report.cache_jobs.push_back(ft);
    t = end + s.sync();
    resident = record_as;
  };
  auto do_warp = [&](int frame) {
    double start = std::max(t, s.arrival(frame));
    double end = start + cfg.tw_ms;
    double emit = end + s.sync();
    s.events.push_back({start, end, 0, frame, JobRole::kWarp, resident});
    FrameTiming ft;
    ft.frame = frame;
    ft.enqueue_ms = start;  // sequential pipeline pulls the newest viewpoint
    ft.start_ms = start;
    ft.emit_ms = emit;
    ft.latency_ms = emit - ft.enqueue_ms;
    ft.cache_frame = resident;
    s.report.frames.push_back(ft);
    t = emit;
  };

  do_cache(0, -1);
  do_warp(0);
  for (int c = 0; c <= cfg.n_frames - 2; c += nw) {
    do_cache(c, c);
    for (int f = c + 1; f <= std::min(c + nw, cfg.n_frames - 1); ++f) do_warp(f);
  }
  finalize_report(s.report, nw);
}

void sim_parallel(SimState& s) {
  const auto& cfg = s.cfg;
  const int nw = cfg.num_warps, ng = cfg.n_workers;
  const int depth = std::max(1, cfg.cache_pipeline_depth);

  std::vector<double> worker_free(static_cast<size_t>(ng), cfg.tg_ms);  // primes run [0, Tg]
  std::vector<int> resident(static_cast<size_t>(ng), -1);
  for (int w = 0; w < ng; ++w)
    s.events.push_back({0, cfg.tg_ms, w, 0, JobRole::kCache, -1});
  std::deque<double> tokens(static_cast<size_t>(depth), 0.0);

  double t_prod = 0;
  int cache_tid = 0, warp_tid = 0;

  auto post_warp = [&](int frame, double enqueue) {
    double start = std::max(t_prod, worker_free[static_cast<size_t>(warp_tid)]);
    double end = start + cfg.tw_ms;
    worker_free[static_cast<size_t>(warp_tid)] = end;
    s.events.push_back({start, end, warp_tid, frame, JobRole::kWarp,
                        resident[static_cast<size_t>(warp_tid)]});
    FrameTiming ft;
    ft.frame = frame;
    ft.worker = warp_tid;
    ft.enqueue_ms = enqueue;
    ft.start_ms = start;
    ft.emit_ms = end + cfg.tsync_ms;
    ft.latency_ms = ft.emit_ms - enqueue;
    ft.cache_frame = resident[static_cast<size_t>(warp_tid)];
    s.report.frames.push_back(ft);
  };

  for (int f = 0; f < cfg.n_frames; ++f) {
    double arr = s.arrival(f);
    t_prod = std::max(t_prod, arr);
    if (f % nw == 0) {
      double tok = tokens.front();
      tokens.pop_front();
      t_prod = std::max(t_prod, tok);
      cache_tid = (cache_tid + 1) % ng;
      warp_tid = (cache_tid + ng - 1) % ng;
      double enq = cfg.input_fps > 0 ? arr : t_prod;
      post_warp(f, enq);
      double cstart = std::max(t_prod, worker_free[static_cast<size_t>(cache_tid)]);
      double cend = cstart + cfg.tg_ms;
      worker_free[static_cast<size_t>(cache_tid)] = cend;
      resident[static_cast<size_t>(cache_tid)] = f;
      s.events.push_back({cstart, cend, cache_tid, f, JobRole::kCache, f});
      FrameTiming ft;
      ft.role = JobRole::kCache;
      ft.frame = f;
      ft.worker = cache_tid;
      ft.enqueue_ms = enq;
      ft.start_ms = cstart;
      ft.emit_ms = cend;
      ft.latency_ms = cend - enq;
      s.report.cache_jobs.push_back(ft);
      tokens.push_back(cend);
    } else {
      post_warp(f, cfg.input_fps > 0 ? arr : t_prod);
    }
  }

  // Consumer-side reordering: a frame is emitted once all predecessors are.
  std::sort(s.report.frames.begin(), s.report.frames.end(),
            [](const FrameTiming& a, const FrameTiming& b) { return a.frame < b.frame; });
  double running = 0;
  for (auto& ft : s.report.frames) {
    running = std::max(running, ft.emit_ms);
    ft.emit_ms = running;
    ft.latency_ms = ft.emit_ms - ft.enqueue_ms;
  }
  finalize_report(s.report, nw * ng);
}

// Online mode: jobs are slots that pull the newest arrived frame when they
// start; frames that were never pulled are dropped.
void sim_parallel_online(SimState& s) {
  const auto& cfg = s.cfg;
  if (cfg.input_fps <= 0) throw std::invalid_argument("online simulation needs input_fps > 0");
  const int nw = cfg.num_warps, ng = cfg.n_workers;
  const int depth = std::max(1, cfg.cache_pipeline_depth);

  std::vector<double> worker_free(static_cast<size_t>(ng), cfg.tg_ms);
  std::vector<int> resident(static_cast<size_t>(ng), 0);  // primes use frame 0
  for (int w = 0; w < ng; ++w) s.events.push_back({0, cfg.tg_ms, w, 0, JobRole::kCache, 0});
  std::deque<double> tokens(static_cast<size_t>(depth), 0.0);

  double t_prod = 0;
  int cache_tid = 0, warp_tid = 0;
  int last_pulled = -1;
  auto newest_at = [&](double t) {
    return std::min(cfg.n_frames - 1, static_cast<int>(std::floor(t * cfg.input_fps / 1000.0)));
  };

  bool done = false;
  while (!done) {
    double tok = tokens.front();
    tokens.pop_front();
    t_prod = std::max(t_prod, tok);
    cache_tid = (cache_tid + 1) % ng;
    warp_tid = (cache_tid + ng - 1) % ng;

    for (int j = 0; j < nw; ++j) {
      double start = std::max(t_prod, worker_free[static_cast<size_t>(warp_tid)]);
      start = std::max(start, s.arrival(last_pulled + 1));  // wait for an unseen frame
      int f = std::max(newest_at(start), last_pulled + 1);
      if (f > cfg.n_frames - 1) {
        done = true;
        break;
      }
      last_pulled = f;
      double end = start + cfg.tw_ms;
      worker_free[static_cast<size_t>(warp_tid)] = end;
      s.events.push_back({start, end, warp_tid, f, JobRole::kWarp,
                          resident[static_cast<size_t>(warp_tid)]});
      FrameTiming ft;
      ft.frame = f;
      ft.worker = warp_tid;
      ft.enqueue_ms = s.arrival(f);
      ft.start_ms = start;
      ft.emit_ms = end + cfg.tsync_ms;
      ft.latency_ms = ft.emit_ms - ft.enqueue_ms;
      ft.cache_frame = resident[static_cast<size_t>(warp_tid)];
      s.report.frames.push_back(ft);
      if (f == cfg.n_frames - 1) done = true;
    }
    if (done) break;

    double cstart = std::max(t_prod, worker_free[static_cast<size_t>(cache_tid)]);
    int cf = std::max(newest_at(cstart), 0);
    double cend = cstart + cfg.tg_ms;
    worker_free[static_cast<size_t>(cache_tid)] = cend;
    resident[static_cast<size_t>(cache_tid)] = cf;
    s.events.push_back({cstart, cend, cache_tid, cf, JobRole::kCache, cf});
    FrameTiming ft;
    ft.role = JobRole::kCache;
    ft.frame = cf;
    ft.worker = cache_tid;
    ft.enqueue_ms = cstart;
    ft.start_ms = cstart;
    ft.emit_ms = cend;
    ft.latency_ms = cend - cstart;
    s.report.cache_jobs.push_back(ft);
    tokens.push_back(cend);
  }
  finalize_report(s.report, std::min<int>(nw * ng, static_cast<int>(s.report.frames.size()) / 2));
}

void sim_sequential_online(SimState& s) {
  const auto& cfg = s.cfg;
  if (cfg.input_fps <= 0) throw std::invalid_argument("online simulation needs input_fps > 0");
  const int nw = cfg.num_warps;
  double t = cfg.tg_ms;  // prime with frame 0
  int resident = 0;
  s.events.push_back({0, cfg.tg_ms, 0, 0, JobRole::kCache, 0});
  int last_pulled = -1;
  auto newest_at = [&](double tt) {
    return std::min(cfg.n_frames - 1, static_cast<int>(std::floor(tt * cfg.input_fps / 1000.0)));
  };

  bool done = false;
  while (!done) {
    for (int j = 0; j < nw; ++j) {
      double start = std::max(t, s.arrival(last_pulled + 1));
      int f = std::max(newest_at(start), last_pulled + 1);
      if (f > cfg.n_frames - 1) {
        done = true;
        break;
      }
      last_pulled = f;
      double end = start + cfg.tw_ms;
      double emit = end + s.sync();
      s.events.push_back({start, end, 0, f, JobRole::kWarp, resident});
      FrameTiming ft;
      ft.frame = f;
      ft.enqueue_ms = s.arrival(f);
      ft.start_ms = start;
      ft.emit_ms = emit;
      ft.latency_ms = emit - ft.enqueue_ms;
      ft.cache_frame = resident;
      s.report.frames.push_back(ft);
      t = emit;
      if (f == cfg.n_frames - 1) done = true;
    }
    if (done) break;
    double cstart = t;
    int cf = newest_at(cstart);
    t = cstart + cfg.tg_ms + s.sync();
    resident = cf;
    s.events.push_back({cstart, cstart + cfg.tg_ms, 0, cf, JobRole::kCache, cf});
    FrameTiming ft;
    ft.role = JobRole::kCache;
    ft.frame = cf;
    ft.enqueue_ms = cstart;
    ft.start_ms = cstart;
    ft.emit_ms = cstart + cfg.tg_ms;
    ft.latency_ms = cfg.tg_ms;
    s.report.cache_jobs.push_back(ft);
  }
  finalize_report(s.report, nw);
}

}  // namespace

SimResult simulate_schedule(const SimConfig& cfg) {
  if (cfg.tg_ms <= 0 || cfg.tw_ms <= 0 || cfg.tsync_ms < 0)
    throw std::invalid_argument("simulate_schedule durations must be positive");
  if (cfg.n_workers < 1 || cfg.num_warps < 1)
    throw std::invalid_argument("simulate_schedule needs n_workers, num_warps >= 1");
  SimConfig c = cfg;
  if (!c.sequential) c.queued = true;  // the parallel pipeline always runs through queues
  SimState s{c, {}, {}};
  if (c.sequential) {
    if (c.drop_stale)
      sim_sequential_online(s);
    else
      sim_sequential(s);
  } else {
    if (c.drop_stale)
      sim_parallel_online(s);
    else
      sim_parallel(s);
  }
  return {std::move(s.events), std::move(s.report)};
}

double measure_sync_overhead_sim(const SimConfig& cfg) {
  SimConfig plain = cfg;
  plain.sequential = true;
  plain.drop_stale = false;
  plain.queued = false;
  SimConfig queued = plain;
  queued.queued = true;
  auto a = simulate_schedule(plain);
  auto b = simulate_schedule(queued);
  return b.report.mean_latency_ms - a.report.mean_latency_ms;
}

}  // namespace ncr
