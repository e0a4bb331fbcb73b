// ncr: data generation, training, evaluation, scheduler benchmarks, and
// ablations for the cached-warp neural head renderer.

#include <omp.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "ncr/checkpoint.hpp"
#include "ncr/config.hpp"
#include "ncr/metrics.hpp"
#include "ncr/protocols.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ncr;

namespace {

struct Cli {
  RunConfig cfg;
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value configuration file");
    for (const auto& key : RunConfig::keys()) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      cmd->add_option_function<std::string>(
          flag, [this, key](const std::string& v) { overrides.emplace_back(key, v); });
    }
  }

  void finalize() {
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  }
};

Dataset load_or_generate(const RunConfig& cfg, const std::string& path) {
  if (!path.empty() && fs::exists(path + "/manifest.txt")) return load_dataset(path);
  return generate_dataset(cfg.gen_data_config());
}

Models load_models_from(const RunConfig& cfg) {
  Models models = build_models(cfg.model_config());
  if (cfg.checkpoint.empty()) throw UsageError("no checkpoint given (--checkpoint)");
  load_models(cfg.checkpoint, models);
  return models;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  os << text << '\n';
}

int cmd_gen_data(Cli& cli) {
  cli.finalize();
  std::string dir = !cli.cfg.dataset.empty() ? cli.cfg.dataset
                                             : cli.cfg.resolved_out_dir("dataset");
  Dataset ds = generate_dataset(cli.cfg.gen_data_config());
  write_dataset(dir, ds);
  cli.cfg.echo_to(dir);
  std::cout << "wrote " << ds.size() << " frames at " << ds.h << "x" << ds.w << " to " << dir
            << "\n";
  return 0;
}

int cmd_train(Cli& cli) {
  cli.finalize();
  std::string out = cli.cfg.resolved_out_dir("train");
  fs::create_directories(out);
  cli.cfg.echo_to(out);
  Dataset train = load_or_generate(cli.cfg, cli.cfg.dataset);
  Models models = build_models(cli.cfg.model_config());
  TrainConfig tc = cli.cfg.train_config();
  tc.log_csv = out + "/loss.csv";
  Trainer trainer(models, tc);
  auto history = trainer.run(train);
  save_models(out + "/model.nckp", models);
  std::cout << "trained " << history.size() << " epochs; final total loss "
            << (history.empty() ? 0.f : history.back().total) << "; checkpoint " << out
            << "/model.nckp\n";
  if (!cli.cfg.test_dataset.empty()) {
    Dataset test = load_dataset(cli.cfg.test_dataset);
    auto offline = evaluate_offline(models, test, cli.cfg.eval_warps);
    json j = {{"generator", json::parse(metrics_json(offline.generator))},
              {"warp", json::parse(metrics_json(offline.warp))}};
    write_text(out + "/eval.json", j.dump(2));
    std::cout << "offline eval: gen psnr " << offline.generator.psnr << ", warp psnr "
              << offline.warp.psnr << "\n";
  }
  return 0;
}

int cmd_eval(Cli& cli) {
  cli.finalize();
  std::string out = cli.cfg.resolved_out_dir("eval");
  fs::create_directories(out);
  cli.cfg.echo_to(out);
  Models models = load_models_from(cli.cfg);
  Dataset test = load_or_generate(cli.cfg, !cli.cfg.test_dataset.empty() ? cli.cfg.test_dataset
                                                                         : cli.cfg.dataset);
  json j;
  if (cli.cfg.protocol == "offline") {
    auto r = evaluate_offline(models, test, cli.cfg.eval_warps);
    j = {{"protocol", "offline"},
         {"num_warps", cli.cfg.eval_warps},
         {"generator", json::parse(metrics_json(r.generator))},
         {"warp", json::parse(metrics_json(r.warp))},
         {"mean_warp_distance", r.mean_warp_distance},
         {"raster_ms_per_frame", r.raster_ms_per_frame}};
  } else if (cli.cfg.protocol == "online") {
    auto r = evaluate_online(models, test, cli.cfg.protocol_config());
    j = {{"protocol", "online"},
         {"input_fps", test.fps},
         {"num_warps", cli.cfg.eval_warps},
         {"warp", json::parse(metrics_json(r.warp))},
         {"emitted", r.emitted},
         {"total", r.total},
         {"mean_warp_distance_ms", r.mean_warp_distance_ms},
         {"timing", json::parse(timing_summary_json(r.timing))}};
  } else if (cli.cfg.protocol == "novel-view") {
    GenDataConfig base = cli.cfg.gen_data_config();
    auto bins = evaluate_novel_view(models, base, {0, 15, 30, 45});
    j["protocol"] = "novel-view";
    for (const auto& [deg, m] : bins)
      j["bins"].push_back({{"yaw_deg", deg}, {"metrics", json::parse(metrics_json(m))}});
  } else {
    throw ConfigError("unknown protocol: " + cli.cfg.protocol);
  }
  write_text(out + "/eval.json", j.dump(2));
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_bench(Cli& cli) {
  cli.finalize();
  std::string out = cli.cfg.resolved_out_dir("bench");
  fs::create_directories(out);
  cli.cfg.echo_to(out);

  const bool real_models = !cli.cfg.checkpoint.empty();
  Models models;
  Dataset ds;
  std::vector<Tensor> images;
  WorkerModelFactory factory;
  int n_frames = cli.cfg.sim_frames;
  if (real_models) {
    models = load_models_from(cli.cfg);
    ds = load_or_generate(cli.cfg, cli.cfg.dataset);
    n_frames = std::min(n_frames, ds.size());
    images.resize(static_cast<size_t>(n_frames));
    factory = [&](int) { return std::make_unique<NeuralWorkerModel>(models, ds, &images); };
  } else {
    factory = [&](int) {
      return std::make_unique<SleepWorkerModel>(cli.cfg.tg_ms, cli.cfg.tw_ms);
    };
  }

  TimingReport report;
  if (cli.cfg.sim_mode == "sequential") {
    auto model = factory(0);
    report = run_sequential(n_frames, *model, cli.cfg.num_warps, cli.cfg.input_fps);
  } else {
    SchedulerConfig sc;
    sc.n_workers = cli.cfg.workers;
    sc.num_warps = cli.cfg.num_warps;
    sc.cache_pipeline_depth = cli.cfg.cache_depth;
    sc.queue_bound = cli.cfg.queue_bound;
    sc.input_fps = cli.cfg.input_fps;
    report = run_parallel(n_frames, factory, sc);
  }
  report.sync_overhead_ms = measure_sync_overhead(
      std::max(100, n_frames), factory, cli.cfg.num_warps);

  write_timing_csv(report, out + "/timing.csv");
  write_text(out + "/timing.json", timing_summary_json(report));
  if (real_models && cli.cfg.dump_images) {
    for (size_t f = 0; f < images.size(); ++f)
      if (images[f].defined()) {
        char name[32];
        std::snprintf(name, sizeof(name), "/frame_%05zu.png", f);
        write_png(images[f], out + name);
      }
  }
  std::cout << timing_summary_json(report) << "\n";
  return 0;
}

int cmd_ablate(Cli& cli) {
  cli.finalize();
  std::string out = cli.cfg.resolved_out_dir("ablate");
  fs::create_directories(out);
  cli.cfg.echo_to(out);
  Dataset train = load_or_generate(cli.cfg, cli.cfg.dataset);
  RunConfig test_cfg = cli.cfg;
  test_cfg.data_seed = (cli.cfg.data_seed >= 0 ? cli.cfg.data_seed : cli.cfg.seed) + 1;
  test_cfg.frames = std::max(32, cli.cfg.frames / 4);
  Dataset test = load_or_generate(test_cfg, cli.cfg.test_dataset);

  auto rows = run_ablation(train, test, cli.cfg.model_config(), cli.cfg.train_config(),
                           ablation_rows());
  write_ablation_csv(rows, out + "/ablation.csv");
  auto cache_rows = run_ablation(train, test, cli.cfg.model_config(), cli.cfg.train_config(),
                                 cache_layer_rows());
  write_ablation_csv(cache_rows, out + "/cache_layers.csv");
  for (const auto& r : rows)
    std::cout << r.name << ": psnr " << r.metrics.psnr << ", latency " << r.latency_ms << " ms\n";
  for (const auto& r : cache_rows)
    std::cout << r.name << ": psnr " << r.metrics.psnr << "\n";
  return 0;
}

int cmd_sweep_warp(Cli& cli) {
  cli.finalize();
  std::string out = cli.cfg.resolved_out_dir("sweep");
  fs::create_directories(out);
  cli.cfg.echo_to(out);
  Models models = load_models_from(cli.cfg);
  Dataset test = load_or_generate(cli.cfg, !cli.cfg.test_dataset.empty() ? cli.cfg.test_dataset
                                                                         : cli.cfg.dataset);
  auto sweep = warp_distance_sweep(models, test, cli.cfg.sweep_d_max, cli.cfg.sweep_stride);
  std::ofstream csv(out + "/warp_distance.csv");
  csv << "d,l1,psnr,ssim\n";
  for (const auto& [d, m] : sweep)
    csv << d << ',' << m.l1 << ',' << m.psnr << ',' << m.ssim << '\n';
  double r2 = linear_fit_r2(sweep);
  json j;
  for (const auto& [d, m] : sweep)
    j["sweep"].push_back({{"d", d}, {"psnr", m.psnr}});
  j["linear_fit_r2"] = r2;
  write_text(out + "/warp_distance.json", j.dump(2));
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_simulate(Cli& cli) {
  cli.finalize();
  std::string out = cli.cfg.resolved_out_dir("simulate");
  fs::create_directories(out);
  cli.cfg.echo_to(out);
  auto result = simulate_schedule(cli.cfg.sim_config());
  std::ofstream trace(out + "/trace.csv");
  trace << "t_start,t_end,worker,frame,role,cache_frame\n";
  for (const auto& e : result.events)
    trace << e.t_start << ',' << e.t_end << ',' << e.worker << ',' << e.frame << ','
          << (e.role == JobRole::kCache ? "cache" : "warp") << ',' << e.cache_frame << '\n';
  write_timing_csv(result.report, out + "/timing.csv");
  write_text(out + "/summary.json", timing_summary_json(result.report));
  std::cout << timing_summary_json(result.report) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural-cache renderer workbench"};
  app.require_subcommand(1);

  Cli gen, train, eval_, bench, ablate, sweep, sim;
  gen.attach(app.add_subcommand("gen-data", "generate a synthetic head dataset"));
  train.attach(app.add_subcommand("train", "train texture + generator + warp head"));
  eval_.attach(app.add_subcommand("eval", "evaluate a checkpoint under a protocol"));
  bench.attach(app.add_subcommand("bench", "run the real scheduler and report timings"));
  ablate.attach(app.add_subcommand("ablate", "train and score warp input ablations"));
  sweep.attach(app.add_subcommand("sweep-warp", "PSNR as a function of warp distance"));
  sim.attach(app.add_subcommand("simulate", "virtual-clock schedule simulation"));

  CLI11_PARSE(app, argc, argv);
  try {
    if (app.got_subcommand("gen-data")) return cmd_gen_data(gen);
    if (app.got_subcommand("train")) return cmd_train(train);
    if (app.got_subcommand("eval")) return cmd_eval(eval_);
    if (app.got_subcommand("bench")) return cmd_bench(bench);
    if (app.got_subcommand("ablate")) return cmd_ablate(ablate);
    if (app.got_subcommand("sweep-warp")) return cmd_sweep_warp(sweep);
    if (app.got_subcommand("simulate")) return cmd_simulate(sim);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
