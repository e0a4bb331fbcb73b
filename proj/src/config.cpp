#include "ncr/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ncr {

namespace {

struct Field {
  enum class Kind { kInt, kDouble, kBool, kString };
  Kind kind = Kind::kInt;
  int RunConfig::*i = nullptr;
  double RunConfig::*d = nullptr;
  bool RunConfig::*b = nullptr;
  std::string RunConfig::*s = nullptr;
};

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> m;
    auto I = [&m](const char* k, int RunConfig::*p) {
      Field f;
      f.kind = Field::Kind::kInt;
      f.i = p;
      m[k] = f;
    };
    auto D = [&m](const char* k, double RunConfig::*p) {
      Field f;
      f.kind = Field::Kind::kDouble;
      f.d = p;
      m[k] = f;
    };
    auto B = [&m](const char* k, bool RunConfig::*p) {
      Field f;
      f.kind = Field::Kind::kBool;
      f.b = p;
      m[k] = f;
    };
    auto S = [&m](const char* k, std::string RunConfig::*p) {
      Field f;
      f.kind = Field::Kind::kString;
      f.s = p;
      m[k] = f;
    };
    I("seed", &RunConfig::seed);
    I("data_seed", &RunConfig::data_seed);
    I("frames", &RunConfig::frames);
    I("fps", &RunConfig::fps);
    I("res", &RunConfig::res);
    I("expr_dims", &RunConfig::expr_dims);
    D("jitter_sigma", &RunConfig::jitter_sigma);
    I("tex_channels", &RunConfig::tex_channels);
    I("tex_size", &RunConfig::tex_size);
    I("gen_depth", &RunConfig::gen_depth);
    I("gen_base", &RunConfig::gen_base);
    B("use_upconv", &RunConfig::use_upconv);
    B("use_lpf", &RunConfig::use_lpf);
    B("two_frame_input", &RunConfig::two_frame_input);
    I("warp_embed", &RunConfig::warp_embed);
    I("warp_c1", &RunConfig::warp_c1);
    I("warp_c2", &RunConfig::warp_c2);
    B("warp_concat_uv", &RunConfig::warp_concat_uv);
    B("warp_use_theta", &RunConfig::warp_use_theta);
    B("warp_use_mlp", &RunConfig::warp_use_mlp);
    B("warp_sh_pose", &RunConfig::warp_sh_pose);
    B("warp_sh_skips", &RunConfig::warp_sh_skips);
    B("warp_exwarp", &RunConfig::warp_exwarp);
    B("warp_exp", &RunConfig::warp_exp);
    B("warp_use_c4", &RunConfig::warp_use_c4);
    B("warp_use_c5", &RunConfig::warp_use_c5);
    I("epochs", &RunConfig::epochs);
    I("batch", &RunConfig::batch);
    D("lr_nets", &RunConfig::lr_nets);
    D("lr_texture", &RunConfig::lr_texture);
    D("beta1", &RunConfig::beta1);
    D("beta2", &RunConfig::beta2);
    D("lambda_tex", &RunConfig::lambda_tex);
    D("lambda_img", &RunConfig::lambda_img);
    D("lambda_p", &RunConfig::lambda_p);
    D("warp_base_img", &RunConfig::warp_base_img);
    B("crop", &RunConfig::crop);
    D("crop_frac", &RunConfig::crop_frac);
    I("d_min", &RunConfig::d_min);
    I("d_max", &RunConfig::d_max);
    D("curriculum_frac", &RunConfig::curriculum_frac);
    B("train_warp", &RunConfig::train_warp);
    I("workers", &RunConfig::workers);
    I("num_warps", &RunConfig::num_warps);
    I("cache_depth", &RunConfig::cache_depth);
    I("queue_bound", &RunConfig::queue_bound);
    D("tg_ms", &RunConfig::tg_ms);
    D("tw_ms", &RunConfig::tw_ms);
    D("tsync_ms", &RunConfig::tsync_ms);
    D("input_fps", &RunConfig::input_fps);
    I("sim_frames", &RunConfig::sim_frames);
    S("sim_mode", &RunConfig::sim_mode);
    B("drop_stale", &RunConfig::drop_stale);
    S("protocol", &RunConfig::protocol);
    I("eval_warps", &RunConfig::eval_warps);
    I("sweep_d_max", &RunConfig::sweep_d_max);
    I("sweep_stride", &RunConfig::sweep_stride);
    I("threads", &RunConfig::threads);
    B("dump_images", &RunConfig::dump_images);
    S("out_dir", &RunConfig::out_dir);
    S("dataset", &RunConfig::dataset);
    S("test_dataset", &RunConfig::test_dataset);
    S("checkpoint", &RunConfig::checkpoint);
    return m;
  }();
  return table;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown configuration key: " + key);
  const Field& f = it->second;
  try {
    switch (f.kind) {
      case Field::Kind::kInt:
        this->*(f.i) = std::stoi(value);
        break;
      case Field::Kind::kDouble:
        this->*(f.d) = std::stod(value);
        break;
      case Field::Kind::kBool:
        this->*(f.b) = parse_bool(value);
        break;
      case Field::Kind::kString:
        this->*(f.s) = value;
        break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("bad value '" + value + "' for key '" + key + "'");
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::string line;
  int ln = 0;
  while (std::getline(is, line)) {
    ++ln;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(ln) + ": expected key=value");
    auto strip = [](std::string s) {
      auto a = s.find_first_not_of(" \t");
      auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  for (const auto& [key, f] : fields()) {
    os << key << '=';
    switch (f.kind) {
      case Field::Kind::kInt:
        os << this->*(f.i);
        break;
      case Field::Kind::kDouble:
        os << this->*(f.d);
        break;
      case Field::Kind::kBool:
        os << (this->*(f.b) ? 1 : 0);
        break;
      case Field::Kind::kString:
        os << this->*(f.s);
        break;
    }
    os << '\n';
  }
  return os.str();
}

void RunConfig::echo_to(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir + "/config.effective");
  os << echo();
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, f] : fields()) out.push_back(key);
  return out;
}

GenDataConfig RunConfig::gen_data_config() const {
  GenDataConfig g;
  g.seed = static_cast<uint32_t>(data_seed >= 0 ? data_seed : seed);
  g.n_frames = frames;
  g.fps = fps;
  g.res = res;
  g.expr_dims = expr_dims;
  g.jitter_sigma = jitter_sigma;
  return g;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.res = res;
  m.tex_channels = tex_channels;
  m.tex_size = tex_size;
  m.gen.depth = gen_depth;
  m.gen.base = gen_base;
  m.gen.tex_channels = tex_channels;
  m.gen.use_upconv = use_upconv;
  m.gen.use_lpf = use_lpf;
  m.gen.two_frame_input = two_frame_input;
  m.wiring.concat_uv = warp_concat_uv;
  m.wiring.use_theta = warp_use_theta;
  m.wiring.use_mlp = warp_use_mlp;
  m.wiring.sh_pose = warp_sh_pose;
  m.wiring.sh_skips = warp_sh_skips;
  m.wiring.exwarp = warp_exwarp;
  m.wiring.exp = warp_exp;
  m.wiring.use_c4 = warp_use_c4;
  m.wiring.use_c5 = warp_use_c5;
  m.warp_embed = warp_embed;
  m.warp_c1 = warp_c1;
  m.warp_c2 = warp_c2;
  m.expr_dims = expr_dims;
  m.seed = static_cast<uint32_t>(seed);
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.lr_nets = static_cast<float>(lr_nets);
  t.lr_texture = static_cast<float>(lr_texture);
  t.beta1 = static_cast<float>(beta1);
  t.beta2 = static_cast<float>(beta2);
  t.batch = batch;
  t.seed = static_cast<uint32_t>(seed);
  t.crop = crop;
  t.crop_frac = crop_frac;
  t.d_min = d_min;
  t.d_max = d_max;
  t.curriculum_frac = curriculum_frac;
  t.train_warp = train_warp;
  t.weights.lambda_tex = static_cast<float>(lambda_tex);
  t.weights.lambda_img = static_cast<float>(lambda_img);
  t.weights.lambda_p = static_cast<float>(lambda_p);
  t.weights.warp_base_img = static_cast<float>(warp_base_img);
  return t;
}

ProtocolConfig RunConfig::protocol_config() const {
  ProtocolConfig p;
  p.num_warps = eval_warps;
  p.n_workers = workers;
  p.tg_ms = tg_ms;
  p.tw_ms = tw_ms;
  p.tsync_ms = tsync_ms;
  return p;
}

SimConfig RunConfig::sim_config() const {
  SimConfig s;
  s.sequential = sim_mode == "sequential";
  s.queued = !s.sequential;
  s.drop_stale = drop_stale;
  s.n_workers = workers;
  s.num_warps = num_warps;
  s.cache_pipeline_depth = cache_depth;
  s.tg_ms = tg_ms;
  s.tw_ms = tw_ms;
  s.tsync_ms = tsync_ms;
  s.input_fps = input_fps;
  s.n_frames = sim_frames;
  return s;
}

std::string RunConfig::resolved_out_dir(const std::string& leaf) const {
  if (!out_dir.empty()) return out_dir;
  const char* root = std::getenv("NCR_OUT_ROOT");
  std::string base = root && *root ? root : "out";
  return base + "/" + leaf;
}

}  // namespace ncr
