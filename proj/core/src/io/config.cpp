#include "lamod/io/config.hpp"

#include <functional>
#include <set>

#include "json.hpp"
#include "lamod/error.hpp"
#include "lamod/io/files.hpp"

namespace lamod::io {

using nlohmann::json;

Grid2 RunConfig::make_grid() const { return Grid2::make(grid.height, grid.width, grid.spacing); }

MetricOperator RunConfig::make_metric() const { return MetricOperator(make_grid(), metric); }

ShootingConfig RunConfig::make_shooting() const { return ShootingConfig(make_metric(), shooting.num_steps); }

RegistrationConfig RunConfig::make_registration() const {
  RegistrationConfig r(make_shooting());
  r.sigma = registration.sigma;
  r.learning_rate = registration.learning_rate;
  if (registration.pair_optimizer == "sobolev") {
    r.optimizer = PairOptimizer::SobolevDescent;
  } else if (registration.pair_optimizer == "adam") {
    r.optimizer = PairOptimizer::Adam;
  } else {
    throw ConfigError("config key 'registration.pair_optimizer': expected \"sobolev\" or \"adam\", got \"" +
                      registration.pair_optimizer + "\"");
  }
  r.pair_learning_rate = registration.pair_learning_rate;
  r.max_iterations = registration.max_iterations;
  r.convergence_tol = registration.convergence_tol;
  r.validate();
  return r;
}

nn::UNetConfig RunConfig::make_unet() const {
  nn::UNetConfig u;
  u.in_channels = 2;
  u.base_channels = nets.base_channels;
  u.latent_channels = nets.latent_channels;
  u.num_down = nets.num_down;
  u.time_embed_dim = nets.time_embed_dim;
  u.seed = seed;
  u.validate();
  return u;
}

DiffusionConfig RunConfig::make_diffusion() const {
  DiffusionConfig d;
  d.schedule = make_schedule(diffusion.steps, diffusion.beta_start, diffusion.beta_end);
  d.kernel = SmoothingKernel::make(diffusion.kernel_std, diffusion.kernel_radius);
  d.loss_alpha = diffusion.loss_alpha;
  d.lambda_eps = diffusion.lambda_eps;
  d.lambda_motion = diffusion.lambda_motion;
  d.learning_rate = diffusion.learning_rate;
  d.batch_size = diffusion.batch_size;
  d.max_epochs = diffusion.max_epochs;
  d.patience = diffusion.patience;
  d.squared_noise_loss = diffusion.squared_noise_loss;
  d.masked_motion_loss = diffusion.masked_motion_loss;
  d.seed = seed;
  d.validate();
  return d;
}

PhantomConfig RunConfig::make_phantom() const {
  PhantomConfig p;
  p.grid = make_grid();
  p.frames = phantom.frames;
  p.r_inner = phantom.r_inner;
  p.r_outer = phantom.r_outer;
  p.contraction_amp = phantom.contraction_amp;
  p.twist_amp = phantom.twist_amp;
  p.intensity_std = phantom.intensity_std;
  p.supersample = phantom.supersample;
  p.seed = seed;
  p.validate();
  return p;
}

void RunConfig::validate() const {
  make_registration();
  make_unet();
  make_diffusion();
  make_phantom();
  const std::size_t f = std::size_t{1} << nets.num_down;
  if (grid.height % static_cast<int>(f) != 0 || grid.width % static_cast<int>(f) != 0) {
    throw ConfigError("grid size must be divisible by 2^nets.num_down");
  }
}

namespace {

// Walks every key of a RunConfig with a JsonReader or JsonWriter.
template <typename V>
void visit(V& v, RunConfig& c) {
  v.section("grid", [&] {
    v.value("height", c.grid.height);
    v.value("width", c.grid.width);
    v.value("spacing", c.grid.spacing);
  });
  v.section("metric", [&] {
    v.value("alpha", c.metric.alpha);
    v.value("gamma", c.metric.gamma);
    v.value("power", c.metric.power);
  });
  v.section("shooting", [&] { v.value("num_steps", c.shooting.num_steps); });
  v.section("registration", [&] {
    auto& r = c.registration;
    v.value("sigma", r.sigma);
    v.value("learning_rate", r.learning_rate);
    v.value("pair_optimizer", r.pair_optimizer);
    v.value("pair_learning_rate", r.pair_learning_rate);
    v.value("max_iterations", r.max_iterations);
    v.value("convergence_tol", r.convergence_tol);
    v.value("network_epochs", r.network_epochs);
  });
  v.section("nets", [&] {
    v.value("base_channels", c.nets.base_channels);
    v.value("latent_channels", c.nets.latent_channels);
    v.value("num_down", c.nets.num_down);
    v.value("time_embed_dim", c.nets.time_embed_dim);
  });
  v.section("diffusion", [&] {
    auto& d = c.diffusion;
    v.value("steps", d.steps);
    v.value("beta_start", d.beta_start);
    v.value("beta_end", d.beta_end);
    v.value("kernel_std", d.kernel_std);
    v.value("kernel_radius", d.kernel_radius);
    v.value("loss_alpha", d.loss_alpha);
    v.value("lambda_eps", d.lambda_eps);
    v.value("lambda_motion", d.lambda_motion);
    v.value("learning_rate", d.learning_rate);
    v.value("batch_size", d.batch_size);
    v.value("max_epochs", d.max_epochs);
    v.value("patience", d.patience);
    v.value("squared_noise_loss", d.squared_noise_loss);
    v.value("masked_motion_loss", d.masked_motion_loss);
    v.value("normalize_latents", d.normalize_latents);
  });
  v.section("phantom", [&] {
    auto& p = c.phantom;
    v.value("frames", p.frames);
    v.value("r_inner", p.r_inner);
    v.value("r_outer", p.r_outer);
    v.value("contraction_amp", p.contraction_amp);
    v.value("twist_amp", p.twist_amp);
    v.value("intensity_std", p.intensity_std);
    v.value("supersample", p.supersample);
    v.section("ranges", [&] {
      auto& r = p.ranges;
      v.value("contraction_min", r.contraction_min);
      v.value("contraction_max", r.contraction_max);
      v.value("twist_min", r.twist_min);
      v.value("twist_max", r.twist_max);
      v.value("r_inner_min", r.r_inner_min);
      v.value("r_inner_max", r.r_inner_max);
      v.value("thickness_min", r.thickness_min);
      v.value("thickness_max", r.thickness_max);
      v.value("center_jitter", r.center_jitter);
    });
  });
  v.value("seed", c.seed);
}

class JsonWriter {
 public:
  json root = json::object();

  void section(const char* name, const std::function<void()>& body) {
    json* parent = cur_;
    (*parent)[name] = json::object();
    cur_ = &(*parent)[name];
    body();
    cur_ = parent;
  }
  template <typename T>
  void value(const char* key, T& v) {
    (*cur_)[key] = v;
  }

 private:
  json* cur_ = &root;
};

class JsonReader {
 public:
  explicit JsonReader(const json& root) : cur_(&root) { check_object(root, ""); }

  void section(const char* name, const std::function<void()>& body) {
    const json* parent = cur_;
    const std::string parent_path = path_;
    mark(name);
    if (!parent->contains(name)) return;
    const json& child = (*parent)[name];
    path_ = key_path(name);
    check_object(child, path_);
    cur_ = &child;
    body();
    cur_ = parent;
    path_ = parent_path;
  }

  void value(const char* key, int& v) {
    if (const json* j = find(key)) {
      if (!j->is_number_integer()) fail(key, "expected an integer");
      v = j->get<int>();
    }
  }
  void value(const char* key, double& v) {
    if (const json* j = find(key)) {
      if (!j->is_number()) fail(key, "expected a number");
      v = j->get<double>();
    }
  }
  void value(const char* key, bool& v) {
    if (const json* j = find(key)) {
      if (!j->is_boolean()) fail(key, "expected true or false");
      v = j->get<bool>();
    }
  }
  void value(const char* key, std::string& v) {
    if (const json* j = find(key)) {
      if (!j->is_string()) fail(key, "expected a string");
      v = j->get<std::string>();
    }
  }
  void value(const char* key, std::size_t& v) {
    if (const json* j = find(key)) {
      if (!j->is_number_unsigned()) fail(key, "expected a non-negative integer");
      v = j->get<std::size_t>();
    }
  }

  // Reports keys that no visitor call consumed.
  void finish(const json& root) const { check_unknown(root, ""); }

 private:
  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void mark(const char* key) { seen_.insert(key_path(key)); }

  const json* find(const char* key) {
    mark(key);
    auto it = cur_->find(key);
    return it == cur_->end() ? nullptr : &*it;
  }

  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError("config key '" + key_path(key) + "': " + what);
  }

  static void check_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config " + (path.empty() ? std::string("document") : "section '" + path + "'") +
                                          " must be a JSON object");
  }

  void check_unknown(const json& j, const std::string& path) const {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string p = path.empty() ? it.key() : path + "." + it.key();
      if (!seen_.count(p)) throw ConfigError("unknown config key '" + p + "'");
      if (it->is_object()) check_unknown(*it, p);
    }
  }

  const json* cur_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  JsonReader r(root);
  visit(r, cfg);
  r.finish(root);
  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_text(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string dump_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  JsonWriter w;
  visit(w, copy);
  return w.root.dump(2) + "\n";
}

}  // namespace lamod::io
