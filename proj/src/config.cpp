#include "dndp/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace dndp {

namespace {

// Strict view over one YAML mapping: every key must be consumed.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(where(), "expected a mapping");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!present(key)) return;
    try {
      out = node_[key].template as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(join(key), "invalid value");
    }
  }

  Section child(const std::string& key) {
    if (!present(key)) return Section(YAML::Node(), join(key));
    return Section(node_[key], join(key));
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.contains(key)) throw ConfigError(join(key), "unknown key");
    }
  }

 private:
  bool present(const std::string& key) {
    if (!node_ || !node_.IsMap()) return false;
    seen_.insert(key);
    return static_cast<bool>(node_[key]);
  }
  std::string where() const { return path_.empty() ? "<root>" : path_; }
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_schedule(Section s, ScheduleConfig& out) {
  s.read("steps", out.steps);
  s.read("beta1", out.beta1);
  s.read("beta_end", out.beta_end);
  s.finish();
}

void read_tau(Section s, TauConfig& out) {
  s.read("dense_end", out.dense_end);
  s.read("dense_stride", out.dense_stride);
  s.read("sparse_stride", out.sparse_stride);
  s.finish();
}

void read_lambda(Section s, LambdaConfig& out) {
  s.read("policy", out.policy);
  s.read("lambda0", out.lambda0);
  s.read("a", out.a);
  s.read("b", out.b);
  s.read("c", out.c);
  s.read("smoothing_radius", out.smoothing_radius);
  s.finish();
}

void read_stage(Section s, StageConfig& out) {
  read_schedule(s.child("schedule"), out.schedule);
  read_tau(s.child("tau"), out.tau);
  s.read("checkpoint", out.checkpoint);
  read_lambda(s.child("lambda"), out.lambda);
  s.finish();
}

LambdaPolicy policy_from(const LambdaConfig& c, const std::string& field) {
  LambdaPolicy policy = [&]() -> LambdaPolicy {
    if (c.policy == "conslam") return ConsLam{c.lambda0};
    if (c.policy == "adalam1") return AdaLamI{c.lambda0, c.a, c.b};
    if (c.policy == "adalam2") return AdaLamII{c.lambda0, c.c};
    if (c.policy == "combined") return CombinedLam{c.lambda0, c.a, c.b, c.c};
    throw ConfigError(field + ".policy", "expected conslam, adalam1, adalam2 or combined");
  }();
  policy.smoothing_radius = c.smoothing_radius;
  return policy;
}

template <typename Fn>
void check(const std::string& field, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

TauSchedule tau_from(const StageConfig& s) {
  return make_tau(s.schedule.steps, s.tau.dense_end, s.tau.dense_stride, s.tau.sparse_stride);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose) {
  std::uint64_t x = seed * 0x9e3779b97f4a7c15ULL + purpose;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : std::filesystem::path(output_dir) / p;
}

NoiseSchedule RunConfig::lr_schedule() const {
  return linear_beta_schedule(lr_stage.schedule.steps, lr_stage.schedule.beta1,
                              lr_stage.schedule.beta_end);
}

NoiseSchedule RunConfig::hr_schedule() const {
  return linear_beta_schedule(hr_stage.schedule.steps, hr_stage.schedule.beta1,
                              hr_stage.schedule.beta_end);
}

PhantomSpec RunConfig::phantom_spec(std::uint64_t spec_seed) const {
  PhantomSpec spec;
  spec.width = phantom.width;
  spec.height = phantom.height;
  spec.min_ellipses = phantom.min_ellipses;
  spec.max_ellipses = phantom.max_ellipses;
  spec.intensity_lo = phantom.intensity_lo;
  spec.intensity_hi = phantom.intensity_hi;
  spec.background = phantom.background;
  spec.seed = spec_seed;
  return spec;
}

NoiseModel RunConfig::noise_model() const {
  if (noise.model == "additive_gaussian") return AdditiveGaussian{noise.sigma};
  if (noise.model == "variable_gaussian") return VariableGaussian{noise.sigma_min, noise.sigma_max};
  if (noise.model == "signal_dependent") return SignalDependent{noise.base, noise.gain};
  throw ConfigError("noise.model",
                    "expected additive_gaussian, variable_gaussian or signal_dependent");
}

LambdaPolicy RunConfig::lr_policy() const { return policy_from(lr_stage.lambda, "lr_stage.lambda"); }
LambdaPolicy RunConfig::hr_policy() const { return policy_from(hr_stage.lambda, "hr_stage.lambda"); }

CascadeConfig RunConfig::cascade(std::uint64_t run_seed) const {
  DenoiseConfig lr{tau_from(lr_stage), lr_policy(), denoise.averaging, 0, run_seed, workers};
  DenoiseConfig hr{tau_from(hr_stage), hr_policy(), denoise.averaging, denoise.rollback,
                   run_seed + 0x5bd1e995ULL, workers};
  return {denoise.k, lr, hr};
}

RunConfig preset(const std::string& name) {
  RunConfig cfg;
  cfg.lr_stage.checkpoint = "models/lr.ckpt";
  cfg.hr_stage.checkpoint = "models/hr.ckpt";
  if (name == "toy") {
    cfg.lr_stage.lambda = {"conslam", 0.1, 0.0, 0.0, 0.0, 0};
    cfg.hr_stage.lambda = {"combined", 0.45, 22.0, -0.38, 1.0, 8};
    cfg.denoise = {2, 10, 11};
    cfg.ablation = {{0.15, 0.3, 0.7, 1.0}, 2};
    return cfg;
  }
  if (name == "paper") {
    for (StageConfig* s : {&cfg.lr_stage, &cfg.hr_stage}) {
      s->schedule = {2000, 1e-6, 1e-2};
      s->tau = {501, 20, 500};
    }
    cfg.lr_stage.lambda = {"conslam", 0.002, 0.0, 0.0, 0.0, 0};
    cfg.hr_stage.lambda = {"combined", 0.0075, 1.5, -0.01, 0.3, 0};
    cfg.denoise = {2, 10, 41};
    cfg.ablation.grid = {0.0025, 0.005, 0.0075, 0.01, 0.0125};
    return cfg;
  }
  throw ConfigError("preset", "unknown preset '" + name + "' (expected toy or paper)");
}

RunConfig parse_config(const std::string& yaml_text, RunConfig cfg) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("<root>", std::string("YAML parse error: ") + e.what());
  }
  Section top(root, "");
  top.read("seed", cfg.seed);
  top.read("workers", cfg.workers);
  top.read("output_dir", cfg.output_dir);

  Section ph = top.child("phantom");
  ph.read("width", cfg.phantom.width);
  ph.read("height", cfg.phantom.height);
  ph.read("min_ellipses", cfg.phantom.min_ellipses);
  ph.read("max_ellipses", cfg.phantom.max_ellipses);
  ph.read("intensity_lo", cfg.phantom.intensity_lo);
  ph.read("intensity_hi", cfg.phantom.intensity_hi);
  ph.read("background", cfg.phantom.background);
  ph.read("train_count", cfg.phantom.train_count);
  ph.read("test_count", cfg.phantom.test_count);
  ph.finish();

  Section nz = top.child("noise");
  nz.read("model", cfg.noise.model);
  nz.read("sigma", cfg.noise.sigma);
  nz.read("sigma_min", cfg.noise.sigma_min);
  nz.read("sigma_max", cfg.noise.sigma_max);
  nz.read("base", cfg.noise.base);
  nz.read("gain", cfg.noise.gain);
  nz.finish();

  Section data = top.child("data");
  data.read("train_clean", cfg.data.train_clean);
  data.read("test_clean", cfg.data.test_clean);
  data.read("test_noisy", cfg.data.test_noisy);
  data.read("manifest", cfg.data.manifest);
  data.finish();

  Section model = top.child("model");
  model.read("width", cfg.model.width);
  model.read("dilations", cfg.model.dilations);
  model.read("train_steps", cfg.model.train_steps);
  model.read("batch", cfg.model.batch);
  model.read("learning_rate", cfg.model.learning_rate);
  model.read("hr_crop", cfg.model.hr_crop);
  model.finish();

  read_stage(top.child("lr_stage"), cfg.lr_stage);
  read_stage(top.child("hr_stage"), cfg.hr_stage);

  Section dn = top.child("denoise");
  dn.read("k", cfg.denoise.k);
  dn.read("averaging", cfg.denoise.averaging);
  dn.read("rollback", cfg.denoise.rollback);
  dn.finish();

  Section ab = top.child("ablation");
  ab.read("grid", cfg.ablation.grid);
  ab.read("averaging", cfg.ablation.averaging);
  ab.finish();

  Section sm = top.child("sample");
  sm.read("count", cfg.sample_count);
  sm.finish();

  top.finish();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

void validate(const RunConfig& cfg) {
  if (cfg.workers < 1) throw ConfigError("workers", "must be >= 1");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");

  check("phantom", [&] {
    const PhantomConfig& p = cfg.phantom;
    if (p.train_count < 1) throw ConfigError("phantom.train_count", "must be >= 1");
    if (p.test_count < 1) throw ConfigError("phantom.test_count", "must be >= 1");
    if (p.width < 11 || p.height < 11) throw ConfigError("phantom.width", "images must be at least 11x11");
    if (p.min_ellipses < 1 || p.max_ellipses < p.min_ellipses) {
      throw ConfigError("phantom.min_ellipses", "need 1 <= min_ellipses <= max_ellipses");
    }
    if (!(0.0 <= p.intensity_lo && p.intensity_lo <= p.intensity_hi && p.intensity_hi <= 1.0)) {
      throw ConfigError("phantom.intensity_lo", "need 0 <= intensity_lo <= intensity_hi <= 1");
    }
    if (!(0.0 <= p.background && p.background <= 1.0)) {
      throw ConfigError("phantom.background", "must lie in [0, 1]");
    }
  });
  check("noise", [&] { validate(cfg.noise_model()); });

  const int k = cfg.denoise.k;
  if (k < 2) throw ConfigError("denoise.k", "must be >= 2");
  if (cfg.phantom.width % k != 0 || cfg.phantom.height % k != 0) {
    throw ConfigError("denoise.k", "phantom dimensions must be divisible by k");
  }
  if (cfg.denoise.averaging < 1) throw ConfigError("denoise.averaging", "must be >= 1");

  check("model", [&] {
    const ModelConfig& m = cfg.model;
    if (m.width < 1 || m.width > 64) throw ConfigError("model.width", "must be in [1, 64]");
    if (m.dilations.size() < 3 || m.dilations.size() > 5) {
      throw ConfigError("model.dilations", "network must have 3 to 5 layers");
    }
    for (int d : m.dilations) {
      if (d < 1) throw ConfigError("model.dilations", "dilations must be >= 1");
    }
    if (m.train_steps < 0) throw ConfigError("model.train_steps", "must be >= 0");
    if (m.batch < 1) throw ConfigError("model.batch", "must be >= 1");
    if (!(m.learning_rate > 0.0)) throw ConfigError("model.learning_rate", "must be > 0");
    if (m.hr_crop < 0) throw ConfigError("model.hr_crop", "must be >= 0");
  });

  check("lr_stage.schedule", [&] { (void)cfg.lr_schedule(); });
  check("hr_stage.schedule", [&] { (void)cfg.hr_schedule(); });
  check("lr_stage.tau", [&] { (void)tau_from(cfg.lr_stage); });
  check("hr_stage.tau", [&] { (void)tau_from(cfg.hr_stage); });
  check("lr_stage.lambda", [&] { (void)cfg.lr_policy(); });
  check("hr_stage.lambda", [&] { (void)cfg.hr_policy(); });
  if (cfg.lr_policy().adaptive()) {
    throw ConfigError("lr_stage.lambda.policy", "adaptive refinement is only applied in the HR stage");
  }
  if (cfg.hr_stage.lambda.smoothing_radius < 0) {
    throw ConfigError("hr_stage.lambda.smoothing_radius", "must be >= 0");
  }
  check("denoise.rollback", [&] { validate(cfg.cascade(cfg.seed).hr_stage); });
  if (cfg.lr_stage.checkpoint.empty()) throw ConfigError("lr_stage.checkpoint", "must be set");
  if (cfg.hr_stage.checkpoint.empty()) throw ConfigError("hr_stage.checkpoint", "must be set");
  if (cfg.ablation.averaging < 1) throw ConfigError("ablation.averaging", "must be >= 1");
  for (double v : cfg.ablation.grid) {
    if (!(v >= 0.0)) throw ConfigError("ablation.grid", "lambda values must be >= 0");
  }
  if (cfg.sample_count < 0) throw ConfigError("sample.count", "must be >= 0");
}

}  // namespace dndp
