#include "dndp/cascade.hpp"
#include "dndp/config.hpp"
#include "dndp/io.hpp"
#include "dndp/metrics.hpp"
#include "dndp/parallel.hpp"
#include "dndp/phantom.hpp"
#include "dndp/prior.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace dndp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Runs R <= 65536 use seed + r, so images are spaced apart.
constexpr std::uint64_t kImageSeedStride = 1ULL << 16;

std::string indexed(const std::string& stem, std::size_t i, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04zu", i);
  return stem + buf + ext;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_image(const fs::path& dir, const std::string& name, const Image& img) {
  fs::create_directories(dir);
  io::write_png16(dir / (name + ".png"), img);
  io::write_raw(dir / (name + ".raw"), img);
}

void require_file(const fs::path& p, const std::string& field) {
  if (!fs::exists(p)) throw ConfigError(field, "file not found: " + p.string());
}

double rms(const Image& img) { return std::sqrt(img.square().mean()); }

struct Models {
  NetMeanPredictor lr;
  NetMeanPredictor hr;
};

Models load_models(const RunConfig& cfg) {
  return {NetMeanPredictor(cfg.lr_schedule(),
                           io::load_checkpoint(cfg.resolve(cfg.lr_stage.checkpoint),
                                               io::CheckpointKind::unconditional)),
          NetMeanPredictor(cfg.hr_schedule(),
                           io::load_checkpoint(cfg.resolve(cfg.hr_stage.checkpoint),
                                               io::CheckpointKind::conditional))};
}

void check_models_exist(const RunConfig& cfg) {
  require_file(cfg.resolve(cfg.lr_stage.checkpoint), "lr_stage.checkpoint");
  require_file(cfg.resolve(cfg.hr_stage.checkpoint), "hr_stage.checkpoint");
}

void check_test_set_exists(const RunConfig& cfg) {
  require_file(cfg.resolve(cfg.data.test_clean), "data.test_clean");
  require_file(cfg.resolve(cfg.data.test_noisy), "data.test_noisy");
}

struct TestSet {
  std::vector<Image> clean;
  std::vector<Image> noisy;
};

TestSet load_test_set(const RunConfig& cfg) {
  TestSet t{io::read_dataset(cfg.resolve(cfg.data.test_clean)),
            io::read_dataset(cfg.resolve(cfg.data.test_noisy))};
  if (t.clean.size() != t.noisy.size()) {
    throw std::runtime_error("test_clean and test_noisy hold different image counts");
  }
  for (std::size_t i = 0; i < t.clean.size(); ++i) {
    require_same_shape(t.clean[i], t.noisy[i], "test set");
    if (t.noisy[i].rows() % cfg.denoise.k != 0 || t.noisy[i].cols() % cfg.denoise.k != 0) {
      throw ConfigError("denoise.k", "test images are not divisible by k");
    }
  }
  return t;
}

std::uint64_t image_seed(const RunConfig& cfg, std::size_t i) {
  return derive_seed(cfg.seed, seed_purpose::denoising) + i * kImageSeedStride;
}

CascadeConfig serial_cascade(const RunConfig& cfg, std::uint64_t seed) {
  CascadeConfig c = cfg.cascade(seed);
  c.lr_stage.workers = 1;
  c.hr_stage.workers = 1;
  return c;
}

// --------------------------------------------------------------------------

int cmd_gen_phantoms(const RunConfig& cfg) {
  const auto train = generate_phantoms(cfg.phantom_spec(derive_seed(cfg.seed, seed_purpose::train_phantoms)),
                                       cfg.phantom.train_count);
  const auto test = generate_phantoms(cfg.phantom_spec(derive_seed(cfg.seed, seed_purpose::test_phantoms)),
                                      cfg.phantom.test_count);
  const NoiseModel nm = cfg.noise_model();
  const std::uint64_t noise_base = derive_seed(cfg.seed, seed_purpose::corruption);

  std::vector<Image> noisy(test.size());
  std::vector<double> levels(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    auto c = corrupt(test[i], nm, noise_base + i);
    noisy[i] = std::move(c.y0);
    levels[i] = c.sigma;
  }

  for (const auto* field : {&cfg.data.train_clean, &cfg.data.test_clean, &cfg.data.test_noisy,
                            &cfg.data.manifest}) {
    ensure_parent(cfg.resolve(*field));
  }
  io::write_dataset(cfg.resolve(cfg.data.train_clean), train);
  io::write_dataset(cfg.resolve(cfg.data.test_clean), test);
  io::write_dataset(cfg.resolve(cfg.data.test_noisy), noisy);

  io::CsvWriter manifest(cfg.resolve(cfg.data.manifest), "manifest",
                         {"index", "phantom_seed", "noise_seed", "noise_model", "sigma",
                          "realized_std", "input_psnr", "input_ssim"});
  const std::uint64_t test_seed = derive_seed(cfg.seed, seed_purpose::test_phantoms);
  for (std::size_t i = 0; i < test.size(); ++i) {
    // Statistics of the stored (float32) images so eval reproduces them.
    const Image x = test[i].cast<float>().cast<double>();
    const Image y = noisy[i].cast<float>().cast<double>();
    manifest.row(i, test_seed, noise_base + i, cfg.noise.model, levels[i], rms(y - x), psnr(y, x),
                 ssim(y, x));
  }
  std::cout << "wrote " << train.size() << " training and " << test.size() << " test phantoms\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  require_file(cfg.resolve(cfg.data.train_clean), "data.train_clean");
  const auto hr = io::read_dataset(cfg.resolve(cfg.data.train_clean));
  const int k = cfg.denoise.k;
  std::vector<Image> lr;
  std::vector<Image> cond;
  for (const Image& x : hr) {
    if (x.rows() % k != 0 || x.cols() % k != 0) {
      throw ConfigError("denoise.k", "training images are not divisible by k");
    }
    lr.push_back(downsample(x, k));
    cond.push_back(upsample_bicubic(lr.back(), k));
  }

  auto train_stage = [&](const std::string& name, int channels, const NoiseSchedule& s,
                         std::span<const Image> data, std::span<const Image> conditions, int crop,
                         std::uint64_t init, std::uint64_t stream, const std::string& checkpoint) {
    EpsNet<float> net(channels, cfg.model.width, cfg.model.dilations, s.steps());
    net.initialize(derive_seed(cfg.seed, init));
    const fs::path ckpt = cfg.resolve(checkpoint);
    ensure_parent(ckpt);
    io::CsvWriter log(ckpt.parent_path() / ("train_" + name + "_loss.csv"), "loss", {"step", "loss"});
    TrainOptions opt;
    opt.steps = cfg.model.train_steps;
    opt.batch = cfg.model.batch;
    opt.learning_rate = cfg.model.learning_rate;
    opt.crop = crop;
    opt.seed = derive_seed(cfg.seed, stream);
    double window = 0.0;
    opt.on_step = [&](int step, double loss) {
      log.row(step, loss);
      window += loss;
      if ((step + 1) % 250 == 0) {
        std::cout << name << " step " << step + 1 << " loss " << window / 250 << std::endl;
        window = 0.0;
      }
    };
    net = train_eps_predictor(std::move(net), data, conditions, s, opt);
    io::save_checkpoint(ckpt, net);
  };

  train_stage("lr", 1, cfg.lr_schedule(), lr, {}, 0, seed_purpose::lr_init,
              seed_purpose::lr_training, cfg.lr_stage.checkpoint);
  train_stage("hr", 2, cfg.hr_schedule(), hr, cond, cfg.model.hr_crop, seed_purpose::hr_init,
              seed_purpose::hr_training, cfg.hr_stage.checkpoint);
  return 0;
}

int cmd_sample(const RunConfig& cfg) {
  check_models_exist(cfg);
  if (cfg.sample_count == 0) return 0;
  const Models m = load_models(cfg);
  const int k = cfg.denoise.k;
  const auto n = static_cast<std::size_t>(cfg.sample_count);
  std::vector<Image> lr(n);
  std::vector<Image> hr(n);
  const std::uint64_t base = derive_seed(cfg.seed, seed_purpose::sampling);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    lr[i] = ancestral_sample(m.lr, cfg.phantom.height / k, cfg.phantom.width / k, nullptr, base + 2 * i);
    hr[i] = ancestral_sample(m.hr, cfg.phantom.height, cfg.phantom.width, &lr[i], base + 2 * i + 1);
  });
  const fs::path dir = cfg.resolve("samples");
  for (std::size_t i = 0; i < n; ++i) {
    write_image(dir, indexed("lr", i, ""), lr[i]);
    write_image(dir, indexed("hr", i, ""), hr[i]);
  }
  std::cout << "wrote " << n << " sample pairs to " << dir.string() << "\n";
  return 0;
}

int cmd_denoise(const RunConfig& cfg) {
  check_models_exist(cfg);
  check_test_set_exists(cfg);
  const Models m = load_models(cfg);
  const TestSet t = load_test_set(cfg);
  const std::size_t n = t.noisy.size();

  std::vector<CascadeResult> results(n);
  std::vector<double> seconds(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    results[i] = cascade_denoise(t.noisy[i], serial_cascade(cfg, image_seed(cfg, i)), m.lr, m.hr);
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  const fs::path dir = cfg.resolve("denoised");
  io::CsvWriter csv(cfg.resolve("denoise.csv"), "denoise",
                    {"index", "input_psnr", "input_ssim", "output_psnr", "output_ssim",
                     "lambda0_ada", "noise_std", "lambda_policy", "note"});
  // Wall time is kept apart so denoise.csv stays byte-reproducible.
  io::CsvWriter timing(cfg.resolve("denoise_timing.csv"), "timing", {"index", "wall_seconds"});
  double gain = 0.0;
  std::size_t compared = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Image& out = results[i].hr;
    write_image(dir, indexed("hr", i, ""), out);
    write_image(dir, indexed("lr", i, ""), results[i].lr);
    const Image stored = out.cast<float>().cast<double>();
    const double in_psnr = psnr(t.noisy[i], t.clean[i]);
    const double out_psnr = psnr(stored, t.clean[i]);
    const bool clean_input = std::isinf(in_psnr);
    if (!clean_input) {
      gain += out_psnr - in_psnr;
      ++compared;
    }
    csv.row(i, in_psnr, ssim(t.noisy[i], t.clean[i]), out_psnr, ssim(stored, t.clean[i]),
            results[i].refined.lambda0_ada, results[i].refined.noise_std,
            results[i].refined.policy.name(), clean_input ? "clean_input_comparison_skipped" : "");
    timing.row(i, seconds[i]);
  }
  std::cout << "denoised " << n << " images";
  if (compared > 0) std::cout << ", mean PSNR gain " << gain / static_cast<double>(compared) << " dB";
  std::cout << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  check_test_set_exists(cfg);
  const TestSet t = load_test_set(cfg);
  const fs::path dir = cfg.resolve("denoised");
  io::CsvWriter csv(cfg.resolve("eval.csv"), "eval",
                    {"index", "input_psnr", "input_ssim", "output_psnr", "output_ssim"});
  double sums[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < t.clean.size(); ++i) {
    const fs::path raw = dir / indexed("hr", i, ".raw");
    if (!fs::exists(raw)) throw std::runtime_error("missing denoised image " + raw.string());
    const Image out = io::read_raw(raw);
    const double v[4] = {psnr(t.noisy[i], t.clean[i]), ssim(t.noisy[i], t.clean[i]),
                         psnr(out, t.clean[i]), ssim(out, t.clean[i])};
    csv.row(i, v[0], v[1], v[2], v[3]);
    for (int j = 0; j < 4; ++j) sums[j] += v[j];
  }
  const auto n = static_cast<double>(t.clean.size());
  std::cout << "mean input PSNR " << sums[0] / n << " SSIM " << sums[1] / n << "\n"
            << "mean output PSNR " << sums[2] / n << " SSIM " << sums[3] / n << "\n";
  return 0;
}

struct AblationRow {
  std::string policy;
  double lambda0;
  double psnr;
  double ssim;
  double lambda0_ada;
  double noise_std;
};

// One image: shared LR stage and coarse HR pass, a full ConsLam run per grid
// value, and refinement plus roll-back resume for each adaptive policy.
std::vector<AblationRow> ablate_image(const RunConfig& cfg, const Models& m, const Image& y0,
                                      const Image& x0, std::uint64_t seed,
                                      const std::vector<double>& grid) {
  CascadeConfig c = serial_cascade(cfg, seed);
  c.lr_stage.averaging = cfg.ablation.averaging;
  c.hr_stage.averaging = cfg.ablation.averaging;
  const Image lr = denoise_average(downsample(y0, c.k), m.lr, m.lr.schedule(), c.lr_stage);
  const NoiseSchedule& s = m.hr.schedule();
  const LambdaConfig& lc = cfg.hr_stage.lambda;

  std::vector<AblationRow> rows;
  auto add = [&](const std::string& name, double lambda0, const Image& out, double ada, double nstd) {
    rows.push_back({name, lambda0, psnr(out, x0), ssim(out, x0), ada, nstd});
  };

  DenoiseConfig coarse_cfg = c.hr_stage;
  coarse_cfg.lambda = ConsLam{lc.lambda0};
  std::vector<DenoiseRun> coarse;
  Image coarse_mean = Image::Zero(y0.rows(), y0.cols());
  for (int r = 0; r < coarse_cfg.averaging; ++r) {
    DenoiseConfig run_cfg = coarse_cfg;
    run_cfg.seed = coarse_cfg.seed + static_cast<std::uint64_t>(r);
    coarse.push_back(denoise(y0, m.hr, s, run_cfg, &lr));
    coarse_mean += coarse.back().image;
  }
  coarse_mean /= static_cast<double>(coarse_cfg.averaging);

  for (double lambda0 : grid) {
    if (lambda0 == lc.lambda0) {
      add("ConsLam", lambda0, coarse_mean, lambda0, population_std(estimate_noise(y0, coarse_mean)));
      continue;
    }
    DenoiseConfig g = c.hr_stage;
    g.lambda = ConsLam{lambda0};
    const Image out = denoise_average(y0, m.hr, s, g, &lr);
    add("ConsLam", lambda0, out, lambda0, population_std(estimate_noise(y0, out)));
  }

  std::vector<LambdaPolicy> policies{AdaLamI{lc.lambda0, lc.a, lc.b}, AdaLamII{lc.lambda0, lc.c},
                                     CombinedLam{lc.lambda0, lc.a, lc.b, lc.c}};
  for (LambdaPolicy& p : policies) {
    p.smoothing_radius = lc.smoothing_radius;
    const RefineResult refined = refine(p, y0, coarse_mean);
    Image out = Image::Zero(y0.rows(), y0.cols());
    for (int r = 0; r < coarse_cfg.averaging; ++r) {
      DenoiseConfig run_cfg = coarse_cfg;
      run_cfg.seed = coarse_cfg.seed + static_cast<std::uint64_t>(r);
      run_cfg.lambda = refined.policy;
      const auto& run = coarse[static_cast<std::size_t>(r)];
      out += c.hr_stage.rollback_step == 0 ? denoise(y0, m.hr, s, run_cfg, &lr).image
                                           : resume(run.snapshots.front(), m.hr, s, run_cfg, &lr);
    }
    out /= static_cast<double>(coarse_cfg.averaging);
    add(p.name(), lc.lambda0, out, refined.lambda0_ada, refined.noise_std);
  }
  return rows;
}

int cmd_ablate_lambda(const RunConfig& cfg) {
  check_models_exist(cfg);
  check_test_set_exists(cfg);
  if (cfg.ablation.grid.empty()) throw ConfigError("ablation.grid", "must not be empty");
  const Models m = load_models(cfg);
  const TestSet t = load_test_set(cfg);
  // The configured lambda0 is always swept: its coarse pass is shared anyway
  // and it is the ConsLam reference for the adaptive policies.
  std::vector<double> grid = cfg.ablation.grid;
  grid.push_back(cfg.hr_stage.lambda.lambda0);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const std::size_t n = t.noisy.size();
  std::vector<std::vector<AblationRow>> rows(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    rows[i] = ablate_image(cfg, m, t.noisy[i], t.clean[i], image_seed(cfg, i), grid);
  });

  io::CsvWriter csv(cfg.resolve("ablation.csv"), "ablation",
                    {"index", "policy", "lambda0", "psnr", "ssim", "lambda0_ada", "noise_std"});
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& r : rows[i]) csv.row(i, r.policy, r.lambda0, r.psnr, r.ssim, r.lambda0_ada, r.noise_std);
  }

  // Mean PSNR per (policy, lambda0) in first-seen order.
  std::vector<std::pair<std::string, double>> keys;
  std::vector<double> sums;
  for (const auto& image_rows : rows) {
    for (const auto& r : image_rows) {
      const auto key = std::make_pair(r.policy, r.lambda0);
      const auto it = std::find(keys.begin(), keys.end(), key);
      if (it == keys.end()) {
        keys.push_back(key);
        sums.push_back(r.psnr);
      } else {
        sums[static_cast<std::size_t>(it - keys.begin())] += r.psnr;
      }
    }
  }
  io::CsvWriter summary(cfg.resolve("ablation_summary.csv"), "ablation_summary",
                        {"policy", "lambda0", "mean_psnr"});
  for (std::size_t j = 0; j < keys.size(); ++j) {
    const double mean = sums[j] / static_cast<double>(n);
    summary.row(keys[j].first, keys[j].second, mean);
    std::cout << keys[j].first << " lambda0=" << keys[j].second << " mean PSNR " << mean << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot diffusion-prior denoising on synthetic phantoms"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string preset_name = "toy";
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<int> count;
  app.add_option("--config", config_path, "YAML run configuration")->required();
  app.add_option("--preset", preset_name, "Defaults the config is overlaid on")
      ->check(CLI::IsMember({"toy", "paper"}));
  app.add_option("--workers", workers, "Worker threads");
  app.add_option("--seed", seed, "Override the config seed");

  auto* gen = app.add_subcommand("gen-phantoms", "Write clean and corrupted phantom datasets");
  auto* train = app.add_subcommand("train", "Train the LR and HR noise predictors");
  auto* sample = app.add_subcommand("sample", "Draw LR samples and their HR counterparts");
  sample->add_option("--count", count, "Number of samples (overrides sample.count)");
  auto* denoise_cmd = app.add_subcommand("denoise", "Cascade-denoise the noisy test set");
  auto* eval = app.add_subcommand("eval", "Recompute metrics of denoised images");
  auto* ablate = app.add_subcommand("ablate-lambda", "Sweep constant lambda and compare adaptive policies");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  RunConfig cfg;
  try {
    cfg = load_config(config_path, preset(preset_name));
    if (workers) cfg.workers = *workers;
    if (seed) cfg.seed = *seed;
    if (count) cfg.sample_count = *count;
    validate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_phantoms(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (sample->parsed()) return cmd_sample(cfg);
    if (denoise_cmd->parsed()) return cmd_denoise(cfg);
    if (eval->parsed()) return cmd_eval(cfg);
    if (ablate->parsed()) return cmd_ablate_lambda(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
