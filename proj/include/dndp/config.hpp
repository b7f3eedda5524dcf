#pragma once

#include "dndp/cascade.hpp"
#include "dndp/lambda.hpp"
#include "dndp/phantom.hpp"
#include "dndp/schedule.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace dndp {

/// Invalid configuration; `field` is the dotted path of the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct ScheduleConfig {
  int steps = 200;
  double beta1 = 1e-5;
  double beta_end = 0.1;
};

struct TauConfig {
  int dense_end = 50;
  int dense_stride = 2;
  int sparse_stride = 50;
};

struct LambdaConfig {
  std::string policy = "conslam";  // conslam | adalam1 | adalam2 | combined
  double lambda0 = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  int smoothing_radius = 0;
};

struct StageConfig {
  ScheduleConfig schedule;
  TauConfig tau;
  std::string checkpoint;
  LambdaConfig lambda;
};

struct ModelConfig {
  int width = 32;
  std::vector<int> dilations{1, 2, 4, 2, 1};
  int train_steps = 3000;
  int batch = 8;
  double learning_rate = 1e-3;
  int hr_crop = 32;
};

struct PhantomConfig {
  int width = 64;
  int height = 64;
  int min_ellipses = 3;
  int max_ellipses = 6;
  double intensity_lo = 0.2;
  double intensity_hi = 0.9;
  double background = 0.0;
  int train_count = 400;
  int test_count = 20;
};

struct NoiseConfig {
  std::string model = "variable_gaussian";  // additive_gaussian | variable_gaussian | signal_dependent
  double sigma = 0.08;
  double sigma_min = 0.04;
  double sigma_max = 0.12;
  double base = 0.05;
  double gain = 0.1;
};

struct DataConfig {
  std::string train_clean = "data/train_clean.dset";
  std::string test_clean = "data/test_clean.dset";
  std::string test_noisy = "data/test_noisy.dset";
  std::string manifest = "data/manifest.csv";
};

struct DenoiseSection {
  int k = 2;
  int averaging = 10;
  int rollback = 11;
};

struct AblationConfig {
  std::vector<double> grid;
  int averaging = 1;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int workers = 1;
  std::string output_dir = "out";
  PhantomConfig phantom;
  NoiseConfig noise;
  DataConfig data;
  ModelConfig model;
  StageConfig lr_stage;
  StageConfig hr_stage;
  DenoiseSection denoise;
  AblationConfig ablation;
  int sample_count = 2;

  /// Resolves a path from the config against output_dir.
  std::filesystem::path resolve(const std::string& path) const;

  NoiseSchedule lr_schedule() const;
  NoiseSchedule hr_schedule() const;
  PhantomSpec phantom_spec(std::uint64_t seed) const;
  NoiseModel noise_model() const;
  LambdaPolicy lr_policy() const;
  LambdaPolicy hr_policy() const;
  CascadeConfig cascade(std::uint64_t seed) const;
};

/// Built-in defaults: "toy" (desk-scale phantoms) or "paper" (reference
/// abdomen-CT hyper-parameters on the 2000-step schedule).
RunConfig preset(const std::string& name);

/// Overlays a YAML document on `base`. Unknown keys are errors.
RunConfig load_config(const std::filesystem::path& path, RunConfig base);
RunConfig parse_config(const std::string& yaml_text, RunConfig base);

/// Cross-field validation; throws ConfigError naming the field.
void validate(const RunConfig& cfg);

/// Independent seed for a named purpose derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose);

namespace seed_purpose {
inline constexpr std::uint64_t train_phantoms = 1;
inline constexpr std::uint64_t test_phantoms = 2;
inline constexpr std::uint64_t corruption = 3;
inline constexpr std::uint64_t lr_training = 4;
inline constexpr std::uint64_t hr_training = 5;
inline constexpr std::uint64_t lr_init = 6;
inline constexpr std::uint64_t hr_init = 7;
inline constexpr std::uint64_t sampling = 8;
inline constexpr std::uint64_t denoising = 9;
}  // namespace seed_purpose

}  // namespace dndp
