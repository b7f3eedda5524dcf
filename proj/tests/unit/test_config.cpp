#include "dndp/config.hpp"

#include <doctest.h>

#include <string>

using namespace dndp;

namespace {

std::string field_of(const std::string& yaml, RunConfig base = preset("toy")) {
  try {
    validate(parse_config(yaml, std::move(base)));
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("presets validate") {
  CHECK_NOTHROW(validate(preset("toy")));
  CHECK_NOTHROW(validate(preset("paper")));
  CHECK_THROWS_AS(preset("huge"), ConfigError);
}

TEST_CASE("paper preset carries the published hyper-parameters") {
  const auto cfg = preset("paper");
  const auto s = cfg.hr_schedule();
  CHECK(s.steps() == 2000);
  CHECK(s.beta(1) == 1e-6);
  CHECK(s.beta(2000) == 1e-2);
  CHECK(cfg.cascade(1).hr_stage.tau.size() == 29);
  CHECK(cfg.denoise.k == 2);
  CHECK(cfg.denoise.averaging == 10);
  const auto& lam = std::get<CombinedLam>(cfg.hr_policy().variant());
  CHECK(lam.lambda0 == 0.0075);
  CHECK(lam.a == 1.5);
  CHECK(lam.b == -0.01);
  CHECK(lam.c == 0.3);
  CHECK(std::get<ConsLam>(cfg.lr_policy().variant()).lambda0 == 0.002);
}

TEST_CASE("yaml overlays the preset") {
  const auto cfg = parse_config(R"(
seed: 17
workers: 3
output_dir: /tmp/x
noise:
  model: additive_gaussian
  sigma: 0.1
hr_stage:
  lambda:
    policy: adalam1
    lambda0: 0.5
    a: 2
    b: 0.1
denoise:
  averaging: 4
ablation:
  grid: [0.1, 0.2]
sample:
  count: 0
)",
                                preset("toy"));
  CHECK(cfg.seed == 17u);
  CHECK(cfg.workers == 3);
  CHECK(std::holds_alternative<AdditiveGaussian>(cfg.noise_model()));
  CHECK(cfg.hr_policy().name() == "AdaLam-I");
  CHECK(cfg.denoise.averaging == 4);
  CHECK(cfg.denoise.rollback == preset("toy").denoise.rollback);
  CHECK(cfg.ablation.grid == std::vector<double>{0.1, 0.2});
  CHECK(cfg.sample_count == 0);
  CHECK(cfg.resolve("a/b.csv") == std::filesystem::path("/tmp/x/a/b.csv"));
  CHECK(cfg.resolve("/abs") == std::filesystem::path("/abs"));
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("errors name the offending field") {
  CHECK(field_of("seed: 3") == "");
  CHECK(field_of("sed: 3") == "sed");
  CHECK(field_of("hr_stage:\n  lambda:\n    aa: 1") == "hr_stage.lambda.aa");
  CHECK(field_of("denoise:\n  rollback: 4") == "denoise.rollback");
  CHECK(field_of("denoise:\n  k: 3") == "denoise.k");
  CHECK(field_of("denoise:\n  averaging: 0") == "denoise.averaging");
  CHECK(field_of("workers: 0") == "workers");
  CHECK(field_of("workers: many") == "workers");
  CHECK(field_of("noise:\n  model: pink") == "noise.model");
  CHECK(field_of("noise:\n  sigma_min: 0.5") == "noise");
  CHECK(field_of("hr_stage:\n  lambda:\n    policy: magic") == "hr_stage.lambda.policy");
  CHECK(field_of("lr_stage:\n  lambda:\n    policy: adalam1") == "lr_stage.lambda.policy");
  CHECK(field_of("lr_stage:\n  schedule:\n    beta_end: 1.5") == "lr_stage.schedule");
  CHECK(field_of("hr_stage:\n  tau:\n    dense_end: 500") == "hr_stage.tau");
  CHECK(field_of("model:\n  dilations: [1, 2]") == "model.dilations");
  CHECK(field_of("ablation:\n  grid: [0.1, -1]") == "ablation.grid");
  CHECK(field_of("phantom: 3") == "phantom");
  CHECK(field_of("[unclosed") == "<root>");
}

TEST_CASE("derived seeds are distinct per purpose and run seed") {
  CHECK(derive_seed(1, seed_purpose::train_phantoms) != derive_seed(1, seed_purpose::test_phantoms));
  CHECK(derive_seed(1, seed_purpose::train_phantoms) != derive_seed(2, seed_purpose::train_phantoms));
  CHECK(derive_seed(5, 3) == derive_seed(5, 3));
}

TEST_CASE("cascade config from the run config") {
  const auto cfg = preset("toy");
  const auto c = cfg.cascade(99);
  CHECK(c.k == 2);
  CHECK(c.lr_stage.seed == 99u);
  CHECK(c.hr_stage.seed != c.lr_stage.seed);
  CHECK(c.lr_stage.rollback_step == 0);
  CHECK(c.hr_stage.rollback_step == cfg.denoise.rollback);
  CHECK(c.hr_stage.tau.contains(c.hr_stage.rollback_step));
}
