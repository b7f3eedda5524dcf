#include "dndp/solver.hpp"

#include "dndp/forward.hpp"
#include "dndp/parallel.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace dndp {

namespace {

struct Trajectory {
  const Image& y0;
  const MeanPredictor& pred;
  const NoiseSchedule& s;
  const std::vector<int>& taus;
  const LambdaValue& base;
  const NoiseField& noise;
  const Image* condition;
};

void check_finite(const Image& img, int t) {
  if (!all_finite(img)) throw NonFiniteError("denoise: non-finite estimate", t);
}

// Runs the MAP iteration from x_hat at taus[from] down to x_0. Snapshots the
// state after it reaches `snapshot_at` (when > 0).
Image run_from(const Trajectory& tr, Image x_hat, std::size_t from, int snapshot_at,
               std::vector<RunSnapshot>* snapshots) {
  for (std::size_t i = from; i > 0; --i) {
    const int t = tr.taus[i];
    const int t_prev = tr.taus[i - 1];
    const Image mu = tr.pred.predict_mu(x_hat, t, tr.condition);
    const Image eps = tr.noise.normal(static_cast<std::uint64_t>(t_prev), tr.y0.rows(), tr.y0.cols());
    const Image y_prev = coupled_noisy(tr.y0, t_prev, eps, tr.s);
    x_hat = map_update(y_prev, mu, lambda_at(tr.base, t_prev, tr.s), tr.s.sigma(t));
    check_finite(x_hat, t_prev);
    if (snapshots != nullptr && t_prev == snapshot_at) {
      snapshots->push_back({t_prev, x_hat, tr.y0, tr.noise.seed()});
    }
  }
  Image x0 = tr.pred.predict_mu(x_hat, tr.taus.front(), tr.condition);
  check_finite(x0, 0);
  return x0;
}

void check_inputs(const Image& y0, const MeanPredictor& pred, const NoiseSchedule& s,
                  const DenoiseConfig& cfg, const Image* condition) {
  validate(cfg);
  if (!(pred.schedule() == s)) {
    throw std::invalid_argument("denoise: predictor is bound to a different schedule");
  }
  if (cfg.tau.back() != s.steps()) {
    throw std::invalid_argument("denoise: tau does not end at T = " + std::to_string(s.steps()));
  }
  if (pred.conditional() != (condition != nullptr)) {
    throw std::invalid_argument(pred.conditional()
                                    ? "denoise: conditional predictor requires a condition"
                                    : "denoise: unconditional predictor given a condition");
  }
  if (y0.size() == 0) throw std::invalid_argument("denoise: empty input");
  check_finite(y0, 0);
}

DenoiseConfig with_seed(const DenoiseConfig& cfg, std::uint64_t seed) {
  DenoiseConfig out = cfg;
  out.seed = seed;
  return out;
}

Image mean_of(const std::vector<Image>& images) {
  Image sum = images.front();
  for (std::size_t i = 1; i < images.size(); ++i) sum += images[i];
  return sum / static_cast<double>(images.size());
}

}  // namespace

void validate(const DenoiseConfig& cfg) {
  if (cfg.averaging < 1) throw std::invalid_argument("denoise: averaging count must be >= 1");
  if (cfg.rollback_step < 0 || cfg.rollback_step >= cfg.tau.back()) {
    throw std::invalid_argument("denoise: rollback step must be in [0, T)");
  }
  if (cfg.rollback_step != 0 && !cfg.tau.contains(cfg.rollback_step)) {
    throw std::invalid_argument("denoise: rollback step " + std::to_string(cfg.rollback_step) +
                                " is not in tau");
  }
}

Image map_update(const Image& y_prev, const Image& mu, const LambdaValue& lambda_prev,
                 double sigma_t) {
  require_same_shape(y_prev, mu, "map_update");
  if (!(sigma_t > 0.0)) {
    throw std::invalid_argument("map_update: sigma_t must be > 0 (t = 1 is the deterministic step)");
  }
  if (const auto* scalar = std::get_if<double>(&lambda_prev)) {
    if (*scalar < 0.0) throw std::invalid_argument("map_update: negative lambda");
    const double w = *scalar / sigma_t;
    return (y_prev + w * mu) / (1.0 + w);
  }
  const Image& map = std::get<Image>(lambda_prev);
  require_same_shape(y_prev, map, "map_update (lambda map)");
  if ((map < 0.0).any()) throw std::invalid_argument("map_update: negative lambda");
  const Image w = map / sigma_t;
  return (y_prev + w * mu) / (1.0 + w);
}

DenoiseRun denoise(const Image& y0, const MeanPredictor& pred, const NoiseSchedule& s,
                   const DenoiseConfig& cfg, const Image* condition) {
  check_inputs(y0, pred, s, cfg, condition);
  const NoiseField noise(cfg.seed);
  const LambdaValue base = cfg.lambda.base();
  const Trajectory tr{y0, pred, s, cfg.tau.taus(), base, noise, condition};

  const int steps = s.steps();
  const Image eps_T = noise.normal(static_cast<std::uint64_t>(steps), y0.rows(), y0.cols());
  Image x_hat = coupled_noisy(y0, steps, eps_T, s);

  DenoiseRun run;
  run.image = run_from(tr, std::move(x_hat), cfg.tau.taus().size() - 1, cfg.rollback_step,
                       &run.snapshots);
  return run;
}

Image denoise_average(const Image& y0, const MeanPredictor& pred, const NoiseSchedule& s,
                      const DenoiseConfig& cfg, const Image* condition) {
  check_inputs(y0, pred, s, cfg, condition);
  std::vector<Image> outputs(static_cast<std::size_t>(cfg.averaging));
  parallel_for(outputs.size(), cfg.workers, [&](std::size_t i) {
    outputs[i] = denoise(y0, pred, s, with_seed(cfg, cfg.seed + i), condition).image;
  });
  return mean_of(outputs);
}

Image resume(const RunSnapshot& snapshot, const MeanPredictor& pred, const NoiseSchedule& s,
             const DenoiseConfig& cfg, const Image* condition) {
  check_inputs(snapshot.y0, pred, s, cfg, condition);
  const auto& taus = cfg.tau.taus();
  const auto it = std::find(taus.begin(), taus.end(), snapshot.timestep);
  if (it == taus.end()) {
    throw std::invalid_argument("resume: snapshot timestep " + std::to_string(snapshot.timestep) +
                                " is not in tau");
  }
  require_same_shape(snapshot.x_hat, snapshot.y0, "resume");
  const NoiseField noise(snapshot.noise_seed);
  const LambdaValue base = cfg.lambda.base();
  const Trajectory tr{snapshot.y0, pred, s, taus, base, noise, condition};
  return run_from(tr, snapshot.x_hat, static_cast<std::size_t>(it - taus.begin()), 0, nullptr);
}

AdaptiveDenoise denoise_adaptive(const Image& y0, const MeanPredictor& pred,
                                 const NoiseSchedule& s, const DenoiseConfig& cfg,
                                 const Image* condition) {
  check_inputs(y0, pred, s, cfg, condition);
  const auto runs = static_cast<std::size_t>(cfg.averaging);
  std::vector<DenoiseRun> coarse(runs);
  parallel_for(runs, cfg.workers, [&](std::size_t i) {
    coarse[i] = denoise(y0, pred, s, with_seed(cfg, cfg.seed + i), condition);
  });
  std::vector<Image> coarse_images;
  coarse_images.reserve(runs);
  for (const auto& run : coarse) coarse_images.push_back(run.image);

  AdaptiveDenoise out{Image(), mean_of(coarse_images), {cfg.lambda, 0.0, 0.0}};
  out.refined = refine(cfg.lambda, y0, out.coarse);
  if (!cfg.lambda.adaptive()) {
    out.image = out.coarse;
    return out;
  }

  DenoiseConfig refined_cfg = cfg;
  refined_cfg.lambda = out.refined.policy;
  std::vector<Image> finals(runs);
  parallel_for(runs, cfg.workers, [&](std::size_t i) {
    const DenoiseConfig run_cfg = with_seed(refined_cfg, cfg.seed + i);
    if (cfg.rollback_step == 0) {
      finals[i] = denoise(y0, pred, s, run_cfg, condition).image;
    } else {
      finals[i] = resume(coarse[i].snapshots.front(), pred, s, run_cfg, condition);
    }
  });
  out.image = mean_of(finals);
  return out;
}

}  // namespace dndp
