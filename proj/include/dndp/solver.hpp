#pragma once

#include "dndp/image.hpp"
#include "dndp/lambda.hpp"
#include "dndp/prior.hpp"
#include "dndp/schedule.hpp"

#include <cstdint>
#include <vector>

namespace dndp {

struct DenoiseConfig {
  TauSchedule tau;
  LambdaPolicy lambda;
  /// Number of independent runs averaged by denoise_average (R).
  int averaging = 1;
  /// Timestep at which a snapshot is taken for roll-back resume; 0 disables.
  int rollback_step = 0;
  std::uint64_t seed = 0;
  /// Threads used for the R independent runs.
  int workers = 1;
};

/// Throws std::invalid_argument unless R >= 1 and rollback_step is 0 or a
/// member of tau below T.
void validate(const DenoiseConfig& cfg);

/// Everything needed to re-enter a run at `timestep` with identical noise.
struct RunSnapshot {
  int timestep = 0;
  Image x_hat;
  Image y0;
  std::uint64_t noise_seed = 0;
};

/// Closed-form minimizer of ||x - y||^2 + (lambda / sigma_t) ||x - mu||^2,
/// elementwise for a lambda map.
Image map_update(const Image& y_prev, const Image& mu, const LambdaValue& lambda_prev,
                 double sigma_t);

struct DenoiseRun {
  Image image;
  std::vector<RunSnapshot> snapshots;
};

/// One Dn-Dp pass down the tau sequence starting from x_T = y_T.
DenoiseRun denoise(const Image& y0, const MeanPredictor& pred, const NoiseSchedule& s,
                   const DenoiseConfig& cfg, const Image* condition = nullptr);

/// Mean of cfg.averaging runs with seeds seed, seed + 1, ...
Image denoise_average(const Image& y0, const MeanPredictor& pred, const NoiseSchedule& s,
                      const DenoiseConfig& cfg, const Image* condition = nullptr);

/// Continues a run from its snapshot with cfg.lambda, replaying the noise.
Image resume(const RunSnapshot& snapshot, const MeanPredictor& pred, const NoiseSchedule& s,
             const DenoiseConfig& cfg, const Image* condition = nullptr);

struct AdaptiveDenoise {
  Image image;
  /// Averaged output of the coarse pass (equal to `image` for ConsLam).
  Image coarse;
  RefineResult refined;
};

/// Coarse pass with the provisional lambda0 over R runs, refinement of lambda
/// from the averaged coarse estimate, then resume of every run from its
/// roll-back snapshot. A ConsLam policy reduces to denoise_average.
AdaptiveDenoise denoise_adaptive(const Image& y0, const MeanPredictor& pred,
                                 const NoiseSchedule& s, const DenoiseConfig& cfg,
                                 const Image* condition = nullptr);

}  // namespace dndp
