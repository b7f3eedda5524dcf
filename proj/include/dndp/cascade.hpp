#pragma once

#include "dndp/image.hpp"
#include "dndp/prior.hpp"
#include "dndp/resample.hpp"
#include "dndp/solver.hpp"

namespace dndp {

struct CascadeConfig {
  int k = 2;
  DenoiseConfig lr_stage;
  DenoiseConfig hr_stage;
};

struct CascadeResult {
  Image lr;       // averaged low-resolution estimate, used as the condition
  Image hr;       // final high-resolution estimate
  Image hr_coarse;
  RefineResult refined;
};

/// Low-resolution unconditional pass on the k-times downsampled input, then a
/// conditional high-resolution pass. Adaptive lambda refinement and roll-back
/// resume happen in the high-resolution stage only.
CascadeResult cascade_denoise(const Image& y0_hr, const CascadeConfig& cfg,
                              const MeanPredictor& lr_pred, const MeanPredictor& hr_pred);

}  // namespace dndp
