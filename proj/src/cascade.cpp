#include "dndp/cascade.hpp"

#include <stdexcept>

namespace dndp {

CascadeResult cascade_denoise(const Image& y0_hr, const CascadeConfig& cfg,
                              const MeanPredictor& lr_pred, const MeanPredictor& hr_pred) {
  if (cfg.k < 2) throw std::invalid_argument("cascade: k must be >= 2");
  if (lr_pred.conditional()) throw std::invalid_argument("cascade: LR predictor must be unconditional");
  if (!hr_pred.conditional()) throw std::invalid_argument("cascade: HR predictor must be conditional");
  if (y0_hr.rows() % cfg.k != 0 || y0_hr.cols() % cfg.k != 0) {
    throw std::invalid_argument("cascade: HR dimensions must be divisible by k");
  }
  if (cfg.lr_stage.lambda.adaptive()) {
    throw std::invalid_argument("cascade: adaptive lambda is only supported in the HR stage");
  }

  CascadeResult out;
  const Image y0_lr = downsample(y0_hr, cfg.k);
  out.lr = denoise_average(y0_lr, lr_pred, lr_pred.schedule(), cfg.lr_stage);

  AdaptiveDenoise hr = denoise_adaptive(y0_hr, hr_pred, hr_pred.schedule(), cfg.hr_stage, &out.lr);
  out.hr = std::move(hr.image);
  out.hr_coarse = std::move(hr.coarse);
  out.refined = std::move(hr.refined);
  return out;
}

}  // namespace dndp
