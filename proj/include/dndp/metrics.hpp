#pragma once

#include "dndp/image.hpp"

namespace dndp {

/// Evaluation intensity range; both images are clamped to [lo, hi] first.
struct MetricWindow {
  double lo = 0.0;
  double hi = 1.0;
};

double mse(const Image& x, const Image& ref);

/// 10 log10((hi - lo)^2 / MSE); +infinity when the clamped images agree.
double psnr(const Image& x, const Image& ref, const MetricWindow& w = {});

/// Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5) with
/// C1 = (0.01 L)^2 and C2 = (0.03 L)^2, L = hi - lo.
double ssim(const Image& x, const Image& ref, const MetricWindow& w = {});

}  // namespace dndp
