#pragma once

#include "dndp/image.hpp"

namespace dndp {

/// k x k block-mean reduction. Both dimensions must be divisible by k.
Image downsample(const Image& img, int k);

/// Bicubic (Catmull-Rom, a = -0.5) enlargement by k with edge clamping and
/// pixel-centre alignment.
Image upsample_bicubic(const Image& img, int k);

}  // namespace dndp
