#pragma once

#include "dndp/image.hpp"

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace dndp {

/// Ellipse in normalized coordinates: the image spans [-1, 1] on both axes,
/// y pointing down.
struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double semi_x = 0.5;
  double semi_y = 0.5;
  double angle = 0.0;  // radians
  double intensity = 1.0;
};

struct PhantomSpec {
  int width = 64;
  int height = 64;
  int min_ellipses = 3;
  int max_ellipses = 6;
  double intensity_lo = 0.2;
  double intensity_hi = 0.9;
  double background = 0.0;
  std::uint64_t seed = 0;
};

/// Paints ellipses in order over the background; each pixel blends toward an
/// ellipse's intensity by its 4x4 supersampled coverage.
Image render_ellipses(int width, int height, double background, std::span<const Ellipse> ellipses);

/// A body ellipse followed by smaller interior structures. Image i depends
/// only on (spec.seed, i).
std::vector<Image> generate_phantoms(const PhantomSpec& spec, int count);

struct AdditiveGaussian {
  double sigma = 0.1;
};

/// One noise level per image, uniform in [sigma_min, sigma_max].
struct VariableGaussian {
  double sigma_min = 0.05;
  double sigma_max = 0.15;
};

/// Per-pixel std = base + gain * x0.
struct SignalDependent {
  double base = 0.05;
  double gain = 0.1;
};

using NoiseModel = std::variant<AdditiveGaussian, VariableGaussian, SignalDependent>;

void validate(const NoiseModel& nm);

struct Corrupted {
  Image y0;
  double sigma = 0.0;  // drawn level (base std for SignalDependent)
};

Corrupted corrupt(const Image& x0, const NoiseModel& nm, std::uint64_t seed);

}  // namespace dndp
