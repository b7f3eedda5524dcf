#pragma once

#include "dndp/image.hpp"
#include "dndp/schedule.hpp"

#include <cstdint>

namespace dndp {

/// Counter-based standard-normal field generator.
///
/// Each (seed, stream) pair names an independent field; pixel i of the field
/// depends only on (seed, stream, i), so a draw can be replayed without any
/// generator state. The solver uses the timestep as the stream.
class NoiseField {
 public:
  explicit NoiseField(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Image normal(std::uint64_t stream, Eigen::Index rows, Eigen::Index cols) const;
  double uniform(std::uint64_t stream, std::uint64_t counter) const;

 private:
  std::uint64_t seed_;
};

Image sample_forward(const Image& x0, int t, const Image& eps, const NoiseSchedule& s);

/// y_t built from y_0 with the same eps as x_t; y_t - x_t == sqrt(abar_t) (y_0 - x_0).
Image coupled_noisy(const Image& y0, int t, const Image& eps, const NoiseSchedule& s);

Image posterior_mean_tilde(const Image& x_t, const Image& x0, int t, const NoiseSchedule& s);

}  // namespace dndp
