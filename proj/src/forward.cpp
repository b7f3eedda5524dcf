#include "dndp/forward.hpp"

#include <cmath>
#include <numbers>

namespace dndp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter);
}

// 53 random bits mapped to (0, 1).
double to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

double NoiseField::uniform(std::uint64_t stream, std::uint64_t counter) const {
  return to_open_unit(mix(seed_, stream, counter));
}

Image NoiseField::normal(std::uint64_t stream, Eigen::Index rows, Eigen::Index cols) const {
  Image out(rows, cols);
  const Eigen::Index n = out.size();
  double* data = out.data();
  for (Eigen::Index i = 0; i < n; i += 2) {
    const auto pair = static_cast<std::uint64_t>(i / 2);
    const double u1 = to_open_unit(mix(seed_, stream, 2 * pair));
    const double u2 = to_open_unit(mix(seed_, stream, 2 * pair + 1));
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    data[i] = r * std::cos(theta);
    if (i + 1 < n) data[i + 1] = r * std::sin(theta);
  }
  return out;
}

Image sample_forward(const Image& x0, int t, const Image& eps, const NoiseSchedule& s) {
  require_same_shape(x0, eps, "sample_forward");
  const double ab = s.alpha_bar(t);
  if (t == 0) return x0;
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

Image coupled_noisy(const Image& y0, int t, const Image& eps, const NoiseSchedule& s) {
  require_same_shape(y0, eps, "coupled_noisy");
  return sample_forward(y0, t, eps, s);
}

Image posterior_mean_tilde(const Image& x_t, const Image& x0, int t, const NoiseSchedule& s) {
  require_same_shape(x_t, x0, "posterior_mean_tilde");
  const PosteriorCoefficients c = s.posterior(t);
  if (t == 1) return x0;
  return c.coef_x0 * x0 + c.coef_xt * x_t;
}

}  // namespace dndp
