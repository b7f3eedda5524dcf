#include "dndp/phantom.hpp"

#include "dndp/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dndp {

namespace {

constexpr int kSuper = 4;

double coverage(const Ellipse& e, double px, double py, double dx, double dy) {
  const double ca = std::cos(e.angle);
  const double sa = std::sin(e.angle);
  int inside = 0;
  for (int sy = 0; sy < kSuper; ++sy) {
    for (int sx = 0; sx < kSuper; ++sx) {
      const double x = px + (sx + 0.5) / kSuper * dx - e.cx;
      const double y = py + (sy + 0.5) / kSuper * dy - e.cy;
      const double u = (ca * x + sa * y) / e.semi_x;
      const double v = (-sa * x + ca * y) / e.semi_y;
      if (u * u + v * v <= 1.0) ++inside;
    }
  }
  return static_cast<double>(inside) / (kSuper * kSuper);
}

}  // namespace

Image render_ellipses(int width, int height, double background,
                      std::span<const Ellipse> ellipses) {
  if (width < 1 || height < 1) throw std::invalid_argument("render_ellipses: empty image");
  Image img = Image::Constant(height, width, background);
  const double dx = 2.0 / width;
  const double dy = 2.0 / height;
  for (const Ellipse& e : ellipses) {
    if (!(e.semi_x > 0.0 && e.semi_y > 0.0)) {
      throw std::invalid_argument("render_ellipses: semi-axes must be positive");
    }
    const double reach = std::max(e.semi_x, e.semi_y);
    const int c0 = std::max(0, static_cast<int>(std::floor((e.cx - reach + 1.0) / dx)));
    const int c1 = std::min(width - 1, static_cast<int>(std::ceil((e.cx + reach + 1.0) / dx)));
    const int r0 = std::max(0, static_cast<int>(std::floor((e.cy - reach + 1.0) / dy)));
    const int r1 = std::min(height - 1, static_cast<int>(std::ceil((e.cy + reach + 1.0) / dy)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double cov = coverage(e, -1.0 + c * dx, -1.0 + r * dy, dx, dy);
        if (cov > 0.0) img(r, c) += cov * (e.intensity - img(r, c));
      }
    }
  }
  return img;
}

std::vector<Image> generate_phantoms(const PhantomSpec& spec, int count) {
  if (count < 1) throw std::invalid_argument("generate_phantoms: count must be >= 1");
  if (spec.width < 1 || spec.height < 1) throw std::invalid_argument("generate_phantoms: empty resolution");
  if (spec.min_ellipses < 1 || spec.max_ellipses < spec.min_ellipses) {
    throw std::invalid_argument("generate_phantoms: need 1 <= min_ellipses <= max_ellipses");
  }
  if (!(0.0 <= spec.intensity_lo && spec.intensity_lo <= spec.intensity_hi &&
        spec.intensity_hi <= 1.0 && 0.0 <= spec.background && spec.background <= 1.0)) {
    throw std::invalid_argument("generate_phantoms: intensities must lie in [0, 1]");
  }

  const NoiseField rng(spec.seed);
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::uint64_t counter = 0;
    const auto stream = static_cast<std::uint64_t>(i);
    auto u = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(stream, counter++); };

    const int n = spec.min_ellipses +
                  std::min(spec.max_ellipses - spec.min_ellipses,
                           static_cast<int>(u(0.0, spec.max_ellipses - spec.min_ellipses + 1)));
    std::vector<Ellipse> ellipses;
    Ellipse body;
    body.cx = u(-0.08, 0.08);
    body.cy = u(-0.08, 0.08);
    body.semi_x = u(0.65, 0.85);
    body.semi_y = u(0.5, 0.75);
    body.angle = u(-0.3, 0.3);
    body.intensity = u(spec.intensity_lo, 0.5 * (spec.intensity_lo + spec.intensity_hi));
    ellipses.push_back(body);
    for (int e = 1; e < n; ++e) {
      Ellipse inner;
      const double radius = u(0.0, 0.55);
      const double theta = u(0.0, 2.0 * std::numbers::pi);
      inner.cx = body.cx + radius * body.semi_x * std::cos(theta);
      inner.cy = body.cy + radius * body.semi_y * std::sin(theta);
      inner.semi_x = u(0.06, 0.3);
      inner.semi_y = u(0.06, 0.3);
      inner.angle = u(0.0, std::numbers::pi);
      inner.intensity = u(spec.intensity_lo, spec.intensity_hi);
      ellipses.push_back(inner);
    }
    out.push_back(render_ellipses(spec.width, spec.height, spec.background, ellipses));
  }
  return out;
}

void validate(const NoiseModel& nm) {
  if (const auto* m = std::get_if<AdditiveGaussian>(&nm); m && !(m->sigma > 0.0)) {
    throw std::invalid_argument("noise: sigma must be > 0");
  }
  if (const auto* m = std::get_if<VariableGaussian>(&nm);
      m && !(m->sigma_min > 0.0 && m->sigma_max >= m->sigma_min)) {
    throw std::invalid_argument("noise: need 0 < sigma_min <= sigma_max");
  }
  if (const auto* m = std::get_if<SignalDependent>(&nm); m && !(m->base > 0.0 && m->gain >= 0.0)) {
    throw std::invalid_argument("noise: need base > 0 and gain >= 0");
  }
}

Corrupted corrupt(const Image& x0, const NoiseModel& nm, std::uint64_t seed) {
  validate(nm);
  const NoiseField rng(seed);
  const Image z = rng.normal(1, x0.rows(), x0.cols());
  if (const auto* m = std::get_if<AdditiveGaussian>(&nm)) {
    return {x0 + m->sigma * z, m->sigma};
  }
  if (const auto* m = std::get_if<VariableGaussian>(&nm)) {
    const double sigma = m->sigma_min + (m->sigma_max - m->sigma_min) * rng.uniform(0, 0);
    return {x0 + sigma * z, sigma};
  }
  const auto& m = std::get<SignalDependent>(nm);
  return {x0 + (m.base + m.gain * x0) * z, m.base};
}

}  // namespace dndp
