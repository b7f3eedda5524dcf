#include "dndp/resample.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace dndp {

namespace {

constexpr double kCubicA = -0.5;

double cubic_weight(double x) {
  x = std::abs(x);
  if (x <= 1.0) return ((kCubicA + 2.0) * x - (kCubicA + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((kCubicA * x - 5.0 * kCubicA) * x + 8.0 * kCubicA) * x - 4.0 * kCubicA;
  return 0.0;
}

struct Tap {
  std::array<Eigen::Index, 4> index;
  std::array<double, 4> weight;
};

std::vector<Tap> taps_for(Eigen::Index src_len, int k) {
  std::vector<Tap> taps(static_cast<std::size_t>(src_len * k));
  for (Eigen::Index o = 0; o < src_len * k; ++o) {
    const double u = (static_cast<double>(o) + 0.5) / k - 0.5;
    const double base = std::floor(u);
    const double frac = u - base;
    Tap& tap = taps[static_cast<std::size_t>(o)];
    for (int m = 0; m < 4; ++m) {
      const auto src = static_cast<Eigen::Index>(base) - 1 + m;
      tap.index[m] = std::clamp<Eigen::Index>(src, 0, src_len - 1);
      tap.weight[m] = cubic_weight(frac - (m - 1));
    }
  }
  return taps;
}

}  // namespace

Image downsample(const Image& img, int k) {
  if (k < 1) throw std::invalid_argument("downsample: k must be >= 1");
  if (img.rows() % k != 0 || img.cols() % k != 0) {
    throw std::invalid_argument("downsample: dimensions not divisible by k");
  }
  if (k == 1) return img;
  const Eigen::Index rows = img.rows() / k;
  const Eigen::Index cols = img.cols() / k;
  Image out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(r, c) = img.block(r * k, c * k, k, k).mean();
    }
  }
  return out;
}

Image upsample_bicubic(const Image& img, int k) {
  if (k < 1) throw std::invalid_argument("upsample_bicubic: k must be >= 1");
  if (k == 1) return img;
  const auto row_taps = taps_for(img.rows(), k);
  const auto col_taps = taps_for(img.cols(), k);

  // Separable: columns first into an intermediate, then rows.
  Image wide(img.rows(), img.cols() * k);
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index c = 0; c < wide.cols(); ++c) {
      const Tap& tap = col_taps[static_cast<std::size_t>(c)];
      double acc = 0.0;
      for (int m = 0; m < 4; ++m) acc += tap.weight[m] * img(r, tap.index[m]);
      wide(r, c) = acc;
    }
  }
  Image out(img.rows() * k, wide.cols());
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const Tap& tap = row_taps[static_cast<std::size_t>(r)];
    out.row(r) = tap.weight[0] * wide.row(tap.index[0]) + tap.weight[1] * wide.row(tap.index[1]) +
                 tap.weight[2] * wide.row(tap.index[2]) + tap.weight[3] * wide.row(tap.index[3]);
  }
  return out;
}

}  // namespace dndp
