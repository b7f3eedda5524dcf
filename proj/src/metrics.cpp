#include "dndp/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dndp {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

void check_window(const MetricWindow& w) {
  if (!(w.hi > w.lo)) throw std::invalid_argument("metric window needs hi > lo");
}

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> taps{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    taps[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable 'valid' filtering: output is (rows - 10) x (cols - 10).
Image filter_valid(const Image& img, const std::array<double, kWindow>& taps) {
  const Eigen::Index out_cols = img.cols() - kWindow + 1;
  const Eigen::Index out_rows = img.rows() - kWindow + 1;
  Image horiz = Image::Zero(img.rows(), out_cols);
  for (int k = 0; k < kWindow; ++k) horiz += taps[k] * img.middleCols(k, out_cols);
  Image out = Image::Zero(out_rows, out_cols);
  for (int k = 0; k < kWindow; ++k) out += taps[k] * horiz.middleRows(k, out_rows);
  return out;
}

}  // namespace

double mse(const Image& x, const Image& ref) {
  require_same_shape(x, ref, "mse");
  if (x.size() == 0) throw std::invalid_argument("mse: empty image");
  return (x - ref).square().mean();
}

double psnr(const Image& x, const Image& ref, const MetricWindow& w) {
  require_same_shape(x, ref, "psnr");
  check_window(w);
  const double err = mse(x.cwiseMax(w.lo).cwiseMin(w.hi), ref.cwiseMax(w.lo).cwiseMin(w.hi));
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  const double range = w.hi - w.lo;
  return 10.0 * std::log10(range * range / err);
}

double ssim(const Image& x, const Image& ref, const MetricWindow& w) {
  require_same_shape(x, ref, "ssim");
  check_window(w);
  if (x.rows() < kWindow || x.cols() < kWindow) {
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  }
  const Image a = x.cwiseMax(w.lo).cwiseMin(w.hi);
  const Image b = ref.cwiseMax(w.lo).cwiseMin(w.hi);
  const double range = w.hi - w.lo;
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  const auto taps = gaussian_taps();
  const Image mu_a = filter_valid(a, taps);
  const Image mu_b = filter_valid(b, taps);
  const Image var_a = filter_valid(a * a, taps) - mu_a * mu_a;
  const Image var_b = filter_valid(b * b, taps) - mu_b * mu_b;
  const Image cov = filter_valid(a * b, taps) - mu_a * mu_b;

  const Image num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
  const Image den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
  return (num / den).mean();
}

}  // namespace dndp
