#include "dndp/cascade.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace dndp;
using dndp::testing::ConditionalGaussianPrior;
using dndp::testing::max_abs;
using dndp::testing::uniform_image;

namespace {

// Catmull-Rom kernel written out from its piecewise polynomial.
double keys(double x) {
  x = std::abs(x);
  if (x < 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
  if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
  return 0.0;
}

double naive_bicubic(const Image& img, Eigen::Index r, Eigen::Index c, int k) {
  const double v = (r + 0.5) / k - 0.5;
  const double u = (c + 0.5) / k - 0.5;
  double acc = 0.0;
  for (Eigen::Index i = static_cast<Eigen::Index>(std::floor(v)) - 1; i <= std::floor(v) + 2; ++i) {
    for (Eigen::Index j = static_cast<Eigen::Index>(std::floor(u)) - 1; j <= std::floor(u) + 2; ++j) {
      const Eigen::Index ci = std::clamp<Eigen::Index>(i, 0, img.rows() - 1);
      const Eigen::Index cj = std::clamp<Eigen::Index>(j, 0, img.cols() - 1);
      acc += keys(v - static_cast<double>(i)) * keys(u - static_cast<double>(j)) * img(ci, cj);
    }
  }
  return acc;
}

DenoiseConfig stage(const TauSchedule& tau, LambdaPolicy lambda, int averaging, int rollback,
                    std::uint64_t seed) {
  return DenoiseConfig{tau, std::move(lambda), averaging, rollback, seed, 1};
}

}  // namespace

TEST_CASE("block-mean downsample") {
  const Image img = uniform_image(1, 6, 4);
  const Image d = downsample(img, 2);
  REQUIRE(d.rows() == 3);
  REQUIRE(d.cols() == 2);
  CHECK(d(1, 1) == doctest::Approx((img(2, 2) + img(2, 3) + img(3, 2) + img(3, 3)) / 4.0));
  CHECK(d.mean() == doctest::Approx(img.mean()));
  CHECK(max_abs(downsample(img, 1) - img) == 0.0);
  CHECK_THROWS_AS(downsample(img, 4), std::invalid_argument);
  CHECK_THROWS_AS(downsample(img, 0), std::invalid_argument);
}

TEST_CASE("bicubic upsample matches the direct kernel sum") {
  const Image img = uniform_image(2, 5, 7);
  for (int k : {2, 3, 4}) {
    const Image up = upsample_bicubic(img, k);
    REQUIRE(up.rows() == 5 * k);
    REQUIRE(up.cols() == 7 * k);
    for (Eigen::Index r = 0; r < up.rows(); ++r) {
      for (Eigen::Index c = 0; c < up.cols(); ++c) {
        CHECK(up(r, c) == doctest::Approx(naive_bicubic(img, r, c, k)).epsilon(1e-13));
      }
    }
  }
  CHECK(max_abs(upsample_bicubic(img, 1) - img) == 0.0);
}

TEST_CASE("bicubic upsample reproduces constants and linear ramps") {
  CHECK(max_abs(upsample_bicubic(Image::Constant(4, 4, 0.37), 2) - 0.37) < 1e-15);
  Image ramp(6, 6);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) ramp(r, c) = 0.1 * r + 0.05 * c;
  }
  const Image up = upsample_bicubic(ramp, 2);
  // Interior pixels, away from the clamped border, lie on the same plane.
  for (int r = 4; r < 8; ++r) {
    for (int c = 4; c < 8; ++c) {
      const double y = (r + 0.5) / 2.0 - 0.5;
      const double x = (c + 0.5) / 2.0 - 0.5;
      CHECK(up(r, c) == doctest::Approx(0.1 * y + 0.05 * x).epsilon(1e-13));
    }
  }
}

TEST_CASE("cascade equals its two stages run by hand") {
  const auto s_lr = linear_beta_schedule(60, 1e-4, 0.2);
  const auto s_hr = linear_beta_schedule(80, 1e-4, 0.15);
  const Image x0 = uniform_image(3, 16, 16, 0.2, 0.8);
  const Image y0 = x0 + 0.08 * NoiseField(4).normal(0, 16, 16);
  const AnalyticGaussianPrior lr_pred(s_lr, Image::Constant(8, 8, 0.5), 0.3);
  const ConditionalGaussianPrior hr_pred(s_hr, 0.2);

  const CascadeConfig cfg{2, stage(make_tau(60, 10, 2, 10), ConsLam{0.1}, 3, 0, 100),
                          stage(make_tau(80, 20, 2, 20), CombinedLam{0.1, 1.5, 0.0, 0.5}, 3, 3, 200)};
  const auto out = cascade_denoise(y0, cfg, lr_pred, hr_pred);

  const Image lr = denoise_average(downsample(y0, 2), lr_pred, s_lr, cfg.lr_stage);
  CHECK(max_abs(out.lr - lr) == 0.0);
  const auto hr = denoise_adaptive(y0, hr_pred, s_hr, cfg.hr_stage, &lr);
  CHECK(max_abs(out.hr - hr.image) == 0.0);
  CHECK(max_abs(out.hr_coarse - hr.coarse) == 0.0);
  CHECK(out.refined.policy.name() == "AdaLam-I&II");
  CHECK(out.hr.rows() == 16);
  CHECK(out.lr.rows() == 8);
}

TEST_CASE("cascade input checks") {
  const auto s = linear_beta_schedule(40, 1e-4, 0.2);
  const AnalyticGaussianPrior lr_pred(s, Image::Zero(4, 4), 0.3);
  const ConditionalGaussianPrior hr_pred(s, 0.2);
  const CascadeConfig cfg{2, stage(make_tau(40, 10, 1, 10), ConsLam{0.1}, 1, 0, 1),
                          stage(make_tau(40, 10, 1, 10), ConsLam{0.1}, 1, 0, 2)};
  const Image y0 = Image::Zero(8, 8);
  CHECK_NOTHROW(cascade_denoise(y0, cfg, lr_pred, hr_pred));
  CHECK_THROWS_AS(cascade_denoise(Image::Zero(9, 8), cfg, lr_pred, hr_pred), std::invalid_argument);
  CHECK_THROWS_AS(cascade_denoise(y0, cfg, hr_pred, hr_pred), std::invalid_argument);
  CHECK_THROWS_AS(cascade_denoise(y0, cfg, lr_pred, lr_pred), std::invalid_argument);
  auto bad = cfg;
  bad.k = 1;
  CHECK_THROWS_AS(cascade_denoise(y0, bad, lr_pred, hr_pred), std::invalid_argument);
  bad = cfg;
  bad.lr_stage.lambda = AdaLamI{0.1, 1, 0};
  CHECK_THROWS_AS(cascade_denoise(y0, bad, lr_pred, hr_pred), std::invalid_argument);
}
