#include "dndp/solver.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace dndp;
using dndp::testing::max_abs;
using dndp::testing::uniform_image;

namespace {

// Straight transcription of the iteration with scalar lambda, kept separate
// from the library loop.
Image reference_denoise(const Image& y0, const MeanPredictor& pred, const NoiseSchedule& s,
                        const std::vector<int>& taus, double lambda0, std::uint64_t seed) {
  const NoiseField noise(seed);
  const int T = s.steps();
  Image x = std::sqrt(s.alpha_bar(T)) * y0 +
            std::sqrt(1.0 - s.alpha_bar(T)) * noise.normal(T, y0.rows(), y0.cols());
  for (std::size_t i = taus.size() - 1; i > 0; --i) {
    const int t = taus[i];
    const int tp = taus[i - 1];
    const Image mu = pred.predict_mu(x, t);
    const Image yp = std::sqrt(s.alpha_bar(tp)) * y0 +
                     std::sqrt(1.0 - s.alpha_bar(tp)) * noise.normal(tp, y0.rows(), y0.cols());
    const double lam = lambda0 * std::sqrt(s.alpha_bar(tp));
    const double sig = std::sqrt((1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t)) * s.beta(t));
    x = (sig * yp + lam * mu) / (sig + lam);
  }
  return pred.predict_mu(x, taus.front());
}

DenoiseConfig config(const TauSchedule& tau, LambdaPolicy lambda, int averaging = 1,
                     int rollback = 0, std::uint64_t seed = 0) {
  return DenoiseConfig{tau, std::move(lambda), averaging, rollback, seed, 1};
}

}  // namespace

TEST_CASE("map update minimizes the quadratic objective") {
  const Image y = uniform_image(1, 4, 4);
  const Image mu = uniform_image(2, 4, 4);
  const double lam = 0.3;
  const double sig = 0.05;
  const Image x = map_update(y, mu, lam, sig);
  // Gradient of ||x - y||^2 + (lam / sig)||x - mu||^2 vanishes.
  CHECK(max_abs(2.0 * (x - y) + 2.0 * (lam / sig) * (x - mu)) < 1e-12);
  CHECK(max_abs(map_update(y, mu, 0.0, sig) - y) == 0.0);
  CHECK(max_abs(map_update(y, mu, 1e12, sig) - mu) < 1e-9);

  // Map lambda acts per pixel.
  Image lam_map = uniform_image(3, 4, 4, 0.0, 1.0);
  const Image xm = map_update(y, mu, lam_map, sig);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double w = lam_map.data()[i] / sig;
    CHECK(xm.data()[i] == doctest::Approx((y.data()[i] + w * mu.data()[i]) / (1.0 + w)));
    CHECK(xm.data()[i] >= std::min(y.data()[i], mu.data()[i]) - 1e-15);
    CHECK(xm.data()[i] <= std::max(y.data()[i], mu.data()[i]) + 1e-15);
  }

  CHECK_THROWS_AS(map_update(y, mu, 0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(map_update(y, mu, -0.1, 0.1), std::invalid_argument);
  lam_map(0, 0) = -1.0;
  CHECK_THROWS_AS(map_update(y, mu, lam_map, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(map_update(y, Image::Zero(3, 4), 0.1, 0.1), std::invalid_argument);
}

TEST_CASE("denoise matches the transcribed iteration") {
  const auto s = linear_beta_schedule(100, 1e-4, 0.1);
  const AnalyticGaussianPrior prior(s, Image::Constant(10, 10, 0.5), 0.2);
  const Image y0 = uniform_image(5, 10, 10);
  for (const auto& tau : {make_tau(100, 20, 3, 25), full_tau(100)}) {
    for (double lam : {0.0, 0.05, 1.0}) {
      const auto run = denoise(y0, prior, s, config(tau, ConsLam{lam}, 1, 0, 9));
      const Image ref = reference_denoise(y0, prior, s, tau.taus(), lam, 9);
      CHECK(max_abs(run.image - ref) < 1e-12);
      CHECK(run.snapshots.empty());
    }
  }
}

TEST_CASE("denoise is deterministic and seed dependent") {
  const auto s = linear_beta_schedule(50, 1e-4, 0.2);
  const AnalyticGaussianPrior prior(s, Image::Zero(8, 8), 0.5);
  const Image y0 = uniform_image(1, 8, 8);
  const auto tau = make_tau(50, 10, 1, 10);
  const auto a = denoise(y0, prior, s, config(tau, ConsLam{0.1}, 1, 0, 4)).image;
  const auto b = denoise(y0, prior, s, config(tau, ConsLam{0.1}, 1, 0, 4)).image;
  const auto c = denoise(y0, prior, s, config(tau, ConsLam{0.1}, 1, 0, 5)).image;
  CHECK((a == b).all());
  CHECK_FALSE((a == c).all());
}

TEST_CASE("averaging is the mean of consecutive seeds, independent of workers") {
  const auto s = linear_beta_schedule(50, 1e-4, 0.2);
  const AnalyticGaussianPrior prior(s, Image::Zero(8, 8), 0.5);
  const Image y0 = uniform_image(2, 8, 8);
  const auto tau = make_tau(50, 10, 1, 10);
  auto cfg = config(tau, ConsLam{0.1}, 4, 0, 20);
  Image sum = Image::Zero(8, 8);
  for (std::uint64_t i = 0; i < 4; ++i) {
    sum += denoise(y0, prior, s, config(tau, ConsLam{0.1}, 1, 0, 20 + i)).image;
  }
  const Image serial = denoise_average(y0, prior, s, cfg);
  CHECK(max_abs(serial - sum / 4.0) < 1e-15);
  cfg.workers = 3;
  CHECK((denoise_average(y0, prior, s, cfg) == serial).all());
}

TEST_CASE("resume from a snapshot replays the run exactly") {
  const auto s = linear_beta_schedule(100, 1e-4, 0.1);
  const AnalyticGaussianPrior prior(s, Image::Constant(6, 6, 0.3), 0.4);
  const Image y0 = uniform_image(3, 6, 6);
  const auto tau = make_tau(100, 20, 2, 20);
  const auto cfg = config(tau, ConsLam{0.2}, 1, 5, 11);
  const auto run = denoise(y0, prior, s, cfg);
  REQUIRE(run.snapshots.size() == 1u);
  CHECK(run.snapshots.front().timestep == 5);
  CHECK((resume(run.snapshots.front(), prior, s, cfg) == run.image).all());

  // A different lambda after the snapshot changes only the tail.
  const auto other = config(tau, ConsLam{0.8}, 1, 5, 11);
  const Image resumed = resume(run.snapshots.front(), prior, s, other);
  CHECK_FALSE((resumed == run.image).all());
}

TEST_CASE("config validation") {
  const auto s = linear_beta_schedule(100, 1e-4, 0.1);
  const AnalyticGaussianPrior prior(s, Image::Zero(4, 4), 0.4);
  const Image y0 = Image::Zero(4, 4);
  const auto tau = make_tau(100, 20, 2, 20);
  CHECK_THROWS_AS(validate(config(tau, ConsLam{0.1}, 0)), std::invalid_argument);
  CHECK_THROWS_AS(validate(config(tau, ConsLam{0.1}, 1, 4)), std::invalid_argument);
  CHECK_THROWS_AS(validate(config(tau, ConsLam{0.1}, 1, 100)), std::invalid_argument);
  CHECK_NOTHROW(validate(config(tau, ConsLam{0.1}, 1, 3)));

  CHECK_THROWS_AS(denoise(y0, prior, s, config(make_tau(90, 20, 2, 20), ConsLam{0.1})),
                  std::invalid_argument);
  CHECK_THROWS_AS(denoise(y0, prior, linear_beta_schedule(100, 1e-4, 0.2), config(tau, ConsLam{0.1})),
                  std::invalid_argument);
  CHECK_THROWS_AS(denoise(y0, prior, s, config(tau, ConsLam{0.1}), &y0), std::invalid_argument);
  Image bad = y0;
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(denoise(bad, prior, s, config(tau, ConsLam{0.1})), NonFiniteError);
}

TEST_CASE("conslam adaptive path reduces to averaging") {
  const auto s = linear_beta_schedule(50, 1e-4, 0.2);
  const AnalyticGaussianPrior prior(s, Image::Zero(8, 8), 0.5);
  const Image y0 = uniform_image(6, 8, 8);
  const auto cfg = config(make_tau(50, 10, 1, 10), ConsLam{0.1}, 3, 3, 2);
  const auto out = denoise_adaptive(y0, prior, s, cfg);
  CHECK((out.image == denoise_average(y0, prior, s, cfg)).all());
  CHECK((out.image == out.coarse).all());
  CHECK(out.refined.policy.name() == "ConsLam");
}

TEST_CASE("adaptive refinement resumes every run with the refined lambda") {
  const auto s = linear_beta_schedule(50, 1e-4, 0.2);
  const AnalyticGaussianPrior prior(s, Image::Constant(8, 8, 0.5), 0.3);
  const Image y0 = uniform_image(7, 8, 8);
  const auto tau = make_tau(50, 10, 1, 10);
  for (int rollback : {0, 3}) {
    const auto cfg = config(tau, AdaLamI{0.1, 2.0, 0.01}, 3, rollback, 40);
    const auto out = denoise_adaptive(y0, prior, s, cfg);

    const Image coarse = denoise_average(y0, prior, s, config(tau, ConsLam{0.1}, 3, rollback, 40));
    CHECK(max_abs(out.coarse - coarse) < 1e-15);
    const double level = std::max(0.0, 2.0 * population_std((y0 - coarse).abs()) + 0.01);
    CHECK(out.refined.lambda0_ada == doctest::Approx(level).epsilon(1e-12));

    Image expect = Image::Zero(8, 8);
    for (std::uint64_t i = 0; i < 3; ++i) {
      const auto run_cfg = config(tau, ConsLam{level}, 1, rollback, 40 + i);
      if (rollback == 0) {
        expect += denoise(y0, prior, s, run_cfg).image;
      } else {
        // Coarse prefix down to the roll-back step, refined tail after it.
        const auto prefix = denoise(y0, prior, s, config(tau, ConsLam{0.1}, 1, rollback, 40 + i));
        expect += resume(prefix.snapshots.front(), prior, s, run_cfg);
      }
    }
    CHECK(max_abs(out.image - expect / 3.0) < 1e-12);
  }
}

TEST_CASE("strong prior weight recovers the analytic posterior trend") {
  // With the prior mean equal to the clean image, a large lambda pulls the
  // estimate toward it and beats the noisy input.
  const auto s = linear_beta_schedule(200, 1e-5, 0.1);
  const Image x0 = uniform_image(8, 16, 16, 0.3, 0.7);
  const Image y0 = x0 + 0.1 * NoiseField(9).normal(0, 16, 16);
  const AnalyticGaussianPrior prior(s, x0, 0.05);
  const auto out = denoise_average(y0, prior, s, config(make_tau(200, 50, 2, 50), ConsLam{0.5}, 4));
  CHECK((out - x0).square().mean() < 0.5 * (y0 - x0).square().mean());
}
