#include "dndp/schedule.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace dndp;

namespace {

// 50-digit product over the 2000-step (1e-6, 1e-2) schedule, computed with
// mpmath before the build.
constexpr double kAlphaBar2000 = 4.385978236133209330521213e-05;
constexpr double kSigma2000 = 0.09999997784762071493784092;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Independent set construction for the tau sub-sequence.
std::vector<int> brute_tau(int steps, int dense_end, int dense_stride, int sparse_stride) {
  std::set<int> taus{1, steps};
  for (int t = 1; t <= steps; ++t) {
    if (t <= dense_end && (t - 1) % dense_stride == 0) taus.insert(t);
    if (t > dense_end && t < steps && (t - dense_end) % sparse_stride == 0) taus.insert(t);
  }
  return {taus.begin(), taus.end()};
}

}  // namespace

TEST_CASE("linear schedule endpoints and cumulative product") {
  const auto s = linear_beta_schedule(2000, 1e-6, 1e-2);
  CHECK(s.steps() == 2000);
  CHECK(s.beta(1) == 1e-6);
  CHECK(s.beta(2000) == 1e-2);
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(rel(s.alpha_bar(2000), kAlphaBar2000) < 1e-10);
  CHECK(rel(s.sigma(2000), kSigma2000) < 1e-12);
}

TEST_CASE("constant two-step schedule") {
  const auto s = linear_beta_schedule(2, 0.1, 0.1);
  CHECK(s.betas() == std::vector<double>{0.1, 0.1});
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s.alpha_bar(2) == doctest::Approx(0.81).epsilon(1e-15));
  CHECK(s.sigma(1) == 0.0);
  CHECK(s.sigma(2) == doctest::Approx(std::sqrt(0.1 * 0.1 / 0.19)).epsilon(1e-14));

  const auto p = s.posterior(2);
  CHECK(p.coef_x0 == doctest::Approx(std::sqrt(0.9) * 0.1 / 0.19).epsilon(1e-14));
  CHECK(p.coef_xt == doctest::Approx(std::sqrt(0.9) * 0.1 / 0.19).epsilon(1e-14));
}

TEST_CASE("posterior coefficients at t = 1") {
  const auto s = linear_beta_schedule(50, 1e-4, 0.05);
  const auto p = s.posterior(1);
  CHECK(p.coef_x0 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(p.coef_xt == 0.0);
  CHECK(p.beta_tilde == 0.0);
}

TEST_CASE("beta_tilde equals sigma squared at every step") {
  const auto s = linear_beta_schedule(300, 1e-5, 0.05);
  for (int t = 1; t <= s.steps(); ++t) {
    CHECK(s.posterior(t).beta_tilde == doctest::Approx(s.sigma(t) * s.sigma(t)).epsilon(1e-14));
  }
}

TEST_CASE("schedule invariants") {
  const auto s = linear_beta_schedule(200, 1e-5, 0.1);
  for (int t = 1; t <= s.steps(); ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  CHECK(s.alpha_bar(s.steps()) < 1e-3);

  // Extended-precision running product at every index.
  const auto paper = linear_beta_schedule(2000, 1e-6, 1e-2);
  long double prod = 1.0L;
  for (int t = 1; t <= 2000; ++t) {
    prod *= 1.0L - static_cast<long double>(paper.beta(t));
    CHECK(rel(paper.alpha_bar(t), static_cast<double>(prod)) < 1e-10);
  }
}

TEST_CASE("schedule argument validation") {
  CHECK_THROWS_AS(linear_beta_schedule(1, 0.1, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(linear_beta_schedule(10, 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(linear_beta_schedule(10, 0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(linear_beta_schedule(10, 0.2, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule({0.2, 0.1}), std::invalid_argument);

  const auto s = linear_beta_schedule(10, 1e-3, 0.1);
  CHECK_THROWS_AS(s.sigma(0), std::out_of_range);
  CHECK_THROWS_AS(s.sigma(11), std::out_of_range);
  CHECK_THROWS_AS(s.posterior(0), std::out_of_range);
  CHECK_THROWS_AS(s.alpha_bar(-1), std::out_of_range);
  CHECK_NOTHROW(s.alpha_bar(0));
}

TEST_CASE("make_tau reproduces the published 29-step sequence") {
  const auto tau = make_tau(2000, 501, 20, 500);
  std::vector<int> expected;
  for (int t = 1; t <= 501; t += 20) expected.push_back(t);
  expected.insert(expected.end(), {1001, 1501, 2000});
  CHECK(tau.taus() == expected);
  CHECK(tau.size() == 29);
  CHECK(tau.front() == 1);
  CHECK(tau.back() == 2000);
}

TEST_CASE("make_tau small cases") {
  CHECK(make_tau(10, 10, 1, 1).taus() == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  const std::vector<int> expected{1, 11, 21, 31, 41, 75, 100};
  CHECK(brute_tau(100, 50, 10, 25) == expected);
  CHECK(make_tau(100, 50, 10, 25).taus() == expected);

  for (int steps : {7, 50, 200, 333}) {
    for (int dense_end : {1, steps / 4 + 1, steps}) {
      for (int ds : {1, 3}) {
        for (int ss : {1, 17}) {
          const auto tau = make_tau(steps, dense_end, ds, ss);
          CHECK(tau.taus() == brute_tau(steps, dense_end, ds, ss));
        }
      }
    }
  }
}

TEST_CASE("make_tau rejects bad parameters") {
  CHECK_THROWS_AS(make_tau(100, 0, 10, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_tau(100, 101, 10, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_tau(100, 50, 0, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_tau(100, 50, 10, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_tau(1, 1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(TauSchedule({1, 3, 3, 10}, 10), std::invalid_argument);
  CHECK_THROWS_AS(TauSchedule({2, 10}, 10), std::invalid_argument);
}

TEST_CASE("toy default tau keeps 1, T and the roll-back step") {
  const auto tau = make_tau(200, 50, 2, 50);
  CHECK(tau.contains(1));
  CHECK(tau.contains(3));
  CHECK(tau.contains(200));
  CHECK_FALSE(tau.contains(2));
}
