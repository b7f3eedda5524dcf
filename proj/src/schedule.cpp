#include "dndp/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dndp {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.size() < 2) {
    throw std::invalid_argument("NoiseSchedule: need at least 2 timesteps");
  }
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    const double b = betas_[i];
    if (!(b > 0.0 && b < 1.0)) {
      throw std::invalid_argument("NoiseSchedule: beta_" + std::to_string(i + 1) +
                                  " outside (0, 1)");
    }
    if (i > 0 && b < betas_[i - 1]) {
      throw std::invalid_argument("NoiseSchedule: betas must be non-decreasing");
    }
  }
  alpha_bars_.resize(betas_.size() + 1);
  alpha_bars_[0] = 1.0;
  for (std::size_t t = 1; t <= betas_.size(); ++t) {
    alpha_bars_[t] = alpha_bars_[t - 1] * (1.0 - betas_[t - 1]);
  }
}

void NoiseSchedule::check_step(int t, int lo) const {
  if (t < lo || t > steps()) {
    throw std::out_of_range("timestep " + std::to_string(t) + " outside [" +
                            std::to_string(lo) + ", " + std::to_string(steps()) + "]");
  }
}

double NoiseSchedule::beta(int t) const {
  check_step(t, 1);
  return betas_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  check_step(t, 0);
  return alpha_bars_[t];
}

double NoiseSchedule::sigma(int t) const { return std::sqrt(posterior(t).beta_tilde); }

PosteriorCoefficients NoiseSchedule::posterior(int t) const {
  check_step(t, 1);
  const double b = betas_[t - 1];
  const double ab = alpha_bars_[t];
  const double ab_prev = alpha_bars_[t - 1];
  const double denom = 1.0 - ab;
  return {std::sqrt(ab_prev) * b / denom, std::sqrt(1.0 - b) * (1.0 - ab_prev) / denom,
          (1.0 - ab_prev) / denom * b};
}

NoiseSchedule linear_beta_schedule(int steps, double beta1, double beta_end) {
  if (steps < 2) throw std::invalid_argument("linear_beta_schedule: T must be >= 2");
  if (!(beta1 > 0.0 && beta1 <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("linear_beta_schedule: need 0 < beta1 <= betaT < 1");
  }
  std::vector<double> betas(steps);
  const double step = (beta_end - beta1) / (steps - 1);
  for (int t = 1; t <= steps; ++t) betas[t - 1] = beta1 + (t - 1) * step;
  betas.back() = beta_end;
  return NoiseSchedule(std::move(betas));
}

TauSchedule::TauSchedule(std::vector<int> taus, int steps) : taus_(std::move(taus)) {
  if (taus_.empty()) throw std::invalid_argument("TauSchedule: empty");
  if (taus_.front() != 1) throw std::invalid_argument("TauSchedule: must start at 1");
  if (taus_.back() != steps) throw std::invalid_argument("TauSchedule: must end at T");
  if (std::adjacent_find(taus_.begin(), taus_.end(), std::greater_equal<>()) != taus_.end()) {
    throw std::invalid_argument("TauSchedule: must be strictly increasing");
  }
}

bool TauSchedule::contains(int t) const {
  return std::binary_search(taus_.begin(), taus_.end(), t);
}

TauSchedule make_tau(int steps, int dense_end, int dense_stride, int sparse_stride) {
  if (steps < 1 || dense_end < 1 || dense_end > steps) {
    throw std::invalid_argument("make_tau: need 1 <= dense_end <= T");
  }
  if (dense_stride < 1 || sparse_stride < 1) {
    throw std::invalid_argument("make_tau: strides must be >= 1");
  }
  std::vector<int> taus;
  for (int t = 1; t <= dense_end; t += dense_stride) taus.push_back(t);
  for (int t = dense_end + sparse_stride; t < steps; t += sparse_stride) taus.push_back(t);
  taus.push_back(steps);
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  if (steps == 1 || taus.size() < 2) {
    throw std::invalid_argument("make_tau: parameters produce a degenerate sequence");
  }
  return TauSchedule(std::move(taus), steps);
}

TauSchedule full_tau(int steps) {
  std::vector<int> taus(steps);
  for (int t = 1; t <= steps; ++t) taus[t - 1] = t;
  return TauSchedule(std::move(taus), steps);
}

}  // namespace dndp
