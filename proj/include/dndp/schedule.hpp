#pragma once

#include <Eigen/Core>

#include <vector>

namespace dndp {

struct PosteriorCoefficients {
  double coef_x0;
  double coef_xt;
  double beta_tilde;
};

/// Linear-in-time variance schedule with a precomputed cumulative product table.
///
/// Timesteps are 1-based: beta(t) for t in [1, T], alpha_bar(t) for t in [0, T]
/// with alpha_bar(0) == 1.
class NoiseSchedule {
 public:
  /// Validates 0 < beta < 1, non-decreasing, and at least two steps.
  explicit NoiseSchedule(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const;
  double alpha_bar(int t) const;
  double sigma(int t) const;
  PosteriorCoefficients posterior(int t) const;

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  bool operator==(const NoiseSchedule& other) const { return betas_ == other.betas_; }

 private:
  void check_step(int t, int lo) const;

  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

NoiseSchedule linear_beta_schedule(int steps, double beta1, double beta_end);

inline double sigma(const NoiseSchedule& s, int t) { return s.sigma(t); }

inline PosteriorCoefficients posterior_coefficients(const NoiseSchedule& s, int t) {
  return s.posterior(t);
}

/// Strictly increasing sub-sequence of [1, T] used by accelerated sampling.
class TauSchedule {
 public:
  TauSchedule(std::vector<int> taus, int steps);

  const std::vector<int>& taus() const { return taus_; }
  int size() const { return static_cast<int>(taus_.size()); }
  int front() const { return taus_.front(); }
  int back() const { return taus_.back(); }
  bool contains(int t) const;

  bool operator==(const TauSchedule&) const = default;

 private:
  std::vector<int> taus_;
};

/// Dense stride up to dense_end, sparse stride after, always including 1 and T.
TauSchedule make_tau(int steps, int dense_end, int dense_stride, int sparse_stride);

/// Every timestep 1..T.
TauSchedule full_tau(int steps);

}  // namespace dndp
