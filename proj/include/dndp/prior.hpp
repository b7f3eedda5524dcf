#pragma once

#include "dndp/eps_net.hpp"
#include "dndp/image.hpp"
#include "dndp/schedule.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>

namespace dndp {

/// Reverse-process mean mu(x_t, t[, c]) bound to one noise schedule.
///
/// Implementations must be deterministic and shape-preserving. A conditional
/// predictor requires a condition image on every call; an unconditional one
/// ignores it.
class MeanPredictor {
 public:
  explicit MeanPredictor(NoiseSchedule schedule) : schedule_(std::move(schedule)) {}
  virtual ~MeanPredictor() = default;

  virtual Image predict_mu(const Image& x_t, int t, const Image* condition = nullptr) const = 0;
  virtual bool conditional() const = 0;

  const NoiseSchedule& schedule() const { return schedule_; }

 protected:
  void check_call(const Image& x_t, int t, const Image* condition) const;

 private:
  NoiseSchedule schedule_;
};

/// mu = (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(1 - beta_t)
Image mu_from_eps(const Image& x_t, int t, const Image& eps_hat, const NoiseSchedule& s);

/// Exact reverse mean for data distributed as N(mean_image, prior_std^2 I).
class AnalyticGaussianPrior final : public MeanPredictor {
 public:
  AnalyticGaussianPrior(NoiseSchedule schedule, Image mean_image, double prior_std);

  Image predict_mu(const Image& x_t, int t, const Image* condition = nullptr) const override;
  bool conditional() const override { return false; }

  /// E[x0 | x_t] under the Gaussian prior.
  Image posterior_x0(const Image& x_t, int t) const;

  const Image& mean_image() const { return mean_; }
  double prior_std() const { return std_; }

 private:
  Image mean_;
  double std_;
};

Image analytic_predict_mu(const AnalyticGaussianPrior& p, const Image& x_t, int t);

/// Learned predictor: an EpsNet evaluated in single precision.
///
/// A conditional net receives the condition bicubically upsampled to the
/// input resolution on its second channel.
class NetMeanPredictor final : public MeanPredictor {
 public:
  NetMeanPredictor(NoiseSchedule schedule, EpsNet<float> net);

  Image predict_eps(const Image& x_t, int t, const Image* condition = nullptr) const;
  Image predict_mu(const Image& x_t, int t, const Image* condition = nullptr) const override;
  bool conditional() const override { return net_.conditional(); }

  const EpsNet<float>& net() const { return net_; }

 private:
  EpsNet<float> net_;
};

/// Upsamples `condition` to (rows, cols) by the integer factor implied by the
/// shapes. Throws if the shapes are not an integer multiple.
Image condition_to_resolution(const Image& condition, Eigen::Index rows, Eigen::Index cols);

struct TrainOptions {
  int steps = 1000;
  double learning_rate = 1e-3;
  int batch = 8;
  /// Square random crop side used for each sample; 0 trains on full images.
  int crop = 0;
  std::uint64_t seed = 0;
  /// Called after each optimizer step with (step, minibatch loss).
  std::function<void(int, double)> on_step;
};

/// Simplified epsilon-matching objective E||eps - eps_theta(x_t, t)||^2 with t
/// uniform in [1, T], optimized with Adam.
///
/// `conditions` is empty for an unconditional net, otherwise one condition
/// image per dataset entry already at dataset resolution.
EpsNet<float> train_eps_predictor(EpsNet<float> net, std::span<const Image> dataset,
                                  std::span<const Image> conditions, const NoiseSchedule& s,
                                  const TrainOptions& options);

/// Draws one minibatch exactly as training does. Exposed for gradient checks.
template <typename Scalar>
typename EpsNet<Scalar>::Batch make_training_batch(std::span<const Image> dataset,
                                                   std::span<const Image> conditions,
                                                   const NoiseSchedule& s, int batch, int crop,
                                                   std::uint64_t seed, std::uint64_t step);

/// Ancestral sampling from standard-normal x_T down to x_0.
Image ancestral_sample(const MeanPredictor& pred, Eigen::Index rows, Eigen::Index cols,
                       const Image* condition, std::uint64_t seed);

}  // namespace dndp
