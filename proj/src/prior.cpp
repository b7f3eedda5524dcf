#include "dndp/prior.hpp"

#include "dndp/forward.hpp"
#include "dndp/resample.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dndp {

void MeanPredictor::check_call(const Image& x_t, int t, const Image* condition) const {
  if (t < 1 || t > schedule_.steps()) {
    throw std::out_of_range("predict_mu: timestep " + std::to_string(t) + " outside [1, " +
                            std::to_string(schedule_.steps()) + "]");
  }
  if (x_t.size() == 0) throw std::invalid_argument("predict_mu: empty input");
  if (conditional() && condition == nullptr) {
    throw std::invalid_argument("predict_mu: conditional predictor called without a condition");
  }
}

Image mu_from_eps(const Image& x_t, int t, const Image& eps_hat, const NoiseSchedule& s) {
  require_same_shape(x_t, eps_hat, "mu_from_eps");
  const double b = s.beta(t);
  const double ab = s.alpha_bar(t);
  return (x_t - (b / std::sqrt(1.0 - ab)) * eps_hat) / std::sqrt(1.0 - b);
}

AnalyticGaussianPrior::AnalyticGaussianPrior(NoiseSchedule schedule, Image mean_image,
                                             double prior_std)
    : MeanPredictor(std::move(schedule)), mean_(std::move(mean_image)), std_(prior_std) {
  if (!(prior_std > 0.0)) throw std::invalid_argument("AnalyticGaussianPrior: std must be > 0");
}

Image AnalyticGaussianPrior::posterior_x0(const Image& x_t, int t) const {
  require_same_shape(x_t, mean_, "AnalyticGaussianPrior");
  const double ab = schedule().alpha_bar(t);
  const double var = std_ * std_;
  return (std::sqrt(ab) * var * x_t + (1.0 - ab) * mean_) / (ab * var + 1.0 - ab);
}

Image AnalyticGaussianPrior::predict_mu(const Image& x_t, int t, const Image* condition) const {
  check_call(x_t, t, condition);
  return posterior_mean_tilde(x_t, posterior_x0(x_t, t), t, schedule());
}

Image analytic_predict_mu(const AnalyticGaussianPrior& p, const Image& x_t, int t) {
  return p.predict_mu(x_t, t);
}

Image condition_to_resolution(const Image& condition, Eigen::Index rows, Eigen::Index cols) {
  if (condition.rows() == 0 || rows % condition.rows() != 0 || cols % condition.cols() != 0 ||
      rows / condition.rows() != cols / condition.cols()) {
    throw std::invalid_argument("condition shape is not an integer fraction of the input shape");
  }
  return upsample_bicubic(condition, static_cast<int>(rows / condition.rows()));
}

NetMeanPredictor::NetMeanPredictor(NoiseSchedule schedule, EpsNet<float> net)
    : MeanPredictor(std::move(schedule)), net_(std::move(net)) {
  if (net_.steps() != this->schedule().steps()) {
    throw std::invalid_argument("NetMeanPredictor: network trained for " +
                                std::to_string(net_.steps()) + " steps, schedule has " +
                                std::to_string(this->schedule().steps()));
  }
}

Image NetMeanPredictor::predict_eps(const Image& x_t, int t, const Image* condition) const {
  check_call(x_t, t, condition);
  const Eigen::Index hw = x_t.size();
  EpsNet<float>::Matrix input(net_.in_channels(), hw);
  input.row(0) = Eigen::Map<const Eigen::RowVectorXd>(x_t.data(), hw).cast<float>();
  if (net_.conditional()) {
    const Image up = condition_to_resolution(*condition, x_t.rows(), x_t.cols());
    input.row(1) = Eigen::Map<const Eigen::RowVectorXd>(up.data(), hw).cast<float>();
  }
  const int ts[] = {t};
  const EpsNet<float>::RowVector eps = net_.forward(input, ts, x_t.rows(), x_t.cols());
  Image out(x_t.rows(), x_t.cols());
  Eigen::Map<Eigen::RowVectorXd>(out.data(), hw) = eps.cast<double>();
  return out;
}

Image NetMeanPredictor::predict_mu(const Image& x_t, int t, const Image* condition) const {
  return mu_from_eps(x_t, t, predict_eps(x_t, t, condition), schedule());
}

template <typename Scalar>
typename EpsNet<Scalar>::Batch make_training_batch(std::span<const Image> dataset,
                                                   std::span<const Image> conditions,
                                                   const NoiseSchedule& s, int batch, int crop,
                                                   std::uint64_t seed, std::uint64_t step) {
  if (dataset.empty()) throw std::invalid_argument("training: empty dataset");
  if (!conditions.empty() && conditions.size() != dataset.size()) {
    throw std::invalid_argument("training: one condition per dataset image required");
  }
  const Eigen::Index rows = dataset.front().rows();
  const Eigen::Index cols = dataset.front().cols();
  const Eigen::Index h = crop > 0 ? std::min<Eigen::Index>(crop, rows) : rows;
  const Eigen::Index w = crop > 0 ? std::min<Eigen::Index>(crop, cols) : cols;
  const Eigen::Index hw = h * w;
  const int channels = conditions.empty() ? 1 : 2;

  typename EpsNet<Scalar>::Batch out;
  out.height = h;
  out.width = w;
  out.input.resize(channels, hw * batch);
  out.target.resize(hw * batch);
  out.timesteps.resize(static_cast<std::size_t>(batch));

  const NoiseField rng(seed);
  auto pick = [](double u, Eigen::Index n) {
    return std::min<Eigen::Index>(static_cast<Eigen::Index>(u * static_cast<double>(n)), n - 1);
  };
  for (int j = 0; j < batch; ++j) {
    const std::uint64_t stream = (step * 1024 + static_cast<std::uint64_t>(j)) * 2;
    const auto idx = static_cast<std::size_t>(pick(rng.uniform(stream, 0), static_cast<Eigen::Index>(dataset.size())));
    const int t = 1 + static_cast<int>(pick(rng.uniform(stream, 1), s.steps()));
    const Eigen::Index oy = pick(rng.uniform(stream, 2), rows - h + 1);
    const Eigen::Index ox = pick(rng.uniform(stream, 3), cols - w + 1);

    const Image& full = dataset[idx];
    if (full.rows() != rows || full.cols() != cols) {
      throw std::invalid_argument("training: dataset images must share one shape");
    }
    const Image x0 = full.block(oy, ox, h, w);
    const Image eps = rng.normal(stream + 1, h, w);
    const Image xt = sample_forward(x0, t, eps, s);

    out.timesteps[static_cast<std::size_t>(j)] = t;
    const Eigen::Index base = j * hw;
    out.input.row(0).segment(base, hw) =
        Eigen::Map<const Eigen::RowVectorXd>(xt.data(), hw).cast<Scalar>();
    if (channels == 2) {
      const Image c = conditions[idx].block(oy, ox, h, w);
      out.input.row(1).segment(base, hw) =
          Eigen::Map<const Eigen::RowVectorXd>(c.data(), hw).cast<Scalar>();
    }
    out.target.segment(base, hw) = Eigen::Map<const Eigen::RowVectorXd>(eps.data(), hw).cast<Scalar>();
  }
  return out;
}

template EpsNet<float>::Batch make_training_batch<float>(std::span<const Image>,
                                                         std::span<const Image>,
                                                         const NoiseSchedule&, int, int,
                                                         std::uint64_t, std::uint64_t);
template EpsNet<double>::Batch make_training_batch<double>(std::span<const Image>,
                                                           std::span<const Image>,
                                                           const NoiseSchedule&, int, int,
                                                           std::uint64_t, std::uint64_t);

EpsNet<float> train_eps_predictor(EpsNet<float> net, std::span<const Image> dataset,
                                  std::span<const Image> conditions, const NoiseSchedule& s,
                                  const TrainOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("train_eps_predictor: empty dataset");
  if (options.steps < 0) throw std::invalid_argument("train_eps_predictor: steps must be >= 0");
  if (options.batch < 1) throw std::invalid_argument("train_eps_predictor: batch must be >= 1");
  if (net.conditional() != !conditions.empty()) {
    throw std::invalid_argument("train_eps_predictor: conditions must be given iff the net is conditional");
  }
  if (net.steps() != s.steps()) {
    throw std::invalid_argument("train_eps_predictor: net/schedule step count mismatch");
  }

  using Vector = EpsNet<float>::Vector;
  constexpr float beta1 = 0.9f;
  constexpr float beta2 = 0.999f;
  constexpr float adam_eps = 1e-8f;
  const auto lr = static_cast<float>(options.learning_rate);

  Vector m = Vector::Zero(net.params().size());
  Vector v = Vector::Zero(net.params().size());
  Vector grad;
  float beta1_pow = 1.0f;
  float beta2_pow = 1.0f;

  for (int step = 0; step < options.steps; ++step) {
    const auto batch = make_training_batch<float>(dataset, conditions, s, options.batch,
                                                  options.crop, options.seed,
                                                  static_cast<std::uint64_t>(step));
    const float loss = net.loss_and_gradient(batch, grad);
    if (!std::isfinite(loss) || !grad.allFinite()) {
      std::ostringstream msg;
      msg << "train_eps_predictor: non-finite loss " << loss << " at step " << step
          << " (param norm " << net.params().norm() << ")";
      throw NonFiniteError(msg.str(), step);
    }
    beta1_pow *= beta1;
    beta2_pow *= beta2;
    m = beta1 * m + (1.0f - beta1) * grad;
    v = beta2 * v + (1.0f - beta2) * grad.cwiseAbs2();
    const float step_size = lr / (1.0f - beta1_pow);
    const float bias2 = 1.0f - beta2_pow;
    net.params().array() -=
        step_size * m.array() / ((v.array() / bias2).sqrt() + adam_eps);
    if (options.on_step) options.on_step(step, loss);
  }
  return net;
}

Image ancestral_sample(const MeanPredictor& pred, Eigen::Index rows, Eigen::Index cols,
                       const Image* condition, std::uint64_t seed) {
  if (pred.conditional() && condition == nullptr) {
    throw std::invalid_argument("ancestral_sample: conditional predictor needs a condition");
  }
  const NoiseSchedule& s = pred.schedule();
  const NoiseField rng(seed);
  const int steps = s.steps();
  Image x = rng.normal(static_cast<std::uint64_t>(steps) + 1, rows, cols);
  for (int t = steps; t >= 1; --t) {
    Image mu = pred.predict_mu(x, t, condition);
    if (t > 1) {
      x = mu + s.sigma(t) * rng.normal(static_cast<std::uint64_t>(t), rows, cols);
    } else {
      x = std::move(mu);
    }
    if (!all_finite(x)) throw NonFiniteError("ancestral_sample: non-finite state", t);
  }
  return x;
}

}  // namespace dndp
