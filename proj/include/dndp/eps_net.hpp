#pragma once

#include "dndp/forward.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dndp {

/// Small fully-convolutional noise predictor.
///
/// A stack of 3x3 dilated convolutions with SiLU activations. Every hidden
/// layer receives a per-channel bias projected from a sinusoidal embedding of
/// the timestep. Input channel 0 is x_t; a conditional net takes the upsampled
/// condition on channel 1. All parameters live in one flat vector so the
/// optimizer, checkpointing and gradient checks can treat them uniformly.
template <typename Scalar>
class EpsNet {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  static constexpr int kKernel = 3;
  static constexpr int kTaps = kKernel * kKernel;
  static constexpr int kEmbedDim = 16;

  struct Layer {
    int in = 0;
    int out = 0;
    int dilation = 1;
    bool hidden = true;
    Eigen::Index weight_offset = 0;
    Eigen::Index bias_offset = 0;
    Eigen::Index embed_offset = 0;  // only for hidden layers
  };

  /// One minibatch: `input` is (channels x batch*H*W), samples laid out as
  /// consecutive column blocks of H*W pixels in row-major order.
  struct Batch {
    Matrix input;
    std::vector<int> timesteps;
    RowVector target;
    Eigen::Index height = 0;
    Eigen::Index width = 0;
  };

  EpsNet() = default;

  EpsNet(int in_channels, int width, std::vector<int> dilations, int steps)
      : in_channels_(in_channels), width_(width), steps_(steps), dilations_(std::move(dilations)) {
    if (in_channels < 1 || in_channels > 2) {
      throw std::invalid_argument("EpsNet: in_channels must be 1 or 2");
    }
    if (width < 1 || width > 64) throw std::invalid_argument("EpsNet: width must be in [1, 64]");
    if (dilations_.size() < 2) throw std::invalid_argument("EpsNet: need at least 2 layers");
    if (steps < 1) throw std::invalid_argument("EpsNet: steps must be >= 1");
    build_layout();
    params_ = Vector::Zero(param_count_);
  }

  /// Scaled-normal initialization driven by the counter-based generator.
  void initialize(std::uint64_t seed) {
    const NoiseField rng(seed);
    std::uint64_t stream = 0;
    for (const Layer& l : layers_) {
      const double fan_in = static_cast<double>(l.in) * kTaps;
      const double gain = l.hidden ? std::sqrt(2.0 / fan_in) : 0.1 / std::sqrt(fan_in);
      const Image w = rng.normal(stream++, l.out, l.in * kTaps);
      weight(l) = (gain * w).matrix().template cast<Scalar>();
      bias(l).setZero();
      if (l.hidden) {
        const Image e = rng.normal(stream++, l.out, kEmbedDim);
        embed(l) = (0.1 * e).matrix().template cast<Scalar>();
      }
    }
  }

  int in_channels() const { return in_channels_; }
  int width() const { return width_; }
  int steps() const { return steps_; }
  bool conditional() const { return in_channels_ == 2; }
  const std::vector<int>& dilations() const { return dilations_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  template <typename Other>
  EpsNet<Other> cast() const {
    EpsNet<Other> out(in_channels_, width_, dilations_, steps_);
    out.params() = params_.template cast<Other>();
    return out;
  }

  RowVector time_embedding(int t) const {
    RowVector e(kEmbedDim);
    const double phase = 1000.0 * static_cast<double>(t) / steps_;
    constexpr int half = kEmbedDim / 2;
    for (int k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(1000.0) * k / half);
      e(k) = static_cast<Scalar>(std::sin(phase * freq));
      e(k + half) = static_cast<Scalar>(std::cos(phase * freq));
    }
    return e;
  }

  /// Predicted noise, (1 x batch*H*W).
  RowVector forward(const Matrix& input, std::span<const int> timesteps, Eigen::Index height,
                    Eigen::Index width) const {
    Cache cache;
    return forward_impl(input, timesteps, height, width, cache, false);
  }

  /// Mean squared error against batch.target; fills `grad` (same layout as params).
  Scalar loss_and_gradient(const Batch& batch, Vector& grad) const {
    Cache cache;
    const RowVector out =
        forward_impl(batch.input, batch.timesteps, batch.height, batch.width, cache, true);
    const RowVector diff = out - batch.target;
    const auto n = static_cast<Scalar>(diff.size());
    const Scalar loss = diff.squaredNorm() / n;

    grad = Vector::Zero(param_count_);
    const Eigen::Index hw = batch.height * batch.width;
    Matrix d_z = (Scalar(2) / n) * diff;
    for (auto li = static_cast<std::ptrdiff_t>(layers_.size()) - 1; li >= 0; --li) {
      const Layer& l = layers_[static_cast<std::size_t>(li)];
      const Matrix& col = cache.cols[static_cast<std::size_t>(li)];
      weight_of(grad, l).noalias() = d_z * col.transpose();
      bias_of(grad, l) = d_z.rowwise().sum();
      if (l.hidden) {
        auto g_embed = embed_of(grad, l);
        for (std::size_t b = 0; b < batch.timesteps.size(); ++b) {
          const Vector block_sum =
              d_z.middleCols(static_cast<Eigen::Index>(b) * hw, hw).rowwise().sum();
          g_embed.noalias() += block_sum * time_embedding(batch.timesteps[b]);
        }
      }
      if (li == 0) break;
      const Matrix d_col = weight(l).transpose() * d_z;
      Matrix d_act = col2im(d_col, l.in, l.dilation, batch.height, batch.width);
      const Matrix& z_prev = cache.pre[static_cast<std::size_t>(li - 1)];
      d_z = d_act.cwiseProduct(z_prev.unaryExpr([](Scalar z) { return silu_grad(z); }));
    }
    return loss;
  }

  /// im2col for one layer; exposed for tests. Row (tap * channels + c) of the
  /// result holds channel c shifted by kernel tap `tap`; out-of-image taps are 0.
  static Matrix im2col(const Matrix& act, int dilation, Eigen::Index height, Eigen::Index width) {
    const Eigen::Index channels = act.rows();
    Matrix col = Matrix::Zero(channels * kTaps, act.cols());
    for_each_tap(act.cols(), dilation, height, width,
                 [&](int tap, Eigen::Index dst, Eigen::Index src) {
                   col.block(tap * channels, dst, channels, 1) = act.col(src);
                 });
    return col;
  }

  static Matrix col2im(const Matrix& col, int channels, int dilation, Eigen::Index height,
                       Eigen::Index width) {
    Matrix act = Matrix::Zero(channels, col.cols());
    for_each_tap(col.cols(), dilation, height, width,
                 [&](int tap, Eigen::Index dst, Eigen::Index src) {
                   act.col(src) += col.block(tap * channels, dst, channels, 1);
                 });
    return act;
  }

 private:
  // Visits every (tap, output pixel, in-bounds source pixel) triple.
  template <typename Fn>
  static void for_each_tap(Eigen::Index total_cols, int dilation, Eigen::Index height,
                           Eigen::Index width, Fn&& fn) {
    const Eigen::Index hw = height * width;
    const Eigen::Index batch = total_cols / hw;
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Eigen::Index base = b * hw;
      for (Eigen::Index y = 0; y < height; ++y) {
        for (Eigen::Index x = 0; x < width; ++x) {
          const Eigen::Index dst = base + y * width + x;
          for (int ky = 0; ky < kKernel; ++ky) {
            const Eigen::Index sy = y + (ky - 1) * dilation;
            if (sy < 0 || sy >= height) continue;
            for (int kx = 0; kx < kKernel; ++kx) {
              const Eigen::Index sx = x + (kx - 1) * dilation;
              if (sx < 0 || sx >= width) continue;
              fn(ky * kKernel + kx, dst, base + sy * width + sx);
            }
          }
        }
      }
    }
  }

  struct Cache {
    std::vector<Matrix> cols;
    std::vector<Matrix> pre;
  };

  static Scalar silu(Scalar z) { return z / (Scalar(1) + std::exp(-z)); }
  static Scalar silu_grad(Scalar z) {
    const Scalar s = Scalar(1) / (Scalar(1) + std::exp(-z));
    return s * (Scalar(1) + z * (Scalar(1) - s));
  }

  void build_layout() {
    layers_.clear();
    Eigen::Index offset = 0;
    const auto n = static_cast<int>(dilations_.size());
    for (int i = 0; i < n; ++i) {
      Layer l;
      l.in = i == 0 ? in_channels_ : width_;
      l.out = i == n - 1 ? 1 : width_;
      l.dilation = dilations_[static_cast<std::size_t>(i)];
      if (l.dilation < 1) throw std::invalid_argument("EpsNet: dilation must be >= 1");
      l.hidden = i != n - 1;
      l.weight_offset = offset;
      offset += static_cast<Eigen::Index>(l.out) * l.in * kTaps;
      l.bias_offset = offset;
      offset += l.out;
      if (l.hidden) {
        l.embed_offset = offset;
        offset += static_cast<Eigen::Index>(l.out) * kEmbedDim;
      }
      layers_.push_back(l);
    }
    param_count_ = offset;
  }

  static Eigen::Map<Matrix> weight_of(Vector& p, const Layer& l) {
    return {p.data() + l.weight_offset, l.out, l.in * kTaps};
  }
  static Eigen::Map<const Matrix> weight_of(const Vector& p, const Layer& l) {
    return {p.data() + l.weight_offset, l.out, l.in * kTaps};
  }
  static Eigen::Map<Vector> bias_of(Vector& p, const Layer& l) {
    return {p.data() + l.bias_offset, l.out};
  }
  static Eigen::Map<const Vector> bias_of(const Vector& p, const Layer& l) {
    return {p.data() + l.bias_offset, l.out};
  }
  static Eigen::Map<Matrix> embed_of(Vector& p, const Layer& l) {
    return {p.data() + l.embed_offset, l.out, kEmbedDim};
  }
  static Eigen::Map<const Matrix> embed_of(const Vector& p, const Layer& l) {
    return {p.data() + l.embed_offset, l.out, kEmbedDim};
  }

  Eigen::Map<Matrix> weight(const Layer& l) { return weight_of(params_, l); }
  Eigen::Map<const Matrix> weight(const Layer& l) const { return weight_of(params_, l); }
  Eigen::Map<Vector> bias(const Layer& l) { return bias_of(params_, l); }
  Eigen::Map<Matrix> embed(const Layer& l) { return embed_of(params_, l); }

  RowVector forward_impl(const Matrix& input, std::span<const int> timesteps, Eigen::Index height,
                         Eigen::Index width, Cache& cache, bool keep) const {
    const Eigen::Index hw = height * width;
    if (input.rows() != in_channels_) {
      throw std::invalid_argument("EpsNet: expected " + std::to_string(in_channels_) +
                                  " input channels, got " + std::to_string(input.rows()));
    }
    if (hw <= 0 || input.cols() != hw * static_cast<Eigen::Index>(timesteps.size())) {
      throw std::invalid_argument("EpsNet: input columns do not match batch geometry");
    }
    Matrix act = input;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const Layer& l = layers_[li];
      Matrix col = im2col(act, l.dilation, height, width);
      Matrix z = weight_of(params_, l) * col;
      z.colwise() += bias_of(params_, l);
      if (l.hidden) {
        const auto proj = embed_of(params_, l);
        for (std::size_t b = 0; b < timesteps.size(); ++b) {
          const Vector shift = proj * time_embedding(timesteps[b]).transpose();
          z.middleCols(static_cast<Eigen::Index>(b) * hw, hw).colwise() += shift;
        }
      }
      if (keep) cache.cols.push_back(std::move(col));
      if (l.hidden) {
        act = z.unaryExpr([](Scalar v) { return silu(v); });
        if (keep) cache.pre.push_back(std::move(z));
      } else {
        act = std::move(z);
      }
    }
    return act;
  }

  int in_channels_ = 1;
  int width_ = 0;
  int steps_ = 0;
  std::vector<int> dilations_;
  std::vector<Layer> layers_;
  Eigen::Index param_count_ = 0;
  Vector params_;
};

}  // namespace dndp
