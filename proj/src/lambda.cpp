#include "dndp/lambda.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dndp {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double provisional(const LambdaVariant& v) {
  return std::visit([](const auto& p) { return p.lambda0; }, v);
}

}  // namespace

LambdaPolicy::LambdaPolicy(LambdaVariant variant) : variant_(std::move(variant)) {
  if (provisional(variant_) < 0.0) throw std::invalid_argument("lambda0 must be >= 0");
  if (const auto* p = std::get_if<AdaLamII>(&variant_); p && p->c < 0.0) {
    throw std::invalid_argument("AdaLam-II coefficient c must be >= 0");
  }
  if (const auto* p = std::get_if<CombinedLam>(&variant_); p && p->c < 0.0) {
    throw std::invalid_argument("AdaLam-I&II coefficient c must be >= 0");
  }
}

std::string LambdaPolicy::name() const {
  return std::visit(overloaded{[](const ConsLam&) { return std::string("ConsLam"); },
                               [](const AdaLamI&) { return std::string("AdaLam-I"); },
                               [](const AdaLamII&) { return std::string("AdaLam-II"); },
                               [](const CombinedLam&) { return std::string("AdaLam-I&II"); }},
                    variant_);
}

bool LambdaPolicy::adaptive() const { return !std::holds_alternative<ConsLam>(variant_); }

LambdaValue LambdaPolicy::base() const {
  if (resolved_) return *resolved_;
  return provisional(variant_);
}

LambdaPolicy LambdaPolicy::with_base(LambdaValue base) const {
  const bool negative = std::visit(
      overloaded{[](double v) { return v < 0.0; }, [](const Image& m) { return (m < 0.0).any(); }},
      base);
  if (negative) throw std::invalid_argument("lambda base must be non-negative");
  LambdaPolicy out = *this;
  out.resolved_ = std::move(base);
  return out;
}

LambdaValue lambda_at(const LambdaValue& base, int t, const NoiseSchedule& s) {
  const double scale = std::sqrt(s.alpha_bar(t));
  return std::visit(overloaded{[&](double v) -> LambdaValue {
                                 if (v < 0.0) throw std::invalid_argument("lambda_at: negative base");
                                 return v * scale;
                               },
                               [&](const Image& m) -> LambdaValue {
                                 if ((m < 0.0).any()) {
                                   throw std::invalid_argument("lambda_at: negative base");
                                 }
                                 return Image(m * scale);
                               }},
                    base);
}

Image estimate_noise(const Image& y0, const Image& x0_hat) {
  require_same_shape(y0, x0_hat, "estimate_noise");
  return (y0 - x0_hat).abs();
}

double population_std(const Image& img) {
  if (img.size() == 0) throw std::invalid_argument("population_std: empty image");
  const double mean = img.mean();
  return std::sqrt((img - mean).square().mean());
}

double adalam1(const Image& n_hat, double a, double b) {
  return std::max(0.0, a * population_std(n_hat) + b);
}

Image adalam2(const Image& n_hat, double c) {
  if (c < 0.0) throw std::invalid_argument("adalam2: c must be >= 0");
  return c * n_hat;
}

double mean_lambda(const LambdaValue& v) {
  return std::visit(overloaded{[](double s) { return s; }, [](const Image& m) { return m.mean(); }},
                    v);
}

Image box_filter(const Image& img, int radius) {
  if (radius <= 0) return img;
  Image out(img.rows(), img.cols());
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    const Eigen::Index r0 = std::max<Eigen::Index>(0, r - radius);
    const Eigen::Index r1 = std::min<Eigen::Index>(img.rows() - 1, r + radius);
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      const Eigen::Index c0 = std::max<Eigen::Index>(0, c - radius);
      const Eigen::Index c1 = std::min<Eigen::Index>(img.cols() - 1, c + radius);
      out(r, c) = img.block(r0, c0, r1 - r0 + 1, c1 - c0 + 1).mean();
    }
  }
  return out;
}

RefineResult refine(const LambdaPolicy& policy, const Image& y0, const Image& x0_hat_coarse) {
  const Image n_hat = estimate_noise(y0, x0_hat_coarse);
  const double noise_std = population_std(n_hat);
  const Image pattern = box_filter(n_hat, policy.smoothing_radius);

  return std::visit(
      overloaded{
          [&](const ConsLam& p) { return RefineResult{policy, noise_std, p.lambda0}; },
          [&](const AdaLamI& p) {
            const double level = adalam1(n_hat, p.a, p.b);
            return RefineResult{policy.with_base(level), noise_std, level};
          },
          [&](const AdaLamII& p) {
            Image map = adalam2(pattern, p.c);
            const double level = map.mean();
            return RefineResult{policy.with_base(std::move(map)), noise_std, level};
          },
          [&](const CombinedLam& p) {
            const double level = adalam1(n_hat, p.a, p.b);
            const Image map = adalam2(pattern, p.c);
            const double map_mean = map.mean();
            // Degenerate spatial pattern falls back to the scalar level.
            if (!(map_mean > 0.0)) return RefineResult{policy.with_base(level), noise_std, level};
            return RefineResult{policy.with_base(Image(level * map / map_mean)), noise_std, level};
          }},
      policy.variant());
}

}  // namespace dndp
