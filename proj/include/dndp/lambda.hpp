#pragma once

#include "dndp/image.hpp"
#include "dndp/schedule.hpp"

#include <optional>
#include <string>
#include <type_traits>
#include <variant>

namespace dndp {

/// Likelihood/prior trade-off: a global scalar or a per-pixel map.
using LambdaValue = std::variant<double, Image>;

struct ConsLam {
  double lambda0 = 0.0;
};

/// lambda0_ada = a * std(n_hat) + b; lambda0 drives the coarse pass.
struct AdaLamI {
  double lambda0 = 0.0;
  double a = 0.0;
  double b = 0.0;
};

/// Lambda0_ada = c * n_hat; lambda0 drives the coarse pass.
struct AdaLamII {
  double lambda0 = 0.0;
  double c = 0.0;
};

/// AdaLam-I sets the global level, AdaLam-II the spatial pattern.
struct CombinedLam {
  double lambda0 = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

using LambdaVariant = std::variant<ConsLam, AdaLamI, AdaLamII, CombinedLam>;

class LambdaPolicy {
 public:
  LambdaPolicy(LambdaVariant variant);  // NOLINT(google-explicit-constructor)

  template <typename P>
    requires std::is_constructible_v<LambdaVariant, P> && (!std::is_same_v<P, LambdaVariant>)
  LambdaPolicy(P policy)  // NOLINT(google-explicit-constructor)
      : LambdaPolicy(LambdaVariant(std::move(policy))) {}

  const LambdaVariant& variant() const { return variant_; }
  std::string name() const;

  /// True for AdaLam variants (they need a coarse pass and refinement).
  bool adaptive() const;
  bool resolved() const { return resolved_.has_value(); }

  /// The base consumed by the solver: the refined base when resolved,
  /// otherwise the provisional scalar lambda0.
  LambdaValue base() const;

  /// Replaces the base; used by refinement and by callers sweeping lambda.
  LambdaPolicy with_base(LambdaValue base) const;

  /// Box-filter radius applied to n_hat before AdaLam-II (0 disables).
  int smoothing_radius = 0;

 private:
  LambdaVariant variant_;
  std::optional<LambdaValue> resolved_;
};

/// lambda_t = base * sqrt(abar_t), elementwise for maps.
LambdaValue lambda_at(const LambdaValue& base, int t, const NoiseSchedule& s);

/// n_hat = |y0 - x0_hat|.
Image estimate_noise(const Image& y0, const Image& x0_hat);

/// Population standard deviation over all pixels.
double population_std(const Image& img);

double adalam1(const Image& n_hat, double a, double b);
Image adalam2(const Image& n_hat, double c);

struct RefineResult {
  LambdaPolicy policy{LambdaVariant{ConsLam{}}};
  double noise_std = 0.0;      // std(n_hat)
  double lambda0_ada = 0.0;    // scalar level; mean of the map for AdaLam-II
};

/// Resolves an adaptive policy from the coarse estimate. ConsLam is returned unchanged.
RefineResult refine(const LambdaPolicy& policy, const Image& y0, const Image& x0_hat_coarse);

/// Mean of a LambdaValue (the value itself for scalars).
double mean_lambda(const LambdaValue& v);

/// Mean over a (2r+1)^2 window clipped at the borders.
Image box_filter(const Image& img, int radius);

}  // namespace dndp
