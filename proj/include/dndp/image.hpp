#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace dndp {

/// Row-major 2D intensity grid. rows() is the image height, cols() the width.
template <typename Scalar>
using ImageT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Image = ImageT<double>;

/// Thrown when an intermediate or output contains NaN/Inf.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, int timestep)
      : std::runtime_error(what + " (timestep " + std::to_string(timestep) + ")"),
        timestep_(timestep) {}

  int timestep() const noexcept { return timestep_; }

 private:
  int timestep_;
};

template <typename A, typename B>
bool same_shape(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

template <typename A, typename B>
void require_same_shape(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b,
                        const char* where) {
  if (!same_shape(a, b)) {
    throw std::invalid_argument(std::string(where) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& img) {
  return img.derived().allFinite();
}

}  // namespace dndp
