#pragma once

#include <array>

#include <Eigen/Core>

namespace comfort {

/// Most raw DOFs any single term touches: four speed, four orientation,
/// and the path length.
inline constexpr int kMaxLocalDofs = 9;

/// Value, gradient and Hessian of one scalar term with respect to the raw
/// DOFs listed in `dofs[0..count)`.
struct LocalBlock {
  int count = 0;
  std::array<int, kMaxLocalDofs> dofs{};
  double value = 0.0;
  Eigen::Matrix<double, kMaxLocalDofs, 1> grad = Eigen::Matrix<double, kMaxLocalDofs, 1>::Zero();
  Eigen::Matrix<double, kMaxLocalDofs, kMaxLocalDofs> hess =
      Eigen::Matrix<double, kMaxLocalDofs, kMaxLocalDofs>::Zero();
};

}  // namespace comfort
