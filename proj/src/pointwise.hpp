#pragma once

// Pointwise densities in the primitive variables
//   p = (v, v', v'', theta', theta'', lambda)
// with analytic gradients and Hessians, and the linear map from element DOFs
// to p at one point.

#include <Eigen/Core>

#include "comfort/kinematics.hpp"
#include "comfort/local_block.hpp"

namespace comfort::detail {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

enum Primitive { kV = 0, kV1 = 1, kV2 = 2, kT1 = 3, kT2 = 4, kLam = 5 };

struct PointValue {
  double value = 0.0;
  Vec6 grad = Vec6::Zero();
  Mat6 hess = Mat6::Zero();
};

/// lambda / v
PointValue time_density(const Vec6& p);
/// v / lambda^3 * (v'^2 + v v'' - v^2 theta'^2)^2
PointValue tangential_density(const Vec6& p);
/// v^3 / lambda^3 * (3 v' theta' + v theta'')^2
PointValue normal_density(const Vec6& p);

/// Primitive map P (6 x count) at one point: p = P * dofs[local].
struct PrimitiveMap {
  int count = 0;
  std::array<int, kMaxLocalDofs> dofs{};
  Eigen::Matrix<double, 6, kMaxLocalDofs> P = Eigen::Matrix<double, 6, kMaxLocalDofs>::Zero();
};

/// Map built from speed and orientation stencils. Either stencil may be
/// skipped when the term does not depend on that field.
PrimitiveMap primitive_map(const FieldStencil* vs, const FieldStencil* ts, int lambda_dof);

Vec6 primitives(const PrimitiveMap& map, const DofVector& dofs);

/// Adds weight * (value, P^T grad, P^T hess P) into a local block sharing
/// the map's DOF list.
void accumulate(LocalBlock& block, const PrimitiveMap& map, const PointValue& pv, double weight,
                int order);

}  // namespace comfort::detail
