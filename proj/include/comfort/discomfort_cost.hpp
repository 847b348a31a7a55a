#pragma once

// Discomfort functional
//   J = int lambda/v du + w_T int v/lambda^3 (v'^2 + v v'' - v^2 theta'^2)^2 du
//                       + w_N int v^3/lambda^3 (3 v' theta' + v theta'')^2 du
// by per-element Gauss quadrature, with analytic gradient and Hessian.

#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "comfort/kinematics.hpp"
#include "comfort/local_block.hpp"

namespace comfort {

struct CostBreakdown {
  double J_tau = 0.0;    ///< travel time (s)
  double J_T_raw = 0.0;  ///< squared tangential jerk integral
  double J_N_raw = 0.0;  ///< squared normal jerk integral
  double J_T = 0.0;      ///< w_T * J_T_raw
  double J_N = 0.0;      ///< w_N * J_N_raw
  double J_total = 0.0;
};

/// Lower triangle of a symmetric matrix over the free DOFs, duplicates summed.
struct SparseHessian {
  int dim = 0;
  std::vector<Eigen::Triplet<double>> entries;

  /// Full symmetric matrix.
  Eigen::SparseMatrix<double> to_matrix() const;
};

/// Evaluation options. A quadrature point with v <= speed_floor raises
/// NonPositiveSpeedError.
struct CostOptions {
  double speed_floor = 0.0;
  int quadrature_points = kGaussPoints;
};

CostBreakdown cost_eval(const DofVector& dofs, const Weights& weights,
                        const CostOptions& options = {});

/// Gradient over the free DOFs (layout().free_to_raw() order).
Eigen::VectorXd cost_gradient(const DofVector& dofs, const Weights& weights,
                              const CostOptions& options = {});

SparseHessian cost_hessian(const DofVector& dofs, const Weights& weights,
                           const CostOptions& options = {});

/// Weighted cost of one element over raw DOFs. `order` selects value (0),
/// gradient (1) or Hessian (2).
LocalBlock element_cost(const DofVector& dofs, int element, const Weights& weights,
                        double speed_floor, int order);

}  // namespace comfort
