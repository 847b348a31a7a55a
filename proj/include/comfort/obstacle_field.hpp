#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace comfort {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct RadialValue {
  double rho = 0.0;
  double d1 = 0.0;  ///< d rho / d phi
  double d2 = 0.0;  ///< d^2 rho / d phi^2
};

struct Clearance {
  double value = 0.0;  ///< >= 0 exactly when the point is outside
  Vec2 gradient = Vec2::Zero();
  Mat2 hessian = Mat2::Zero();
};

/// Obstacle described by a center and a 2*pi-periodic radial distance rho(phi).
///
/// The radial profile is either a constant (circle) or a periodic C2 cubic
/// spline through user knots (phi_k, rho_k).
class StarShapedObstacle {
 public:
  static StarShapedObstacle circle(const Vec2& center, double radius);
  /// Knots need not be sorted; angles are wrapped into [0, 2*pi). At least
  /// three distinct angles are required.
  static StarShapedObstacle polar(const Vec2& center, std::vector<std::pair<double, double>> knots);

  const Vec2& center() const { return center_; }
  bool is_circle() const { return knots_phi_.empty(); }
  double radius() const { return radius_; }
  const std::vector<double>& knot_angles() const { return knots_phi_; }
  const std::vector<double>& knot_radii() const { return knots_rho_; }

  RadialValue rho(double phi) const;

  /// C(r) = |r - c| - rho(atan2(r - c)) with gradient and Hessian in r.
  /// The caller must keep r away from the center.
  Clearance clearance(const Vec2& r) const;

  /// Largest radius of the profile (sampled for splines).
  double max_radius() const;

  /// Non-fatal diagnostics: non-positive sampled radii.
  std::vector<std::string> validate() const;

 private:
  Vec2 center_ = Vec2::Zero();
  double radius_ = 0.0;
  std::vector<double> knots_phi_;
  std::vector<double> knots_rho_;
  std::vector<double> second_derivs_;
};

struct ObstacleField {
  std::vector<StarShapedObstacle> obstacles;

  bool empty() const { return obstacles.empty(); }
  std::size_t size() const { return obstacles.size(); }
};

}  // namespace comfort
