#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "comfort/mesh_basis.hpp"
#include "comfort/obstacle_field.hpp"

namespace comfort {

/// Boundary data at one end of the trajectory. SI units throughout.
struct BoundaryState {
  Vec2 position = Vec2::Zero();
  double theta = 0.0;
  double kappa = 0.0;
  double v = 0.0;
  double a_T = 0.0;
};

struct Range {
  double min = 0.0;
  double max = 0.0;
};

struct Limits {
  double v_max = 1.0;
  Range a_T{-1.0, 1.0};
  Range a_N{-1.0, 1.0};
  Range omega{-1.0, 1.0};
  double kappa_max = 1.0;

  double turning_radius() const { return 1.0 / kappa_max; }
};

struct Weights {
  double w_T = 1.0;
  double w_N = 1.0;
};

struct ProblemSpec {
  BoundaryState start;
  BoundaryState end;
  Limits limits;
  Weights weights;
  ObstacleField obstacles;
  int n_elements = 12;
  int points_per_element = 4;

  /// Throws InvalidSpecError when an invariant does not hold.
  void validate() const;
};

/// Singular exponent used at a zero-speed end: 2/3 for zero tangential
/// acceleration, 1/2 otherwise.
double singular_exponent(const BoundaryState& state);

/// Mesh for a spec: boundary elements are singular where the speed is zero.
Mesh mesh_for(const ProblemSpec& spec, int n_elements);

enum class DofRole {
  free,        ///< plain unknown
  eliminated,  ///< fixed by Dirichlet data, removed from the unknowns
  relation,    ///< unknown tied to boundary data by an explicit equality
};

/// Linear map from element DOFs to a field value and its first two
/// u-derivatives at one point.
struct FieldStencil {
  int count = 0;
  std::array<int, 4> dofs{};
  std::array<double, 4> value{};
  std::array<double, 4> d1{};
  std::array<double, 4> d2{};
};

/// Global ordering of unknowns: (v, v', theta, theta') per node in u-order,
/// then (x, y) per constraint point in u-order, then the path length.
class DofLayout {
 public:
  DofLayout(Mesh mesh, int points_per_element);

  const Mesh& mesh() const { return mesh_; }
  int n_elements() const { return mesh_.n_elements; }
  int n_nodes() const { return mesh_.n_elements + 1; }
  int points_per_element() const { return points_per_element_; }
  /// Number of position pairs, n*M + n + 1.
  int n_points() const { return n_points_; }
  int raw_size() const { return 4 * n_nodes() + 2 * n_points_ + 1; }

  int v(int node) const { return 4 * node; }
  int dv(int node) const { return 4 * node + 1; }
  int theta(int node) const { return 4 * node + 2; }
  int dtheta(int node) const { return 4 * node + 3; }
  int px(int point) const { return 4 * n_nodes() + 2 * point; }
  int py(int point) const { return 4 * n_nodes() + 2 * point + 1; }
  int lambda() const { return raw_size() - 1; }

  double point_u(int point) const;
  /// Element holding the segment [u_{j-1}, u_j], j >= 1.
  int segment_element(int j) const { return (j - 1) / (points_per_element_ + 1); }

  void set_role(int raw, DofRole role);
  DofRole role(int raw) const { return roles_[raw]; }
  bool is_unknown(int raw) const { return roles_[raw] != DofRole::eliminated; }
  /// Index in the unknown vector, or -1 when eliminated.
  int free_index(int raw) const { return free_index_[raw]; }
  int free_size() const { return static_cast<int>(free_to_raw_.size()); }
  const std::vector<int>& free_to_raw() const { return free_to_raw_; }

  FieldStencil v_stencil(int element, double x) const;
  FieldStencil theta_stencil(int element, double x) const;

  /// Stencils at the 12 Gauss points of each element.
  const FieldStencil& v_gauss(int element, int q) const {
    return v_gauss_[element * kGaussPoints + q];
  }
  const FieldStencil& theta_gauss(int element, int q) const {
    return theta_gauss_[element * kGaussPoints + q];
  }

  /// Cost quadrature: Gauss points, graded on singular elements. Weights
  /// are fractions of the element width.
  const FieldStencil& v_cost(int element, int q) const { return v_cost_[element * kGaussPoints + q]; }
  const FieldStencil& theta_cost(int element, int q) const {
    return theta_cost_[element * kGaussPoints + q];
  }
  double cost_weight(int element, int q) const { return cost_weights_[element * kGaussPoints + q]; }

 private:
  void rebuild_free_map();

  Mesh mesh_;
  int points_per_element_;
  int n_points_;
  std::vector<DofRole> roles_;
  std::vector<int> free_index_;
  std::vector<int> free_to_raw_;
  std::vector<FieldStencil> v_gauss_;
  std::vector<FieldStencil> theta_gauss_;
  std::vector<FieldStencil> v_cost_;
  std::vector<FieldStencil> theta_cost_;
  std::vector<double> cost_weights_;
};

/// Layout with the elimination mask for a spec: boundary v, theta and
/// positions eliminated; boundary theta' (and v' at positive-speed ends)
/// marked as relation-constrained.
std::shared_ptr<const DofLayout> dof_layout(const ProblemSpec& spec);
std::shared_ptr<const DofLayout> dof_layout(const ProblemSpec& spec, int n_elements);

/// Full vector of raw DOF values over a layout.
class DofVector {
 public:
  explicit DofVector(std::shared_ptr<const DofLayout> layout);

  const DofLayout& layout() const { return *layout_; }
  const std::shared_ptr<const DofLayout>& layout_ptr() const { return layout_; }

  double operator[](int raw) const { return raw_[raw]; }
  double& operator[](int raw) { return raw_[raw]; }
  std::span<const double> raw() const { return raw_; }
  double lambda() const { return raw_[layout_->lambda()]; }

  Eigen::VectorXd free_values() const;
  void set_free_values(std::span<const double> values);

  double apply(const FieldStencil& s, int order) const;

 private:
  std::shared_ptr<const DofLayout> layout_;
  std::vector<double> raw_;
};

/// Writes the Dirichlet data (boundary speeds, orientations, positions) into
/// the eliminated slots. `theta_end` is the parity-adjusted final orientation.
void apply_boundary_data(DofVector& dofs, const ProblemSpec& spec, double theta_end);

struct KinematicSample {
  double u = 0.0;
  double v = 0.0, dv = 0.0, d2v = 0.0;
  double theta = 0.0, dtheta = 0.0, d2theta = 0.0;
  double a_T = 0.0;
  double a_N = 0.0;
  double kappa = 0.0;
  double omega = 0.0;
};

/// Fields and derived quantities at u. Throws DomainError at a singular
/// endpoint, where the speed derivatives are unbounded.
KinematicSample eval_fields(const DofVector& dofs, double u);

/// Speed at u, valid at singular endpoints as well.
double speed_at(const DofVector& dofs, double u);
double theta_at(const DofVector& dofs, double u);

/// t(u) = integral of lambda / v from 0 to u. Throws NonPositiveSpeedError
/// when v <= 0 at a quadrature point.
double time_map(const DofVector& dofs, double u);

/// lambda * (integral cos(theta), integral sin(theta)) over [u_a, u_b].
Vec2 position_integral(const DofVector& dofs, double u_a, double u_b);

}  // namespace comfort
