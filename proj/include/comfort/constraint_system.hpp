#pragma once

// Equality and inequality constraints of the trajectory problem: linking of
// adjacent positions, boundary relations, Gauss-point limits and obstacle
// clearance.

#include <memory>
#include <string>
#include <vector>

#include "comfort/kinematics.hpp"
#include "comfort/local_block.hpp"

namespace comfort {

enum class RowKind {
  linking_x,              ///< x_j - x_{j-1} - lambda int cos(theta) = 0
  linking_y,              ///< y_j - y_{j-1} - lambda int sin(theta) = 0
  end_curvature,          ///< theta' - lambda kappa = 0 at an end
  end_acceleration,       ///< v v' - lambda a_T = 0 at a moving end
  singular_acceleration,  ///< v_1^2 = 2 h lambda a_T at a zero-speed end
  speed,                  ///< 0 <= v <= v_max
  tangential_lower,       ///< v v' - lambda a_T,min >= 0
  tangential_upper,       ///< v v' - lambda a_T,max <= 0
  normal_lower,           ///< v^2 theta' - lambda a_N,min >= 0
  normal_upper,           ///< v^2 theta' - lambda a_N,max <= 0
  angular_lower,          ///< v theta' - lambda omega_min >= 0
  angular_upper,          ///< v theta' - lambda omega_max <= 0
  curvature_lower,        ///< theta' + lambda kappa_max >= 0
  curvature_upper,        ///< theta' - lambda kappa_max <= 0
  obstacle,               ///< C_i(r_j) >= 0
};

const char* to_string(RowKind kind);
bool is_equality(RowKind kind);

/// One scalar constraint lower <= g(dofs) <= upper and where it comes from.
struct ConstraintRow {
  RowKind kind = RowKind::speed;
  double lower = 0.0;
  double upper = 0.0;
  int node = -1;      ///< boundary rows
  int element = -1;   ///< Gauss-point rows
  int gauss = -1;
  int point = -1;     ///< linking (segment end) and obstacle rows
  int obstacle = -1;
  int box = -1;       ///< Gauss-point rows: one box per (point, quantity)
  int count = 0;      ///< raw DOFs the row depends on
  std::array<int, kMaxLocalDofs> dofs{};
};

struct ConstraintContext;

class ConstraintSet {
 public:
  ConstraintSet() = default;
  ConstraintSet(std::shared_ptr<const ConstraintContext> context);

  const std::vector<ConstraintRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  const ConstraintRow& operator[](std::size_t i) const { return rows_[i]; }

  int equality_count() const;
  int inequality_count() const;
  /// Distinct Gauss-point boxes (a two-sided box uses two rows).
  int box_count() const;
  int obstacle_count() const;

  /// Value (order 0), gradient (1) and Hessian (2) of row i over row.dofs.
  LocalBlock evaluate(std::size_t i, const DofVector& dofs, int order) const;
  /// Values of all rows.
  std::vector<double> values(const DofVector& dofs) const;
  /// Largest bound violation over all rows.
  double max_violation(const DofVector& dofs) const;

  /// Appends rows built on the same context.
  void append(const ConstraintSet& other);

  void add_row(const ConstraintRow& row) { rows_.push_back(row); }
  const std::shared_ptr<const ConstraintContext>& context() const { return context_; }

 private:
  std::shared_ptr<const ConstraintContext> context_;
  std::vector<ConstraintRow> rows_;
};

/// Linking rows for j = 1..N-1 and boundary relation rows.
ConstraintSet assemble_equalities(const ProblemSpec& spec,
                                  std::shared_ptr<const DofLayout> layout);
/// Speed, acceleration, angular velocity and curvature limits at every
/// Gauss point.
ConstraintSet assemble_inequalities(const ProblemSpec& spec,
                                    std::shared_ptr<const DofLayout> layout);
/// C_i(r_j) >= 0 for every position pair and obstacle.
ConstraintSet obstacle_constraints(const ProblemSpec& spec,
                                   std::shared_ptr<const DofLayout> layout);
/// All of the above in that order.
ConstraintSet assemble_constraints(const ProblemSpec& spec,
                                   std::shared_ptr<const DofLayout> layout);

/// Human-readable origin of a row, e.g. "speed element 3 gauss 7".
std::string describe(const ConstraintRow& row);

}  // namespace comfort
