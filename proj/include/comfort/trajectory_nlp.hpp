#pragma once

// The trajectory problem as a sparse NLP over the free DOFs.

#include <memory>
#include <vector>

#include "comfort/constraint_system.hpp"
#include "comfort/discomfort_cost.hpp"
#include "comfort/kinematics.hpp"
#include "comfort/nlp_solver.hpp"

namespace comfort {

/// Lower bound on the path length.
inline constexpr double kMinPathLength = 1e-3;

class TrajectoryNlp {
 public:
  /// `base` fixes the layout and the eliminated (boundary) values.
  TrajectoryNlp(const ProblemSpec& spec, DofVector base);

  const nlp::NlpProblem& problem() const { return problem_; }
  const ConstraintSet& constraints() const;
  /// Constraint-set index of each NLP row. Rows whose DOFs are all
  /// eliminated are constant and left out.
  const std::vector<int>& rows() const;

  DofVector dofs_from(std::span<const double> x) const;
  std::vector<double> start_point(const DofVector& guess) const;

 private:
  void build_structure();

  struct Shared;
  std::shared_ptr<Shared> shared_;
  nlp::NlpProblem problem_;
};

struct TrajectorySolve {
  nlp::SolveResult result;
  DofVector dofs;
};

/// Solver defaults for the full problem. The barrier parameter drops by a
/// factor 0.5 per update instead of 0.2; the guess subproblems keep 0.2.
nlp::SolverOptions trajectory_solver_options();

/// Solves from `guess` (same layout as used for the NLP).
TrajectorySolve solve_trajectory(const ProblemSpec& spec, const DofVector& guess,
                                 const nlp::SolverOptions& options = trajectory_solver_options());

}  // namespace comfort
