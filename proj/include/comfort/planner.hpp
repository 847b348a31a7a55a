#pragma once

// Multi-start planning, the mesh-convergence study and the benchmark sweep.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "comfort/discomfort_cost.hpp"
#include "comfort/initial_guess.hpp"
#include "comfort/trajectory_nlp.hpp"

namespace comfort {

struct PlanOptions {
  int n_elements = 0;  ///< 0 uses spec.n_elements
  int max_guesses = 4;
  int jobs = 1;
  nlp::SolverOptions solver = trajectory_solver_options();
  /// Allowed bound violation when auditing a converged solution.
  double feasibility_tol = 1e-6;
};

struct PlanCandidate {
  PathGuess path;
  std::optional<DofVector> guess;
  std::optional<TrajectorySolve> solve;
  CostBreakdown cost;
  double max_violation = 0.0;
  double min_clearance = 0.0;  ///< +inf without obstacles
  bool feasible = false;
  std::string error;  ///< set when the solve could not run

  bool success() const { return solve && solve->result.converged() && feasible; }
};

struct PlanResult {
  std::vector<PlanCandidate> candidates;
  int best = -1;  ///< index of the minimum-J successful candidate

  int success_count() const;
  const PlanCandidate* best_candidate() const {
    return best >= 0 ? &candidates[best] : nullptr;
  }
};

/// Builds the guess set and solves the full problem from each guess.
PlanResult plan(const ProblemSpec& spec, const PlanOptions& options = {});

/// Audits a solution against every constraint row; returns the largest bound
/// violation and writes the smallest obstacle clearance over all points.
double audit_solution(const ProblemSpec& spec, const DofVector& dofs, double* min_clearance);

struct ConvergeRow {
  int n = 0;
  bool converged = false;
  double J = 0.0;
  int iterations = 0;
  /// log10(|J - J_ref| / J_ref) against the largest converged n; -inf at
  /// the reference itself, NaN when unavailable.
  double log_rel_gap = 0.0;
  std::optional<DofVector> dofs;
};

std::vector<ConvergeRow> converge_study(const ProblemSpec& spec, const std::vector<int>& n_list,
                                        const PlanOptions& options = {});

struct SweepConfig {
  int subsample = 1;  ///< keep a case when its index sum is divisible by this
  int jobs = 1;
  int n_elements = 12;
  int points_per_element = 4;
  int max_guesses = 4;
  Limits limits = sweep_default_limits();
  Weights weights{};
  nlp::SolverOptions solver = trajectory_solver_options();

  static Limits sweep_default_limits();
};

struct SweepCase {
  int id = 0;
  int direction = 0;     ///< 0..9, radial line angle 20 deg * direction
  int distance = 0;      ///< 0..4, into {1, 2, 4, 8, 16}
  int orientation = 0;   ///< 0..29, final orientation 12 deg * orientation
  int speed_pair = 0;    ///< 0..4, into {(0,0), (1,-0.1), (1,0), (1,0.1), (3,0)}
  ProblemSpec spec;
};

inline constexpr int kSweepDirections = 10;
inline constexpr int kSweepDistances = 5;
inline constexpr int kSweepOrientations = 30;
inline constexpr int kSweepSpeedPairs = 5;
inline constexpr int kSweepFullSize =
    kSweepDirections * kSweepDistances * kSweepOrientations * kSweepSpeedPairs;

std::vector<SweepCase> sweep_cases(const SweepConfig& config);

struct SweepOutcome {
  int id = 0;
  int guesses = 0;
  int solutions = 0;
  int free_dofs = 0;
  double best_J = 0.0;
  std::vector<int> iterations;  ///< per guess, -1 when the solve did not run
  std::vector<std::string> status;
  double seconds = 0.0;
};

struct SweepReport {
  std::vector<SweepOutcome> outcomes;  ///< sorted by case id

  double mean_solutions() const;
  int cases_without_solution() const;
  /// Histogram of solutions per case, index 0..4.
  std::vector<int> solution_histogram() const;
};

SweepReport run_sweep(const SweepConfig& config,
                      const std::function<void(const SweepOutcome&)>& progress = {});

/// Runs task(i) for i in [0, count) on up to `jobs` threads.
void parallel_for(int count, int jobs, const std::function<void(int)>& task);

}  // namespace comfort
