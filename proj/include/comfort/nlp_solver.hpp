#pragma once

// Sparse nonlinear programming: problem interface, a primal-dual
// interior-point solver with a filter line search, and a finite-difference
// derivative checker.
//
//   minimize f(x)  subject to  g_L <= g(x) <= g_U,  x_L <= x <= x_U
//
// Rows with g_L == g_U are equalities. Bounds with magnitude >= 1e19 are
// treated as absent.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace comfort::nlp {

inline constexpr double kInfinity = 1e20;

struct SparseIndex {
  int row = 0;
  int col = 0;
};

/// Callbacks return false when the model cannot be evaluated at x (for
/// example a non-positive speed); the solver then treats x as unusable.
struct NlpProblem {
  int n_vars = 0;
  int n_cons = 0;
  std::vector<double> var_lower;
  std::vector<double> var_upper;
  std::vector<double> con_lower;
  std::vector<double> con_upper;
  /// Nonzero positions of the constraint Jacobian, one entry per value.
  std::vector<SparseIndex> jacobian_structure;
  /// Lower triangle (row >= col) of the Lagrangian Hessian.
  std::vector<SparseIndex> hessian_structure;

  std::function<bool(std::span<const double> x, double& f)> objective;
  std::function<bool(std::span<const double> x, std::span<double> grad)> gradient;
  std::function<bool(std::span<const double> x, std::span<double> g)> constraints;
  std::function<bool(std::span<const double> x, std::span<double> values)> jacobian;
  /// Values of obj_factor * hess f + sum_i y_i hess g_i at hessian_structure.
  std::function<bool(std::span<const double> x, double obj_factor, std::span<const double> y,
                     std::span<double> values)>
      hessian;
};

struct SolverOptions {
  double rel_tol = 1e-8;
  /// Absolute limit on the unscaled constraint violation at convergence.
  double constr_viol_tol = 1e-6;
  int max_iter = 100;
  double mu_init = 0.1;
  double kappa_eps = 10.0;
  double kappa_mu = 0.2;
  double theta_mu = 1.5;
  double tau_min = 0.99;
  // Filter line search.
  double gamma_theta = 1e-5;
  double gamma_phi = 1e-8;
  double eta_phi = 1e-4;
  double delta_switch = 1.0;
  double s_theta = 1.1;
  double s_phi = 2.3;
  double alpha_min_frac = 0.05;
  int max_soc = 4;
  double kappa_soc = 0.99;
  // Inertia correction of the KKT matrix.
  double reg_init = 1e-8;
  double reg_factor = 10.0;
  double reg_max = 1e4;
  // Gradient-based problem scaling.
  double scaling_gradient_max = 100.0;
  bool record_log = true;
  // Restoration phase: it returns once the violation has dropped by this
  // factor and the filter accepts the point.
  double resto_reduction = 0.01;
  /// Start with the restoration phase when the scaled initial violation
  /// exceeds this value.
  double resto_start_violation = 1.0;
};

enum class SolveStatus { converged, max_iter, infeasible, numerical_failure };

const char* to_string(SolveStatus status);

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double inf_pr = 0.0;
  double inf_du = 0.0;
  double mu = 0.0;
  double alpha = 0.0;
  double regularization = 0.0;
  int ls_trials = 0;
  char step_type = ' ';
};

struct SolveResult {
  SolveStatus status = SolveStatus::numerical_failure;
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> multipliers;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  double complementarity = 0.0;
  double kkt_error = 0.0;
  int iterations = 0;
  std::vector<IterationRecord> log;
  std::string message;

  bool converged() const { return status == SolveStatus::converged; }
};

SolveResult solve(const NlpProblem& problem, std::span<const double> x0,
                  const SolverOptions& options = {});

/// Iteration log as text, one line per iteration:
/// iter objective inf_pr inf_du mu alpha.
std::string format_log(const SolveResult& result);

/// Largest relative deviation (|a - b| / max(1, |b|)) per derivative block
/// against central finite differences.
struct DerivativeReport {
  double gradient = 0.0;
  double jacobian = 0.0;
  double objective_hessian = 0.0;
  double constraint_hessian = 0.0;
  /// Relative infinity-norm error of Hessian-vector products of the
  /// Lagrangian against directional differences of its gradient.
  double hessian_vector = 0.0;
  bool evaluation_failed = false;

  double max_first_order() const { return gradient > jacobian ? gradient : jacobian; }
  double max_second_order() const {
    return objective_hessian > constraint_hessian ? objective_hessian : constraint_hessian;
  }
};

DerivativeReport check_derivatives(const NlpProblem& problem, std::span<const double> x,
                                   std::uint64_t seed = 1, double rel_step = 1e-6);

}  // namespace comfort::nlp
