#pragma once

// Initial guesses for the trajectory problem: final-orientation parity,
// path length, orientation profiles (piecewise constant curvature and
// minimum variation curves) and speed profiles.

#include <optional>
#include <vector>

#include "comfort/kinematics.hpp"
#include "comfort/nlp_solver.hpp"

namespace comfort {

enum class PathSource { cc, mvc };

const char* to_string(PathSource source);

/// Path length and orientation DOFs on a mesh with n elements.
struct PathGuess {
  double lambda = 0.0;
  std::vector<double> theta;   ///< nodal values, size n + 1
  std::vector<double> dtheta;  ///< nodal u-derivatives, size n + 1
  int parity = 0;              ///< final orientation is theta_tau + 2 pi parity
  double theta_end = 0.0;
  PathSource source = PathSource::cc;
  double cc_cost = 0.0;  ///< J_cc of the seed slope
  double cc_slope = 0.0;
};

struct ParityCandidate {
  int parity = 0;
  double theta_end = 0.0;
};

/// The three values theta_tau + 2 pi n closest to theta_0, closest first.
/// Ties go to the smaller |n|, then to positive n.
std::vector<ParityCandidate> parity_candidates(double theta0, double theta_tau);

/// max(R, 2 |r_tau - r_0|). Throws DegenerateInputError when both vanish.
double lambda_guess(const ProblemSpec& spec);

/// J_cc for the three-segment orientation profile with first slope `slope`,
/// in the frame where the end lies on the +x axis from the start.
double cc_objective(double theta0, double theta1, double slope, double target);

/// Up to two piecewise-constant-curvature guesses for one parity.
std::vector<PathGuess> cc_theta_guess(const ProblemSpec& spec, const ParityCandidate& parity,
                                      int n_elements);

/// Minimum variation curve refinement of a seed; nullopt when the solver
/// does not converge.
std::optional<PathGuess> mvc_path_guess(const ProblemSpec& spec, const PathGuess& seed,
                                        int n_elements, const nlp::SolverOptions& options = {});

/// Speed profile on [0,1]. A smooth part on the Hermite mesh plus, for
/// zero-speed ends, a closed-form singular part.
struct SpeedGuess {
  enum class Kind { regular, both_zero, right_zero, left_zero };
  Kind kind = Kind::regular;
  int n_elements = 0;
  double v_max = 0.0;
  double left_exponent = 0.0;
  double right_exponent = 0.0;
  double coefficient = 0.0;
  std::vector<double> smooth_v;   ///< nodal values of the smooth part
  std::vector<double> smooth_dv;  ///< nodal slopes of the smooth part
  bool optimized = false;         ///< smooth part came from a converged solve

  double value(double u) const;
  double slope(double u) const;
};

struct SpeedGuessOptions {
  /// Scale applied to the default interior starting point of the solve.
  double start_scale = 1.0;
  /// The QP is cheap; a tight tolerance makes restarts agree to 1e-6.
  nlp::SolverOptions solver = [] {
    nlp::SolverOptions o;
    o.rel_tol = 1e-10;
    return o;
  }();
};

/// Throws InvalidSpecError when a boundary speed exceeds v_max.
SpeedGuess speed_guess(const ProblemSpec& spec, double lambda, int n_elements,
                       const SpeedGuessOptions& options = {});

struct Guess {
  PathGuess path;
  SpeedGuess speed;
  DofVector dofs;
};

/// Full DOF vector from a path and a speed guess, with positions obtained by
/// integrating the orientation.
DofVector assemble_guess(const ProblemSpec& spec, std::shared_ptr<const DofLayout> layout,
                         const PathGuess& path, const SpeedGuess& speed);

/// Up to `max_guesses` (at most four) guesses: both cc minima at the
/// closest parity and the better one at each of the other two parities,
/// each refined as a minimum variation curve when that converges.
std::vector<Guess> build_guesses(const ProblemSpec& spec, int n_elements, int max_guesses = 4);

}  // namespace comfort
