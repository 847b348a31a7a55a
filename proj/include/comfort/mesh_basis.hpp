#pragma once

// Uniform 1D mesh on [0,1], cubic Hermite and singular boundary shape
// functions, and Gauss-Legendre rules on the unit interval.

#include <array>
#include <vector>

namespace comfort {

enum class Side { left, right };

/// Exponents supported by the singular boundary element.
inline constexpr double kExponentZeroAccel = 2.0 / 3.0;
inline constexpr double kExponentNonzeroAccel = 0.5;

struct Mesh {
  int n_elements = 0;
  double element_width = 0.0;
  std::vector<double> node_coords;
  bool left_singular = false;
  bool right_singular = false;
  /// Singular exponent per side; only meaningful when the side is singular.
  double left_exponent = kExponentZeroAccel;
  double right_exponent = kExponentZeroAccel;

  int n_nodes() const { return n_elements + 1; }

  /// Element containing u; u == 1 maps to the last element.
  int element_of(double u) const;

  /// Local coordinate of u on element e.
  double local_coord(int e, double u) const {
    return (u - node_coords[e]) / element_width;
  }

  bool is_singular(int e) const {
    return (e == 0 && left_singular) || (e == n_elements - 1 && right_singular);
  }
};

/// Uniform mesh with n elements. Singular flags require n >= 2 so the two
/// boundary elements never coincide.
Mesh build_mesh(int n, bool left_singular = false, bool right_singular = false,
                double left_exponent = kExponentZeroAccel,
                double right_exponent = kExponentZeroAccel);

struct HermiteShape {
  std::array<double, 4> value{};
  std::array<double, 4> d1{};
  std::array<double, 4> d2{};
};

/// The four cubic Hermite shape functions on the reference element [0,1],
/// ordered (value at 0, slope at 0, value at 1, slope at 1).
HermiteShape hermite_eval(double x);

struct SingularShape {
  std::array<double, 2> value{};
  std::array<double, 2> d1{};
  std::array<double, 2> d2{};
};

/// Boundary-element shape functions psi_1, psi_2 with exponent p.
///
/// Left: psi_1 = x^p + p(1-x)x, psi_2 = (x-1)x, matching value and slope of
/// the neighbouring element at x = 1. Right: psi_1(x) = psi_1^L(1-x) and
/// psi_2(x) = -psi_2^L(1-x), so that at x = 0 they carry value and slope.
/// Evaluating at the singular endpoint throws DomainError.
SingularShape singular_eval(double x, double p, Side side);

struct QuadratureRule {
  std::vector<double> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
};

/// m-point Gauss-Legendre rule mapped to [0,1]; 1 <= m <= 64.
QuadratureRule gauss_rule(int m);

/// Shared immutable instance of gauss_rule(m).
const QuadratureRule& cached_gauss_rule(int m);

inline constexpr int kGaussPoints = 12;

/// Rule on [0,1] graded towards a singular end at 0 (left) or 1 (right).
/// Substituting x = s^m with m = 1/(1-p) turns integrands with x^p
/// behaviour, such as 1/v, into smooth functions of s.
QuadratureRule graded_rule(const QuadratureRule& base, double p, Side side);

/// Cost quadrature on element e: graded on singular elements, base otherwise.
QuadratureRule element_rule(const Mesh& mesh, int e, const QuadratureRule& base);

}  // namespace comfort
