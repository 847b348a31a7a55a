#include "comfort/mesh_basis.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "comfort/errors.hpp"

namespace comfort {

int Mesh::element_of(double u) const {
  const int e = static_cast<int>(std::floor(u / element_width));
  return std::clamp(e, 0, n_elements - 1);
}

Mesh build_mesh(int n, bool left_singular, bool right_singular, double left_exponent,
                double right_exponent) {
  if (n < 1) {
    throw InvalidMeshError("mesh needs at least one element, got " + std::to_string(n));
  }
  if (n < 2 && (left_singular || right_singular)) {
    throw InvalidMeshError("singular boundary elements need at least two elements");
  }
  Mesh mesh;
  mesh.n_elements = n;
  mesh.element_width = 1.0 / n;
  mesh.node_coords.resize(n + 1);
  for (int i = 0; i <= n; ++i) mesh.node_coords[i] = static_cast<double>(i) / n;
  mesh.node_coords.back() = 1.0;
  mesh.left_singular = left_singular;
  mesh.right_singular = right_singular;
  mesh.left_exponent = left_exponent;
  mesh.right_exponent = right_exponent;
  return mesh;
}

HermiteShape hermite_eval(double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("hermite_eval: x outside [0,1]");
  }
  const double x2 = x * x;
  const double x3 = x2 * x;
  HermiteShape s;
  s.value = {2 * x3 - 3 * x2 + 1, x3 - 2 * x2 + x, -2 * x3 + 3 * x2, x3 - x2};
  s.d1 = {6 * x2 - 6 * x, 3 * x2 - 4 * x + 1, -6 * x2 + 6 * x, 3 * x2 - 2 * x};
  s.d2 = {12 * x - 6, 6 * x - 4, -12 * x + 6, 6 * x - 2};
  return s;
}

namespace {

SingularShape singular_left(double x, double p) {
  const double xp = std::pow(x, p);
  SingularShape s;
  s.value = {xp + p * (1 - x) * x, (x - 1) * x};
  s.d1 = {p * xp / x + p - 2 * p * x, 2 * x - 1};
  s.d2 = {p * (p - 1) * xp / (x * x) - 2 * p, 2.0};
  return s;
}

}  // namespace

SingularShape singular_eval(double x, double p, Side side) {
  if (p != kExponentZeroAccel && p != kExponentNonzeroAccel) {
    throw DomainError("singular_eval: unsupported exponent");
  }
  if (side == Side::left) {
    if (!(x > 0.0 && x <= 1.0)) throw DomainError("singular_eval: x outside (0,1]");
    return singular_left(x, p);
  }
  if (!(x >= 0.0 && x < 1.0)) throw DomainError("singular_eval: x outside [0,1)");
  const SingularShape m = singular_left(1.0 - x, p);
  SingularShape s;
  s.value = {m.value[0], -m.value[1]};
  s.d1 = {-m.d1[0], m.d1[1]};
  s.d2 = {m.d2[0], -m.d2[1]};
  return s;
}

QuadratureRule gauss_rule(int m) {
  if (m < 1 || m > 64) {
    throw DomainError("gauss_rule: unsupported number of points " + std::to_string(m));
  }
  QuadratureRule rule;
  rule.points.resize(m);
  rule.weights.resize(m);
  // Newton iteration on P_m over [-1,1], then mapped to [0,1]. Roots are
  // symmetric, so only the upper half is iterated.
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = z;
      for (int k = 2; k <= m; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = m * (z * p1 - p0) / (z * z - 1.0);
      const double step = p1 / dp;
      z -= step;
      if (std::abs(step) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.points[i] = 0.5 * (1.0 - z);
    rule.points[m - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[i] = 0.5 * w;
    rule.weights[m - 1 - i] = 0.5 * w;
  }
  return rule;
}

const QuadratureRule& cached_gauss_rule(int m) {
  static std::array<std::unique_ptr<QuadratureRule>, 65> cache;
  static std::once_flag flags[65];
  if (m < 1 || m > 64) {
    throw DomainError("gauss_rule: unsupported number of points " + std::to_string(m));
  }
  std::call_once(flags[m], [m] { cache[m] = std::make_unique<QuadratureRule>(gauss_rule(m)); });
  return *cache[m];
}

QuadratureRule graded_rule(const QuadratureRule& base, double p, Side side) {
  const double m = 1.0 / (1.0 - p);
  QuadratureRule r;
  r.points.reserve(base.size());
  r.weights.reserve(base.size());
  for (std::size_t q = 0; q < base.size(); ++q) {
    // Mirror for the right side so points stay in increasing order.
    const double s = side == Side::left ? base.points[q] : base.points[base.size() - 1 - q];
    const double w = side == Side::left ? base.weights[q] : base.weights[base.size() - 1 - q];
    const double sm = std::pow(side == Side::left ? s : 1.0 - s, m);
    r.points.push_back(side == Side::left ? sm : 1.0 - sm);
    r.weights.push_back(w * m * std::pow(side == Side::left ? s : 1.0 - s, m - 1.0));
  }
  return r;
}

QuadratureRule element_rule(const Mesh& mesh, int e, const QuadratureRule& base) {
  if (e == 0 && mesh.left_singular) return graded_rule(base, mesh.left_exponent, Side::left);
  if (e == mesh.n_elements - 1 && mesh.right_singular) {
    return graded_rule(base, mesh.right_exponent, Side::right);
  }
  return base;
}

}  // namespace comfort
