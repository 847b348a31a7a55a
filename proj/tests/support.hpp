#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "comfort/kinematics.hpp"

namespace comfort::test {

using Field = std::function<double(double)>;

inline ProblemSpec line_spec(double v0, double v1, int n = 8, int M = 2) {
  ProblemSpec s;
  s.start.position = {0.0, 0.0};
  s.end.position = {10.0, 0.0};
  s.start.v = v0;
  s.end.v = v1;
  s.limits.v_max = 5.0;
  s.limits.a_T = {-2.0, 2.0};
  s.limits.a_N = {-2.0, 2.0};
  s.limits.omega = {-2.0, 2.0};
  s.limits.kappa_max = 1.0;
  s.n_elements = n;
  s.points_per_element = M;
  return s;
}

// Writes nodal values of analytic fields, lambda, and positions obtained by
// integrating theta from the stored start position.
inline void fill(DofVector& d, const Field& v, const Field& dv, const Field& th, const Field& dth,
                 double lambda) {
  const auto& lay = d.layout();
  for (int i = 0; i < lay.n_nodes(); ++i) {
    const double u = lay.mesh().node_coords[i];
    d[lay.v(i)] = v(u);
    d[lay.dv(i)] = dv(u);
    d[lay.theta(i)] = th(u);
    d[lay.dtheta(i)] = dth(u);
  }
  d[lay.lambda()] = lambda;
  Vec2 r(d[lay.px(0)], d[lay.py(0)]);
  for (int j = 1; j < lay.n_points(); ++j) {
    r += position_integral(d, lay.point_u(j - 1), lay.point_u(j));
    d[lay.px(j)] = r.x();
    d[lay.py(j)] = r.y();
  }
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace comfort::test
