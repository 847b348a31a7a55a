#include <cmath>
#include <numbers>

#include "comfort/errors.hpp"
#include "comfort/kinematics.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace comfort;
using comfort::test::fill;
using comfort::test::line_spec;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_SUITE("kinematics") {

TEST_CASE("layout ordering and size") {
  ProblemSpec s = line_spec(1.0, 1.0, 3, 2);
  const auto lay = dof_layout(s);
  // 4 per node (4 nodes) + 2 per point (3*2+3+1 = 10) + lambda
  CHECK(lay->raw_size() == 37);
  CHECK(lay->n_points() == 10);
  CHECK(lay->v(1) == 4);
  CHECK(lay->dtheta(3) == 15);
  CHECK(lay->px(0) == 16);
  CHECK(lay->py(9) == 35);
  CHECK(lay->lambda() == 36);
  CHECK(lay->point_u(3) == doctest::Approx(1.0 / 3.0));
  CHECK(lay->segment_element(3) == 0);
  CHECK(lay->segment_element(4) == 1);
}

TEST_CASE("elimination mask for moving ends") {
  const auto lay = dof_layout(line_spec(1.0, 2.0, 4, 1));
  const int n = 4;
  CHECK(lay->role(lay->v(0)) == DofRole::eliminated);
  CHECK(lay->role(lay->v(n)) == DofRole::eliminated);
  CHECK(lay->role(lay->theta(0)) == DofRole::eliminated);
  CHECK(lay->role(lay->theta(n)) == DofRole::eliminated);
  CHECK(lay->role(lay->dtheta(0)) == DofRole::relation);
  CHECK(lay->role(lay->dv(n)) == DofRole::relation);
  CHECK(lay->role(lay->px(0)) == DofRole::eliminated);
  CHECK(lay->role(lay->py(lay->n_points() - 1)) == DofRole::eliminated);
  CHECK(lay->role(lay->v(2)) == DofRole::free);
  CHECK(lay->role(lay->lambda()) == DofRole::free);
  // 37-style count: raw minus 4 values, 4 positions.
  CHECK(lay->free_size() == lay->raw_size() - 8);
}

TEST_CASE("elimination mask for zero-speed ends") {
  const auto lay = dof_layout(line_spec(0.0, 0.0, 4, 1));
  CHECK(lay->mesh().left_singular);
  CHECK(lay->mesh().right_singular);
  CHECK(lay->role(lay->dv(0)) == DofRole::eliminated);
  CHECK(lay->role(lay->dv(4)) == DofRole::eliminated);
  CHECK(lay->free_size() == lay->raw_size() - 10);
}

TEST_CASE("time map of v = 1 + u is ln 2") {
  ProblemSpec s = line_spec(1.0, 2.0, 4, 1);
  DofVector d(dof_layout(s));
  apply_boundary_data(d, s, 0.0);
  fill(d, [](double u) { return 1.0 + u; }, [](double) { return 1.0; },
       [](double) { return 0.0; }, [](double) { return 0.0; }, 1.0);
  CHECK(time_map(d, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(time_map(d, 0.5) == doctest::Approx(std::log(1.5)).epsilon(1e-14));
  CHECK(time_map(d, 0.0) == 0.0);
  const KinematicSample k = eval_fields(d, 0.3);
  CHECK(k.v == doctest::Approx(1.3));
  CHECK(k.a_T == doctest::Approx(1.3));
  CHECK(k.kappa == 0.0);
}

TEST_CASE("position integral of a quarter turn") {
  ProblemSpec s = line_spec(1.0, 1.0, 4, 1);
  DofVector d(dof_layout(s));
  apply_boundary_data(d, s, 0.0);
  fill(d, [](double) { return 1.0; }, [](double) { return 0.0; },
       [](double u) { return kPi / 2 * u; }, [](double) { return kPi / 2; }, 1.0);
  const Vec2 r = position_integral(d, 0.0, 1.0);
  CHECK(r.x() == doctest::Approx(2.0 / kPi).epsilon(1e-13));
  CHECK(r.y() == doctest::Approx(2.0 / kPi).epsilon(1e-13));
  const Vec2 a = position_integral(d, 0.0, 0.37) + position_integral(d, 0.37, 1.0);
  CHECK((a - r).norm() < 1e-14);
  const KinematicSample k = eval_fields(d, 0.5);
  CHECK(k.kappa == doctest::Approx(kPi / 2));
  CHECK(k.a_N == doctest::Approx(kPi / 2));
  CHECK(k.omega == doctest::Approx(kPi / 2));
  CHECK_THROWS_AS(position_integral(d, 0.5, 0.2), DomainError);
  CHECK_THROWS_AS(eval_fields(d, 1.5), DomainError);
}

TEST_CASE("zero-speed ends: integrable time, unbounded derivatives") {
  ProblemSpec s = line_spec(0.0, 0.0, 4, 1);
  DofVector d(dof_layout(s));
  apply_boundary_data(d, s, 0.0);
  // v = (4u(1-u))^(2/3) sampled at the nodes.
  auto v = [](double u) { return std::pow(4 * u * (1 - u), 2.0 / 3.0); };
  auto dv = [](double u) {
    if (u == 0.0 || u == 1.0) return 0.0;
    return 2.0 / 3.0 * std::pow(4 * u * (1 - u), -1.0 / 3.0) * 4 * (1 - 2 * u);
  };
  fill(d, v, dv, [](double) { return 0.0; }, [](double) { return 0.0; }, 1.0);
  const double t = time_map(d, 1.0);
  CHECK(std::isfinite(t));
  CHECK(t > 0.0);
  CHECK(speed_at(d, 0.0) == 0.0);
  CHECK(speed_at(d, 1.0) == 0.0);
  CHECK_THROWS_AS(eval_fields(d, 0.0), DomainError);
  CHECK(speed_at(d, 1e-9) > 0.0);
  CHECK(speed_at(d, 1e-9) / std::pow(1e-9, 2.0 / 3.0) > 0.1);
}

TEST_CASE("time map rejects non-positive speed") {
  ProblemSpec s = line_spec(1.0, 1.0, 4, 1);
  DofVector d(dof_layout(s));
  apply_boundary_data(d, s, 0.0);
  fill(d, [](double u) { return 1.0 - 2 * u * (1 - u) * 4; }, [](double u) { return -8 + 16 * u; },
       [](double) { return 0.0; }, [](double) { return 0.0; }, 1.0);
  CHECK_THROWS_AS(time_map(d, 1.0), NonPositiveSpeedError);
}

TEST_CASE("spec validation") {
  ProblemSpec s = line_spec(1.0, 1.0);
  CHECK_NOTHROW(s.validate());
  s.end.v = 6.0;
  CHECK_THROWS_AS(s.validate(), InvalidSpecError);
  s = line_spec(0.0, 1.0);
  s.start.a_T = -0.5;
  CHECK_THROWS_AS(s.validate(), InvalidSpecError);
  s = line_spec(1.0, 1.0);
  s.obstacles.obstacles.push_back(StarShapedObstacle::circle({0.5, 0.0}, 1.0));
  CHECK_THROWS_AS(s.validate(), InvalidSpecError);
  CHECK(singular_exponent(BoundaryState{}) == doctest::Approx(2.0 / 3.0));
  BoundaryState b;
  b.a_T = 0.1;
  CHECK(singular_exponent(b) == doctest::Approx(0.5));
}

}
