#include <cmath>
#include <numbers>

#include "comfort/errors.hpp"
#include "comfort/obstacle_field.hpp"
#include "doctest.h"

using namespace comfort;

namespace {
constexpr double kPi = std::numbers::pi;

void check_clearance_derivatives(const StarShapedObstacle& o, const Vec2& r) {
  const double h = 1e-6;
  const Clearance c = o.clearance(r);
  for (int k = 0; k < 2; ++k) {
    Vec2 e = Vec2::Zero();
    e[k] = h;
    const Clearance p = o.clearance(r + e), m = o.clearance(r - e);
    CHECK(std::abs(c.gradient[k] - (p.value - m.value) / (2 * h)) < 1e-7);
    for (int l = 0; l < 2; ++l) {
      CHECK(std::abs(c.hessian(l, k) - (p.gradient[l] - m.gradient[l]) / (2 * h)) < 1e-6);
    }
  }
}
}  // namespace

TEST_SUITE("obstacle_field") {

TEST_CASE("circle clearance") {
  const auto o = StarShapedObstacle::circle({0.0, 0.0}, 1.0);
  const Clearance c = o.clearance({3.0, 4.0});
  CHECK(c.value == doctest::Approx(4.0));
  CHECK(c.gradient.x() == doctest::Approx(0.6));
  CHECK(c.gradient.y() == doctest::Approx(0.8));
  CHECK(o.clearance({0.5, 0.0}).value < 0.0);
  CHECK(o.clearance({0.0, 1.0}).value == doctest::Approx(0.0));
  check_clearance_derivatives(o, {3.0, 4.0});
  check_clearance_derivatives(o, {-0.7, 1.9});
  CHECK(o.max_radius() == doctest::Approx(1.0));
}

TEST_CASE("constant polar profile equals the circle") {
  std::vector<std::pair<double, double>> knots;
  for (int k = 0; k < 6; ++k) knots.emplace_back(k * kPi / 3, 2.0);
  const auto p = StarShapedObstacle::polar({1.0, -1.0}, knots);
  const auto c = StarShapedObstacle::circle({1.0, -1.0}, 2.0);
  for (double phi = -3.0; phi < 3.0; phi += 0.37) {
    CHECK(p.rho(phi).rho == doctest::Approx(2.0));
    CHECK(std::abs(p.rho(phi).d1) < 1e-12);
  }
  const Vec2 r(2.5, 3.0);
  CHECK(p.clearance(r).value == doctest::Approx(c.clearance(r).value));
}

TEST_CASE("polar spline interpolates, is periodic and smooth") {
  const std::vector<std::pair<double, double>> knots = {
      {0.0, 1.0}, {kPi / 2, 2.0}, {kPi, 1.5}, {3 * kPi / 2, 1.2}};
  const auto o = StarShapedObstacle::polar({0.0, 0.0}, knots);
  for (const auto& [phi, rho] : knots) CHECK(o.rho(phi).rho == doctest::Approx(rho));
  CHECK(o.rho(0.3).rho == doctest::Approx(o.rho(0.3 + 2 * kPi).rho));
  CHECK(o.rho(-0.3).rho == doctest::Approx(o.rho(2 * kPi - 0.3).rho));
  const double h = 1e-6;
  for (double phi : {0.1, 1.0, 2.5, 4.0, 6.2}) {
    const RadialValue v = o.rho(phi);
    CHECK(std::abs(v.d1 - (o.rho(phi + h).rho - o.rho(phi - h).rho) / (2 * h)) < 1e-7);
    CHECK(std::abs(v.d2 - (o.rho(phi + h).d1 - o.rho(phi - h).d1) / (2 * h)) < 1e-6);
  }
  // C2 across the wrap-around knot.
  CHECK(o.rho(-1e-9).d2 == doctest::Approx(o.rho(1e-9).d2).epsilon(1e-6));
  check_clearance_derivatives(o, {2.0, 2.5});
  check_clearance_derivatives(o, {-3.0, -0.2});
  CHECK(o.max_radius() >= 2.0);
  CHECK(o.validate().empty());
}

TEST_CASE("polar profile needs three angles") {
  CHECK_THROWS(StarShapedObstacle::polar({0, 0}, {{0.0, 1.0}, {1.0, 1.0}}));
}

}
