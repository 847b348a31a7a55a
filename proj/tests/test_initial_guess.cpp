#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "comfort/errors.hpp"
#include "comfort/initial_guess.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace comfort;

namespace {
constexpr double kPi = std::numbers::pi;

// J_cc by composite Simpson integration of the three-segment profile.
double simpson_cc(double th0, double th1, double s, double target) {
  const int n = 3000;
  auto theta = [&](double u) {
    const double mid = th0 + s / 3;
    if (u <= 1.0 / 3) return th0 + s * u;
    if (u <= 2.0 / 3) return mid;
    return mid - 3 * (th0 - th1 + s / 3) * (u - 2.0 / 3);
  };
  double ic = 0, is = 0;
  for (int seg = 0; seg < 3; ++seg) {
    const double a = seg / 3.0, h = (1.0 / 3) / n;
    for (int i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
      const double u = a + i * h;
      const double th = i == 0 ? theta(a + 1e-15) : (i == n ? theta(a + 1.0 / 3 - 1e-15) : theta(u));
      ic += w * h / 3 * std::cos(th);
      is += w * h / 3 * std::sin(th);
    }
  }
  return (ic - target) * (ic - target) + is * is;
}

ProblemSpec scurve() {
  ProblemSpec s;
  s.end.position = {-1.0, -4.0};
  s.limits.v_max = 3.0;
  s.limits.a_T = {-2, 2};
  s.limits.a_N = {-2, 2};
  s.limits.omega = {-2, 2};
  s.limits.kappa_max = 2.0;
  return s;
}

ProblemSpec speed_spec(double v0, double a0, double v1, double a1) {
  ProblemSpec s;
  s.end.position = {5.0, 0.0};
  s.start.v = v0;
  s.start.a_T = a0;
  s.end.v = v1;
  s.end.a_T = a1;
  s.limits.v_max = 3.0;
  s.limits.a_T = {-5.0, 5.0};
  return s;
}
}  // namespace

TEST_SUITE("initial_guess") {

TEST_CASE("parity candidates") {
  auto ends = [](double a, double b) {
    std::vector<double> out;
    for (const auto& c : parity_candidates(a, b)) out.push_back(c.theta_end);
    return out;
  };
  auto e1 = ends(0, 0);
  CHECK(e1[0] == doctest::Approx(0.0));
  CHECK(e1[1] == doctest::Approx(2 * kPi));
  CHECK(e1[2] == doctest::Approx(-2 * kPi));
  auto e2 = ends(0, kPi);
  CHECK(e2[0] == doctest::Approx(kPi));
  CHECK(e2[1] == doctest::Approx(-kPi));
  CHECK(e2[2] == doctest::Approx(3 * kPi));
  auto e3 = ends(3 * kPi / 2, 0);
  CHECK(e3[0] == doctest::Approx(2 * kPi));
  CHECK(e3[1] == doctest::Approx(0.0));
  CHECK(e3[2] == doctest::Approx(4 * kPi));
  const auto c = parity_candidates(1.0, 2.0);
  for (const auto& p : c) CHECK(std::abs(p.theta_end - 2.0 - 2 * kPi * p.parity) < 1e-12);
}

TEST_CASE("path length guess") {
  ProblemSpec s;
  s.end.position = {3.0, 4.0};
  s.limits.kappa_max = 1.0;
  CHECK(lambda_guess(s) == doctest::Approx(10.0));
  s.end.position = {0.1, 0.0};
  CHECK(lambda_guess(s) == doctest::Approx(1.0));
  s.end.position = {0.0, 0.0};
  s.limits.kappa_max = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(lambda_guess(s), DegenerateInputError);
}

TEST_CASE("cc objective closed form") {
  CHECK(cc_objective(0, 0, 0, 1) == 0.0);
  for (double s : {-7.3, -1.0, 0.0, 0.4, 2.2, 9.9}) {
    CHECK(std::abs(cc_objective(0.4, -0.3, s, 0.35) - simpson_cc(0.4, -0.3, s, 0.35)) < 1e-10);
  }
  // Oscillatory: several local minima over the table range.
  int minima = 0;
  double prev2 = cc_objective(kPi / 2, kPi / 3, -8 * kPi, 0.5), prev = cc_objective(kPi / 2, kPi / 3, -8 * kPi + kPi / 64, 0.5);
  for (int i = 2; i <= 1024; ++i) {
    const double cur = cc_objective(kPi / 2, kPi / 3, -8 * kPi + i * kPi / 64, 0.5);
    if (prev < prev2 && prev < cur) ++minima;
    prev2 = prev;
    prev = cur;
  }
  CHECK(minima >= 2);
}

TEST_CASE("cc guess on a straight line") {
  ProblemSpec s;
  s.end.position = {10.0, 0.0};
  s.limits.kappa_max = 1.0;
  const auto g = cc_theta_guess(s, parity_candidates(0, 0)[0], 6);
  REQUIRE(!g.empty());
  bool straight = false;
  for (const auto& p : g) {
    straight |= std::abs(p.cc_slope) < 1e-7;
    CHECK(p.theta.front() == 0.0);
    CHECK(p.theta.back() == 0.0);
  }
  CHECK(straight);
}

TEST_CASE("cc guess matches a grid-search oracle") {
  // Both ends pointing up-ish (pi/2 and pi/3), end to the right.
  ProblemSpec s;
  s.start.theta = kPi / 2;
  s.end.theta = kPi / 3;
  s.end.position = {3.0, 0.0};
  s.limits.kappa_max = 1.0;
  const double target = 3.0 / lambda_guess(s);
  const auto guesses = cc_theta_guess(s, parity_candidates(s.start.theta, s.end.theta)[0], 9);
  REQUIRE(guesses.size() == 2);
  CHECK(std::abs(guesses[0].cc_slope - guesses[1].cc_slope) > 0.5);

  // Oracle: Simpson-integrated table, maximum nearest zero, adjacent minima,
  // then a fine scan around each.
  const double step = kPi / 64;
  std::vector<double> J;
  for (int i = -512; i <= 512; ++i) J.push_back(simpson_cc(kPi / 2, kPi / 3, i * step, target));
  int peak = -1;
  for (int i = 1; i + 1 < static_cast<int>(J.size()); ++i) {
    if (J[i] > J[i - 1] && J[i] >= J[i + 1] && (peak < 0 || std::abs(i - 512) < std::abs(peak - 512))) peak = i;
  }
  REQUIRE(peak >= 0);
  int a = peak, b = peak;
  while (a > 0 && J[a - 1] <= J[a]) --a;
  while (b + 1 < static_cast<int>(J.size()) && J[b + 1] <= J[b]) ++b;
  for (int idx : {a, b}) {
    double best = 0, best_j = 1e300;
    for (int k = -2000; k <= 2000; ++k) {
      const double sl = (idx - 512) * step + k * step / 2000;
      const double v = simpson_cc(kPi / 2, kPi / 3, sl, target);
      if (v < best_j) {
        best_j = v;
        best = sl;
      }
    }
    bool found = false;
    for (const auto& g : guesses) found |= std::abs(g.cc_slope - best) < 2e-3;
    CHECK(found);
  }
  for (const auto& g : guesses) {
    CHECK(g.theta.front() == s.start.theta);
    CHECK(g.theta.back() == g.theta_end);
    CHECK(g.dtheta.front() == 0.0);
  }
}

TEST_CASE("minimum variation curve on collinear data") {
  ProblemSpec s;
  s.end.position = {10.0, 0.0};
  s.limits.kappa_max = 1.0;
  const int n = 6;
  const auto seeds = cc_theta_guess(s, parity_candidates(0, 0)[0], n);
  const auto it = std::min_element(seeds.begin(), seeds.end(), [](const auto& x, const auto& y) {
    return std::abs(x.cc_slope) < std::abs(y.cc_slope);
  });
  const auto mvc = mvc_path_guess(s, *it, n);
  REQUIRE(mvc.has_value());
  CHECK(mvc->source == PathSource::mvc);
  CHECK(mvc->lambda == doctest::Approx(10.0).epsilon(1e-6));
  for (double t : mvc->theta) CHECK(std::abs(t) < 1e-6);
}

TEST_CASE("minimum variation curves for the S-curve") {
  const ProblemSpec s = scurve();
  const int n = 12;
  const auto guesses = build_guesses(s, n);
  REQUIRE(guesses.size() == 4);
  std::vector<double> ends;
  for (const auto& g : guesses) ends.push_back(g.path.theta_end);
  std::sort(ends.begin(), ends.end());
  CHECK(ends[0] == doctest::Approx(-2 * kPi));
  CHECK(std::abs(ends[1]) < 1e-12);
  CHECK(std::abs(ends[2]) < 1e-12);
  CHECK(ends[3] == doctest::Approx(2 * kPi));

  const auto& rule = cached_gauss_rule(kGaussPoints);
  for (const auto& g : guesses) {
    const auto& p = g.path;
    CHECK(p.theta.front() == s.start.theta);
    CHECK(p.theta.back() == p.theta_end);
    if (p.source != PathSource::mvc) continue;
    const double lo = std::min(s.start.theta, p.theta_end) - 2 * kPi;
    const double hi = std::max(s.start.theta, p.theta_end) + 2 * kPi;
    Vec2 r = Vec2::Zero();
    double worst_curv = -1e300;
    const double h = 1.0 / n;
    for (int e = 0; e < n; ++e) {
      for (int q = 0; q < kGaussPoints; ++q) {
        const HermiteShape sh = hermite_eval(rule.points[q]);
        const double c[4] = {p.theta[e], h * p.dtheta[e], p.theta[e + 1], h * p.dtheta[e + 1]};
        double th = 0, d1 = 0;
        for (int k = 0; k < 4; ++k) {
          th += sh.value[k] * c[k];
          d1 += sh.d1[k] * c[k] / h;
        }
        CHECK(th >= lo - 1e-6);
        CHECK(th <= hi + 1e-6);
        r += h * rule.weights[q] * p.lambda * Vec2(std::cos(th), std::sin(th));
        worst_curv = std::max(worst_curv, std::abs(d1) - p.lambda * s.limits.kappa_max);
      }
    }
    CHECK((r - s.end.position).norm() < 1e-6);
    CHECK(worst_curv <= 1e-8);
  }
}

TEST_CASE("speed guess, both ends moving") {
  ProblemSpec s = speed_spec(1.0, 0.0, 1.0, 0.0);
  const SpeedGuess g = speed_guess(s, 5.0, 8);
  CHECK(g.kind == SpeedGuess::Kind::regular);
  CHECK(g.optimized);
  for (double u = 0; u <= 1.0; u += 0.05) CHECK(g.value(u) == doctest::Approx(1.0).epsilon(1e-8));

  ProblemSpec t = speed_spec(1.0, 0.4, 2.0, -0.3);
  const SpeedGuess a = speed_guess(t, 5.0, 8);
  SpeedGuessOptions other;
  other.start_scale = 0.6;
  const SpeedGuess b = speed_guess(t, 5.0, 8, other);
  REQUIRE(a.optimized);
  REQUIRE(b.optimized);
  for (std::size_t i = 0; i < a.smooth_v.size(); ++i) {
    CHECK(std::abs(a.smooth_v[i] - b.smooth_v[i]) < 1e-6);
    CHECK(std::abs(a.smooth_dv[i] - b.smooth_dv[i]) < 1e-6);
  }
  CHECK(a.value(0.0) == 1.0);
  CHECK(a.value(1.0) == 2.0);
  CHECK(a.slope(0.0) == doctest::Approx(0.4 * 5.0 / 1.0));
  CHECK(a.slope(1.0) == doctest::Approx(-0.3 * 5.0 / 2.0));
}

TEST_CASE("speed guess, both ends at rest") {
  ProblemSpec s = speed_spec(0.0, 0.0, 0.0, 0.0);
  const SpeedGuess g = speed_guess(s, 5.0, 8);
  CHECK(g.kind == SpeedGuess::Kind::both_zero);
  CHECK(g.value(0.5) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(g.value(0.0) == 0.0);
  CHECK(g.value(1.0) == 0.0);
  for (int i = 0; i < 1000; ++i) CHECK(g.value(i / 999.0) <= 3.0 + 1e-9);
  const double u = 1e-8;
  CHECK(g.value(u) / std::pow(u, 2.0 / 3.0) == doctest::Approx(3.0 * std::pow(4.0, 2.0 / 3.0)).epsilon(1e-6));
}

TEST_CASE("speed guess, one end at rest") {
  for (bool right : {true, false}) {
    ProblemSpec s = right ? speed_spec(1.0, 0.0, 0.0, 0.0) : speed_spec(0.0, 0.0, 1.0, 0.0);
    const SpeedGuess g = speed_guess(s, 5.0, 8);
    CHECK(g.kind == (right ? SpeedGuess::Kind::right_zero : SpeedGuess::Kind::left_zero));
    CHECK(g.coefficient == doctest::Approx(16.0 / 9.0 * std::cbrt(2.0)).epsilon(1e-14));
    // The singular part alone peaks at v_max / 2 at u = 3/4 (mirrored 1/4).
    const double us = right ? 0.75 : 0.25;
    const double sing = right ? g.coefficient * us * us * std::pow(1 - us, 2.0 / 3.0)
                              : g.coefficient * (1 - us) * (1 - us) * std::pow(us, 2.0 / 3.0);
    CHECK(sing == doctest::Approx(0.5).epsilon(1e-14));
    for (int i = 0; i < 1000; ++i) CHECK(g.value(i / 999.0) <= 3.0 + 1e-9);
    CHECK(g.value(right ? 0.0 : 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(g.value(right ? 1.0 : 0.0)) < 1e-12);
  }
}

TEST_CASE("speed guess with accelerating start from rest uses the square-root profile") {
  ProblemSpec s = speed_spec(0.0, 0.5, 0.0, -0.5);
  const SpeedGuess g = speed_guess(s, 5.0, 8);
  CHECK(g.left_exponent == 0.5);
  CHECK(g.value(0.5) == doctest::Approx(3.0));
  const double u = 1e-10;
  const double ratio = g.value(u) / std::sqrt(u);
  CHECK(std::isfinite(ratio));
  CHECK(ratio > 0.0);
}

TEST_CASE("speed guess rejects an infeasible box") {
  ProblemSpec s = speed_spec(4.0, 0.0, 1.0, 0.0);
  CHECK_THROWS_AS(speed_guess(s, 5.0, 8), InvalidSpecError);
}

TEST_CASE("assembled guess satisfies boundary data") {
  const ProblemSpec s = scurve();
  const auto guesses = build_guesses(s, 10);
  for (const auto& g : guesses) {
    const auto& lay = g.dofs.layout();
    CHECK(g.dofs[lay.theta(0)] == 0.0);
    CHECK(g.dofs[lay.theta(10)] == g.path.theta_end);
    CHECK(g.dofs[lay.px(lay.n_points() - 1)] == -1.0);
    CHECK(g.dofs[lay.py(lay.n_points() - 1)] == -4.0);
    CHECK(g.dofs[lay.dtheta(0)] == 0.0);
    CHECK(g.dofs.lambda() > 0.0);
  }
}

}
