#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>

#include "comfort/errors.hpp"
#include "comfort/postprocess_io.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace comfort;
namespace fs = std::filesystem;

namespace {

DofVector straight_line() {
  ProblemSpec s = test::line_spec(1.0, 1.0, 4, 2);
  DofVector d(dof_layout(s));
  apply_boundary_data(d, s, 0.0);
  test::fill(d, [](double) { return 1.0; }, [](double) { return 0.0; }, [](double) { return 0.0; },
             [](double) { return 0.0; }, 10.0);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::string kMinimal = R"({
  "start": {"position": [0, 0], "theta": 0, "v": 1},
  "end": {"position": [10, 0], "theta": 0, "v": 1},
  "limits": {"v_max": 5, "a_T": [-2, 2], "a_N": [-2, 2], "omega": [-2, 2], "kappa_max": 1},
  "weights": {"w_T": 1, "w_N": 1}
})";

}  // namespace

TEST_SUITE("postprocess_io") {

TEST_CASE("sampling a straight line") {
  const auto s = sample_trajectory(straight_line(), 11);
  REQUIRE(s.size() == 11);
  for (int k = 0; k < 11; ++k) {
    CHECK(s[k].t == doctest::Approx(k).epsilon(1e-13));
    CHECK(s[k].x == doctest::Approx(k).epsilon(1e-13));
    CHECK(s[k].y == 0.0);
    CHECK(s[k].v == 1.0);
  }
  CHECK_THROWS_AS(sample_trajectory(straight_line(), 1), DomainError);
}

TEST_CASE("sampling with zero-speed ends") {
  ProblemSpec s = test::line_spec(0.0, 0.0, 4, 1);
  DofVector d(dof_layout(s));
  apply_boundary_data(d, s, 0.0);
  test::fill(d, [](double u) { return std::pow(4 * u * (1 - u), 2.0 / 3.0); },
             [](double u) {
               if (u == 0.0 || u == 1.0) return 0.0;
               return 2.0 / 3.0 * std::pow(4 * u * (1 - u), -1.0 / 3.0) * 4 * (1 - 2 * u);
             },
             [](double) { return 0.0; }, [](double) { return 0.0; }, 10.0);
  const auto smp = sample_trajectory(d, 21);
  CHECK(smp.front().v == 0.0);
  CHECK(smp.back().v == 0.0);
  CHECK(std::isfinite(smp.back().t));
  for (std::size_t k = 1; k < smp.size(); ++k) CHECK(smp[k].t > smp[k - 1].t);
  CHECK(smp.front().a_T == 0.0);
}

TEST_CASE("problem JSON round trip") {
  const ProblemSpec s = parse_problem(kMinimal);
  CHECK(s.weights.w_T == 1.0);
  CHECK(s.end.position.x() == 10.0);
  const std::string canon = problem_to_json(s);
  CHECK(problem_to_json(parse_problem(canon)) == canon);

  ProblemSpec o = s;
  o.obstacles.obstacles.push_back(StarShapedObstacle::circle({5.0, 2.0}, 0.75));
  o.obstacles.obstacles.push_back(
      StarShapedObstacle::polar({2.0, -3.0}, {{0.0, 1.0}, {2.0, 0.5}, {4.0, 0.8}}));
  o.start.kappa = 0.1;
  const std::string with_obs = problem_to_json(o);
  const ProblemSpec back = parse_problem(with_obs);
  CHECK(back.obstacles.size() == 2);
  CHECK(problem_to_json(back) == with_obs);
  CHECK(back.start.kappa == 0.1);

  const fs::path p = fs::temp_directory_path() / "comfort_roundtrip.json";
  write_problem(p, o);
  CHECK(problem_to_json(read_problem(p)) == with_obs);
  fs::remove(p);
}

TEST_CASE("problem JSON errors name the field") {
  auto field_of = [](const std::string& text) {
    try {
      parse_problem(text);
    } catch (const ParseError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  std::string missing = kMinimal;
  missing.replace(missing.find("\"w_T\": 1, "), 10, "");
  CHECK(field_of(missing) == "weights.w_T");
  std::string unknown = kMinimal;
  unknown.replace(unknown.find("\"v\": 1}"), 7, "\"v\": 1, \"jerk\": 2}");
  CHECK(field_of(unknown) == "start.jerk");
  std::string wrong = kMinimal;
  wrong.replace(wrong.find("\"v_max\": 5"), 10, "\"v_max\": \"fast\"");
  CHECK(field_of(wrong) == "limits.v_max");
  CHECK(field_of("{") == "");
  CHECK_THROWS_AS(parse_problem(std::string(kMinimal).replace(kMinimal.rfind('}'), 1,
                  ", \"obstacles\": [{\"type\": \"circle\", \"center\": [0.2, 0], \"radius\": 1}]}")),
                  InvalidSpecError);
}

TEST_CASE("result CSV round trip at full precision") {
  auto s = sample_trajectory(straight_line(), 7);
  s[3].theta = 0.1 + 0.2;  // not exactly representable in short decimal
  s[4].a_N = -1.0 / 3.0;
  const Metadata meta = {{"J", "12.5"}, {"parity", "0"}};
  const fs::path p = fs::temp_directory_path() / "comfort_result.csv";
  write_result(p, s, meta);
  const std::string text = slurp(p);
  CHECK(text.rfind("# format_version 1\n", 0) == 0);
  CHECK(text.find("u,t,x,y,theta,v,a_T,a_N,kappa,omega\n") != std::string::npos);
  const ResultFile back = read_result(p);
  CHECK(back.metadata == meta);
  REQUIRE(back.samples.size() == s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK(back.samples[k].theta == s[k].theta);
    CHECK(back.samples[k].a_N == s[k].a_N);
    CHECK(back.samples[k].t == s[k].t);
  }
  fs::remove(p);
  CHECK_THROWS_AS(parse_result("u,t\n1,2\n"), ParseError);
}

TEST_CASE("plots mark equal time intervals") {
  const auto s = sample_trajectory(straight_line(), 51);
  const std::string svg = plot_svg(s);
  std::regex marker("class=\"marker\"");
  const auto n = std::distance(std::sregex_iterator(svg.begin(), svg.end(), marker), std::sregex_iterator());
  CHECK(n == 11);
  CHECK(svg.find("<polyline") != std::string::npos);
  const auto pts = equal_time_points(s, 11);
  for (std::size_t k = 1; k < pts.size(); ++k) CHECK((pts[k] - pts[k - 1]).norm() == doctest::Approx(1.0));

  // Speed 1 + u: markers bunch up where the robot is slow.
  ProblemSpec sp = test::line_spec(1.0, 2.0, 4, 1);
  DofVector d(dof_layout(sp));
  apply_boundary_data(d, sp, 0.0);
  test::fill(d, [](double u) { return 1.0 + u; }, [](double) { return 1.0; }, [](double) { return 0.0; },
             [](double) { return 0.0; }, 10.0);
  const auto q = equal_time_points(sample_trajectory(d, 201), 6);
  CHECK((q[1] - q[0]).norm() < (q[5] - q[4]).norm());

  PlotOptions opt;
  opt.obstacles.obstacles.push_back(StarShapedObstacle::circle({5.0, 1.5}, 1.0));
  CHECK(plot_svg(s, opt).find("class=\"obstacle\"") != std::string::npos);
  CHECK_THROWS_AS(plot_svg({s[0]}), DomainError);
}

}
