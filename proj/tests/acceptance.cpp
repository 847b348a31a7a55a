// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails.
//
//   acceptance [criterion ...] [--subsample K] [--jobs J]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "comfort/planner.hpp"
#include "comfort/postprocess_io.hpp"

using namespace comfort;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Converged solutions collected by criteria 2 to 7 for the kinematic audit.
std::vector<std::pair<std::string, DofVector>> g_solutions;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Limits line_limits() {
  Limits l;
  l.v_max = 5.0;
  l.a_T = {-2.0, 2.0};
  l.a_N = {-2.0, 2.0};
  l.omega = {-2.0, 2.0};
  l.kappa_max = 1.0;
  return l;
}

ProblemSpec line_problem(double v) {
  ProblemSpec s;
  s.start.position = {0.0, 0.0};
  s.end.position = {10.0, 0.0};
  s.start.v = s.end.v = v;
  s.limits = line_limits();
  s.n_elements = 12;
  s.points_per_element = 1;
  return s;
}

ProblemSpec scurve_problem() {
  ProblemSpec s;
  s.end.position = {-1.0, -4.0};
  s.limits.v_max = 3.0;
  s.limits.a_T = {-2.0, 2.0};
  s.limits.a_N = {-2.0, 2.0};
  s.limits.omega = {-2.0, 2.0};
  s.limits.kappa_max = 2.0;
  s.n_elements = 12;
  s.points_per_element = 4;
  return s;
}

const std::vector<int> kNList = {2, 4, 8, 16, 32, 64, 128};

Outcome criterion_quadrature() {
  const QuadratureRule r = gauss_rule(12);
  double worst = 0.0;
  for (int k = 0; k <= 23; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) sum += r.weights[i] * std::pow(r.points[i], k);
    const double exact = 1.0 / (k + 1);
    worst = std::max(worst, std::abs(sum - exact) / exact);
  }
  return {worst < 1e-12, "max relative error " + fmt("%.2e", worst) + " over degrees 0..23"};
}

struct Study {
  std::vector<ConvergeRow> rows;
  bool all_converged = true;
  bool non_increasing = true;
  double gap32 = 0.0;
};

Study run_study(const ProblemSpec& spec, const std::string& label) {
  Study st;
  st.rows = converge_study(spec, kNList);
  for (std::size_t i = 0; i < st.rows.size(); ++i) {
    const auto& r = st.rows[i];
    st.all_converged &= r.converged;
    if (r.converged && r.dofs) g_solutions.emplace_back(label + " n=" + std::to_string(r.n), *r.dofs);
    if (i > 0 && r.converged && st.rows[i - 1].converged) {
      // Equal costs up to solver tolerance count as non-increasing.
      st.non_increasing &= r.J <= st.rows[i - 1].J * (1.0 + 1e-8);
    }
  }
  const auto at = [&](int n) {
    for (const auto& r : st.rows) {
      if (r.n == n) return r.J;
    }
    return std::nan("");
  };
  st.gap32 = std::abs(at(32) - at(128)) / std::abs(at(128));
  return st;
}

std::string study_table(const Study& st) {
  std::string s;
  for (const auto& r : st.rows) {
    s += " n=" + std::to_string(r.n) + ":" + (r.converged ? fmt("%.10g", r.J) : std::string("fail"));
  }
  return s;
}

Study g_line_study;

Outcome criterion_line() {
  g_line_study = run_study(line_problem(1.0), "line v=1");
  const Study& st = g_line_study;
  const bool pass = st.all_converged && st.non_increasing && st.gap32 <= 1e-4;
  return {pass, "converged " + std::string(st.all_converged ? "all" : "NOT all") +
                    ", non-increasing " + (st.non_increasing ? "yes" : "no") + ", gap(32,128) " +
                    fmt("%.3e", st.gap32) + ";" + study_table(st)};
}

Outcome criterion_zero_speed() {
  if (g_line_study.rows.empty()) g_line_study = run_study(line_problem(1.0), "line v=1");
  const Study st = run_study(line_problem(0.0), "line v=0");
  const bool slower = st.gap32 > g_line_study.gap32;
  const bool pass = st.all_converged && st.non_increasing && slower;
  return {pass, "converged " + std::string(st.all_converged ? "all" : "NOT all") +
                    ", non-increasing " + (st.non_increasing ? "yes" : "no") + ", gap(32,128) " +
                    fmt("%.3e", st.gap32) + " vs " + fmt("%.3e", g_line_study.gap32) +
                    " with moving ends;" + study_table(st)};
}

Outcome criterion_derivatives() {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double first = 0.0, second = 0.0, hv = 0.0;
  int points = 0, failed = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ProblemSpec s = trial % 2 ? scurve_problem() : line_problem(1.0);
    s.n_elements = 8;
    s.points_per_element = 2;
    if (trial % 4 == 2) {
      s.start.v = 0.0;
      s.start.a_T = 0.3;
    }
    s.start.kappa = 0.05 * U(rng);
    s.obstacles.obstacles.push_back(StarShapedObstacle::circle({3.0 * U(rng), 3.0 + U(rng)}, 0.7));
    const auto guesses = build_guesses(s, 8, 1);
    DofVector d = guesses.front().dofs;
    const auto& lay = d.layout();
    // Random feasible point: perturb every free DOF, keep speeds positive.
    for (int raw : lay.free_to_raw()) {
      const double scale = raw == lay.lambda() ? 0.05 * d[raw] : 0.05 * (1.0 + std::abs(d[raw]));
      d[raw] += scale * U(rng);
    }
    for (int i = 0; i < lay.n_nodes(); ++i) {
      if (lay.role(lay.v(i)) != DofRole::eliminated) d[lay.v(i)] = std::abs(d[lay.v(i)]) + 0.1;
    }
    const TrajectoryNlp nlp(s, d);
    const auto x = nlp.start_point(d);
    const auto rep = nlp::check_derivatives(nlp.problem(), x, trial + 1);
    if (rep.evaluation_failed) {
      ++failed;
      continue;
    }
    ++points;
    first = std::max(first, rep.max_first_order());
    second = std::max(second, rep.max_second_order());
    hv = std::max(hv, rep.hessian_vector);
  }
  const bool pass = failed == 0 && first < 1e-6 && second < 1e-6 && hv < 1e-5;
  return {pass, std::to_string(points) + " points; max rel error gradient/Jacobian " +
                    fmt("%.2e", first) + ", Hessian " + fmt("%.2e", second) + ", Hessian-vector " +
                    fmt("%.2e", hv)};
}

Outcome criterion_sparsity() {
  ProblemSpec s = line_problem(1.0);
  s.n_elements = 8;
  s.points_per_element = 3;
  s.obstacles.obstacles.push_back(StarShapedObstacle::circle({5.0, 2.0}, 1.0));
  s.obstacles.obstacles.push_back(StarShapedObstacle::polar({2.0, -2.0}, {{0.0, 0.5}, {2.0, 0.8}, {4.0, 0.6}}));
  const auto guesses = build_guesses(s, 8, 1);
  const TrajectoryNlp nlp(s, guesses.front().dofs);
  const auto& lay = guesses.front().dofs.layout();
  const auto& f2r = lay.free_to_raw();
  const int first_pos = lay.px(0);
  int far_pairs = 0, bad_position = 0;
  std::set<int> lambda_partners;
  for (const auto& e : nlp.problem().hessian_structure) {
    const int a = f2r[e.row], b = f2r[e.col];
    if (a == lay.lambda() || b == lay.lambda()) {
      lambda_partners.insert(a == lay.lambda() ? b : a);
      continue;
    }
    const bool pa = a >= first_pos, pb = b >= first_pos;
    if (!pa && !pb) {
      far_pairs += std::abs(a / 4 - b / 4) > 1;
    } else if (pa != pb || (a - first_pos) / 2 != (b - first_pos) / 2) {
      ++bad_position;
    }
  }
  int nodal_free = 0, nodal_coupled = 0;
  for (int raw : f2r) {
    if (raw >= first_pos) continue;
    ++nodal_free;
    nodal_coupled += lambda_partners.count(raw);
  }
  // Positions couple to lambda through the linking rows of the Jacobian.
  std::set<int> pos_with_lambda;
  std::map<int, std::vector<int>> row_cols;
  for (const auto& e : nlp.problem().jacobian_structure) row_cols[e.row].push_back(f2r[e.col]);
  for (const auto& [row, cols] : row_cols) {
    if (std::find(cols.begin(), cols.end(), lay.lambda()) == cols.end()) continue;
    for (int c : cols) {
      if (c >= first_pos && c != lay.lambda()) pos_with_lambda.insert(c);
    }
  }
  int pos_free = 0;
  for (int raw : f2r) pos_free += raw >= first_pos && raw != lay.lambda();
  const bool pass = far_pairs == 0 && bad_position == 0 && nodal_coupled == nodal_free &&
                    static_cast<int>(pos_with_lambda.size()) == pos_free;
  return {pass, "nodal pairs beyond one element " + std::to_string(far_pairs) +
                    ", position entries outside 2x2 blocks " + std::to_string(bad_position) +
                    ", lambda-coupled nodal DOFs " + std::to_string(nodal_coupled) + "/" +
                    std::to_string(nodal_free) + ", lambda-coupled positions " +
                    std::to_string(pos_with_lambda.size()) + "/" + std::to_string(pos_free)};
}

Outcome criterion_parity() {
  const ProblemSpec s = scurve_problem();
  const auto guesses = build_guesses(s, s.n_elements);
  std::multiset<long> ends;
  for (const auto& g : guesses) ends.insert(std::lround(g.path.theta_end / (2 * kPi)));
  const std::multiset<long> expected = {0, 0, -1, 1};
  const PlanResult r = plan(s);
  std::vector<double> costs;
  std::set<int> parities;
  for (const auto& c : r.candidates) {
    if (!c.success()) continue;
    g_solutions.emplace_back("scurve parity " + std::to_string(c.path.parity), c.solve->dofs);
    costs.push_back(c.cost.J_total);
    parities.insert(c.path.parity);
  }
  // Distinct: different parity, or different cost beyond solver tolerance.
  std::sort(costs.begin(), costs.end());
  int distinct_costs = costs.empty() ? 0 : 1;
  for (std::size_t i = 1; i < costs.size(); ++i) {
    distinct_costs += costs[i] - costs[i - 1] > 1e-6 * std::abs(costs[i]);
  }
  const int distinct = std::max<int>(distinct_costs, static_cast<int>(parities.size()));
  const bool pass = guesses.size() == 4 && ends == expected && distinct >= 2;
  std::string js;
  for (double c : costs) js += " " + fmt("%.6g", c);
  return {pass, std::to_string(guesses.size()) + " guesses, final orientations match {0,0,-2pi,2pi}: " +
                    (ends == expected ? "yes" : "no") + ", converged feasible " +
                    std::to_string(costs.size()) + ", distinct " + std::to_string(distinct) + ", J:" + js};
}

Outcome criterion_obstacle() {
  ProblemSpec free_spec = line_problem(1.0);
  free_spec.points_per_element = 4;
  ProblemSpec s = free_spec;
  s.obstacles.obstacles.push_back(StarShapedObstacle::circle({5.0, 0.0}, 1.0));
  const PlanResult r = plan(s);
  const PlanResult f = plan(free_spec);
  const PlanCandidate* best = r.best_candidate();
  const PlanCandidate* best_free = f.best_candidate();
  if (!best || !best_free) return {false, "no converged solution"};
  g_solutions.emplace_back("obstacle", best->solve->dofs);
  const auto& d = best->solve->dofs;
  const auto& lay = d.layout();
  double c_min = 1e300;
  for (int j = 0; j < lay.n_points(); ++j) {
    c_min = std::min(c_min, s.obstacles.obstacles[0].clearance({d[lay.px(j)], d[lay.py(j)]}).value);
  }
  const bool pass = c_min >= -1e-8 && best->cost.J_total > best_free->cost.J_total;
  return {pass, "min clearance " + fmt("%.3e", c_min) + " over " + std::to_string(lay.n_points()) +
                    " points, J " + fmt("%.8g", best->cost.J_total) + " vs obstacle-free " +
                    fmt("%.8g", best_free->cost.J_total)};
}

Outcome criterion_speed_guess() {
  struct Case {
    const char* name;
    double v0, a0, v1, a1;
  };
  // v_max = 3, non-zero ends at 1 and 2, |a_T| <= 5, lambda = 4.
  const Case cases[] = {{"v_min active", 1.0, -4.0, 2.0, 0.0},
                        {"v_max active", 1.0, 5.0, 2.0, 0.0},
                        {"both active", 1.0, -4.0, 2.0, -5.0},
                        {"both singular", 0.0, 0.0, 0.0, 0.0},
                        {"singular start", 0.0, 0.0, 2.0, 0.0},
                        {"singular end", 1.0, 0.0, 0.0, 0.0}};
  const double lambda = 4.0;
  bool pass = true;
  std::string detail;
  for (const Case& c : cases) {
    ProblemSpec s;
    s.end.position = {1.0, 0.0};
    s.start.v = c.v0;
    s.start.a_T = c.a0;
    s.end.v = c.v1;
    s.end.a_T = c.a1;
    s.limits.v_max = 3.0;
    s.limits.a_T = {-5.0, 5.0};
    const int n = 12;
    const SpeedGuess g = speed_guess(s, lambda, n);
    bool ok = g.value(0.0) == c.v0 && g.value(1.0) == c.v1;
    if (c.v0 > 0.0) ok &= std::abs(g.slope(0.0) - c.a0 * lambda / c.v0) <= 1e-12;
    if (c.v1 > 0.0) ok &= std::abs(g.slope(1.0) - c.a1 * lambda / c.v1) <= 1e-12;
    double vmax = 0.0;
    for (int i = 0; i < 1000; ++i) vmax = std::max(vmax, g.value(i / 999.0));
    ok &= vmax <= 3.0 + 1e-9;
    double vmin = 1e300;
    for (int i = 1; i < 999; ++i) vmin = std::min(vmin, g.value(i / 999.0));
    double repro = 0.0;
    if (g.kind == SpeedGuess::Kind::regular) {
      SpeedGuessOptions other;
      other.start_scale = 0.5;
      const SpeedGuess h = speed_guess(s, lambda, n, other);
      for (std::size_t i = 0; i < g.smooth_v.size(); ++i) {
        repro = std::max({repro, std::abs(g.smooth_v[i] - h.smooth_v[i]),
                          std::abs(g.smooth_dv[i] - h.smooth_dv[i])});
      }
      ok &= g.optimized && h.optimized && repro <= 1e-6;
    }
    pass &= ok;
    detail += std::string(" [") + c.name + ": " + (ok ? "ok" : "FAIL") + ", max v " +
              fmt("%.6f", vmax) + ", min v " + fmt("%.6f", vmin) + (g.kind == SpeedGuess::Kind::regular ? ", restart diff " + fmt("%.1e", repro) : "") + "]";
  }
  return {pass, detail};
}

Outcome criterion_sweep(int subsample, int jobs) {
  SweepConfig cfg;
  cfg.subsample = subsample;
  cfg.jobs = jobs;
  const auto t0 = std::chrono::steady_clock::now();
  const SweepReport rep = run_sweep(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double mean = rep.mean_solutions();
  const int none = rep.cases_without_solution();
  const auto hist = rep.solution_histogram();
  const bool pass = none == 0 && std::abs(mean - 3.6) <= 0.5;
  std::string h;
  for (int x : hist) h += " " + std::to_string(x);
  std::string ids;
  for (const auto& o : rep.outcomes) {
    if (o.solutions == 0) ids += (ids.empty() ? " (case " : " ") + std::to_string(o.id);
  }
  if (!ids.empty()) ids += ")";
  return {pass, std::to_string(rep.outcomes.size()) + " cases, without solution " +
                    std::to_string(none) + ids + ", mean solutions " + fmt("%.3f", mean) +
                    ", histogram 0..4:" + h + ", " + fmt("%.0f", secs) + " s"};
}

Outcome criterion_kinematics() {
  if (g_solutions.empty()) return {false, "no solutions collected (run criteria 2-7 first)"};
  int bad_time = 0, bad_angle = 0, bad_derived = 0, checked = 0;
  double worst_angle = 0.0, worst_derived = 0.0;
  for (const auto& [label, d] : g_solutions) {
    const auto s = sample_trajectory(d, 401);
    const double v_max = 5.0;
    for (std::size_t k = 1; k < s.size(); ++k) bad_time += !(s[k].t > s[k - 1].t);
    for (const auto& p : s) {
      if (p.u <= 0.0 || p.u >= 1.0) continue;
      const KinematicSample f = eval_fields(d, p.u);
      const double lam = d.lambda();
      const double expect[4] = {f.v * f.dv / lam, f.v * f.v * f.dtheta / lam, f.dtheta / lam,
                                f.v * f.dtheta / lam};
      const double got[4] = {p.a_T, p.a_N, p.kappa, p.omega};
      for (int i = 0; i < 4; ++i) {
        const double e = std::abs(expect[i] - got[i]) / std::max(1.0, std::abs(expect[i]));
        worst_derived = std::max(worst_derived, e);
        bad_derived += e > 1e-10;
      }
      if (p.v > 0.01 * v_max) {
        const double du = 1e-6;
        const double ua = std::max(0.0, p.u - du), ub = std::min(1.0, p.u + du);
        const Vec2 chord = position_integral(d, ua, ub);
        double diff = std::atan2(chord.y(), chord.x()) - p.theta;
        diff = std::remainder(diff, 2 * kPi);
        worst_angle = std::max(worst_angle, std::abs(diff));
        bad_angle += std::abs(diff) > 1e-6;
      }
      ++checked;
    }
  }
  const bool pass = bad_time == 0 && bad_angle == 0 && bad_derived == 0;
  return {pass, std::to_string(g_solutions.size()) + " solutions, " + std::to_string(checked) +
                    " samples; non-increasing t " + std::to_string(bad_time) +
                    ", max heading error " + fmt("%.2e", worst_angle) +
                    ", max derived-quantity error " + fmt("%.2e", worst_derived)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  int subsample = 5;
  int jobs = 1;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--subsample" && i + 1 < argc) {
      subsample = std::atoi(argv[++i]);
    } else if (a == "--jobs" && i + 1 < argc) {
      jobs = std::atoi(argv[++i]);
    } else {
      selected.insert(std::atoi(a.c_str()));
    }
  }
  if (selected.empty()) {
    for (int c = 1; c <= 10; ++c) selected.insert(c);
  }

  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria = {
      {1, {"quadrature exactness", criterion_quadrature}},
      {2, {"straight line, moving ends", criterion_line}},
      {3, {"straight line, zero-speed ends", criterion_zero_speed}},
      {4, {"derivative correctness", criterion_derivatives}},
      {5, {"sparsity structure", criterion_sparsity}},
      {6, {"multi-start parity", criterion_parity}},
      {7, {"obstacle feasibility", criterion_obstacle}},
      {8, {"speed-guess suite", criterion_speed_guess}},
      {9, {"benchmark sweep", [&] { return criterion_sweep(subsample, jobs); }}},
      {10, {"kinematic consistency", criterion_kinematics}},
  };

  int failures = 0;
  for (int c : selected) {
    auto it = criteria.find(c);
    if (it == criteria.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("criterion %d (%s): %s (%.1f s) %s\n", c, it->second.first, o.pass ? "PASS" : "FAIL",
                secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
