#include "comfort/planner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include "comfort/constraint_system.hpp"
#include "comfort/errors.hpp"

namespace comfort {

void parallel_for(int count, int jobs, const std::function<void(int)>& task) {
  jobs = std::clamp(jobs, 1, std::max(count, 1));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

int PlanResult::success_count() const {
  return static_cast<int>(std::count_if(candidates.begin(), candidates.end(),
                                        [](const PlanCandidate& c) { return c.success(); }));
}

double audit_solution(const ProblemSpec& spec, const DofVector& dofs, double* min_clearance) {
  const ConstraintSet set = assemble_constraints(spec, dofs.layout_ptr());
  const double worst = set.max_violation(dofs);
  if (min_clearance) {
    double c_min = std::numeric_limits<double>::infinity();
    const auto& lay = dofs.layout();
    for (int j = 0; j < lay.n_points(); ++j) {
      const Vec2 r(dofs[lay.px(j)], dofs[lay.py(j)]);
      for (const auto& obs : spec.obstacles.obstacles) {
        c_min = std::min(c_min, obs.clearance(r).value);
      }
    }
    *min_clearance = c_min;
  }
  return worst;
}

PlanResult plan(const ProblemSpec& spec, const PlanOptions& options) {
  spec.validate();
  const int n = options.n_elements > 0 ? options.n_elements : spec.n_elements;
  std::vector<Guess> guesses = build_guesses(spec, n, options.max_guesses);

  PlanResult out;
  out.candidates.resize(guesses.size());
  parallel_for(static_cast<int>(guesses.size()), options.jobs, [&](int i) {
    PlanCandidate& c = out.candidates[i];
    c.path = guesses[i].path;
    c.guess = guesses[i].dofs;
    try {
      c.solve = solve_trajectory(spec, guesses[i].dofs, options.solver);
      if (c.solve->result.converged()) {
        c.cost = cost_eval(c.solve->dofs, spec.weights);
        c.max_violation = audit_solution(spec, c.solve->dofs, &c.min_clearance);
        c.feasible = c.max_violation <= options.feasibility_tol;
      }
    } catch (const std::exception& e) {
      c.error = e.what();
    }
  });

  for (int i = 0; i < static_cast<int>(out.candidates.size()); ++i) {
    const auto& c = out.candidates[i];
    if (!c.success()) continue;
    if (out.best < 0 || c.cost.J_total < out.candidates[out.best].cost.J_total) out.best = i;
  }
  return out;
}

std::vector<ConvergeRow> converge_study(const ProblemSpec& spec, const std::vector<int>& n_list,
                                        const PlanOptions& options) {
  std::vector<ConvergeRow> rows;
  for (int n : n_list) {
    ConvergeRow row;
    row.n = n;
    PlanOptions opts = options;
    opts.n_elements = n;
    try {
      const PlanResult res = plan(spec, opts);
      if (const PlanCandidate* best = res.best_candidate()) {
        row.converged = true;
        row.J = best->cost.J_total;
        row.iterations = best->solve->result.iterations;
        row.dofs = best->solve->dofs;
      }
    } catch (const Error&) {
      row.converged = false;
    }
    rows.push_back(std::move(row));
  }

  int ref = -1;
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    if (rows[i].converged && (ref < 0 || rows[i].n > rows[ref].n)) ref = i;
  }
  for (auto& row : rows) {
    if (!row.converged || ref < 0) {
      row.log_rel_gap = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double jr = rows[ref].J;
    row.log_rel_gap = std::log10(std::abs(row.J - jr) / std::abs(jr));
  }
  return rows;
}

Limits SweepConfig::sweep_default_limits() {
  Limits lim;
  lim.v_max = 3.0;
  lim.a_T = {-1.5, 1.5};
  lim.a_N = {-1.5, 1.5};
  lim.omega = {-1.5, 1.5};
  lim.kappa_max = 2.0;
  return lim;
}

std::vector<SweepCase> sweep_cases(const SweepConfig& config) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double distances[kSweepDistances] = {1.0, 2.0, 4.0, 8.0, 16.0};
  const double pairs[kSweepSpeedPairs][2] = {{0, 0}, {1, -0.1}, {1, 0}, {1, 0.1}, {3, 0}};
  const int k = std::max(config.subsample, 1);

  std::vector<SweepCase> cases;
  int id = 0;
  for (int d = 0; d < kSweepDirections; ++d) {
    for (int r = 0; r < kSweepDistances; ++r) {
      for (int o = 0; o < kSweepOrientations; ++o) {
        for (int s = 0; s < kSweepSpeedPairs; ++s, ++id) {
          if ((d + r + o + s) % k != 0) continue;
          SweepCase c;
          c.id = id;
          c.direction = d;
          c.distance = r;
          c.orientation = o;
          c.speed_pair = s;
          const double angle = 180.0 / (kSweepDirections - 1) * d * kDeg;
          ProblemSpec& p = c.spec;
          p.start.position = Vec2::Zero();
          p.start.theta = 0.0;
          p.end.position = distances[r] * Vec2(std::cos(angle), std::sin(angle));
          p.end.theta = 360.0 / kSweepOrientations * o * kDeg;
          p.start.v = p.end.v = pairs[s][0];
          p.start.a_T = p.end.a_T = pairs[s][1];
          p.limits = config.limits;
          p.weights = config.weights;
          p.n_elements = config.n_elements;
          p.points_per_element = config.points_per_element;
          cases.push_back(std::move(c));
        }
      }
    }
  }
  return cases;
}

double SweepReport::mean_solutions() const {
  if (outcomes.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& o : outcomes) sum += o.solutions;
  return sum / outcomes.size();
}

int SweepReport::cases_without_solution() const {
  return static_cast<int>(std::count_if(outcomes.begin(), outcomes.end(),
                                        [](const SweepOutcome& o) { return o.solutions == 0; }));
}

std::vector<int> SweepReport::solution_histogram() const {
  std::vector<int> h(5, 0);
  for (const auto& o : outcomes) h[std::clamp(o.solutions, 0, 4)]++;
  return h;
}

SweepReport run_sweep(const SweepConfig& config,
                      const std::function<void(const SweepOutcome&)>& progress) {
  const std::vector<SweepCase> cases = sweep_cases(config);
  SweepReport report;
  report.outcomes.resize(cases.size());
  std::mutex progress_mutex;

  PlanOptions opts;
  opts.max_guesses = config.max_guesses;
  opts.solver = config.solver;
  opts.solver.record_log = false;

  parallel_for(static_cast<int>(cases.size()), config.jobs, [&](int i) {
    const auto t0 = std::chrono::steady_clock::now();
    const SweepCase& c = cases[i];
    SweepOutcome& o = report.outcomes[i];
    o.id = c.id;
    o.free_dofs = dof_layout(c.spec)->free_size();
    try {
      const PlanResult res = plan(c.spec, opts);
      o.guesses = static_cast<int>(res.candidates.size());
      o.solutions = res.success_count();
      if (const PlanCandidate* best = res.best_candidate()) o.best_J = best->cost.J_total;
      for (const auto& cand : res.candidates) {
        o.iterations.push_back(cand.solve ? cand.solve->result.iterations : -1);
        if (!cand.solve) {
          o.status.push_back("error");
        } else if (cand.solve->result.converged() && !cand.feasible) {
          o.status.push_back("infeasible_audit");
        } else {
          o.status.push_back(nlp::to_string(cand.solve->result.status));
        }
      }
    } catch (const std::exception&) {
      o.status.push_back("error");
    }
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(o);
    }
  });
  std::sort(report.outcomes.begin(), report.outcomes.end(),
            [](const SweepOutcome& a, const SweepOutcome& b) { return a.id < b.id; });
  return report;
}

}  // namespace comfort
