// comfort-traj: plan comfortable trajectories, inspect initial guesses, run
// the mesh-convergence study and the benchmark sweep.
//
// Exit codes: 0 success, 1 usage or parse error, 2 no solution, 3 internal.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "comfort/errors.hpp"
#include "comfort/planner.hpp"
#include "comfort/postprocess_io.hpp"

namespace fs = std::filesystem;
using namespace comfort;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNoSolution = 2, kInternal = 3 };

// 0 quiet, 1 info (default), 2 debug with solver logs.
int log_level() {
  const char* env = std::getenv("COMFORT_TRAJ_LOG");
  if (!env || !*env) return 1;
  const std::string s = env;
  if (s == "quiet" || s == "error" || s == "0") return 0;
  if (s == "debug" || s == "trace" || s == "2") return 2;
  return 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << '\n';
}

void debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << msg << '\n';
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

Metadata candidate_metadata(const PlanCandidate& c, int index) {
  Metadata m;
  m.emplace_back("guess", std::to_string(index));
  m.emplace_back("parity", std::to_string(c.path.parity));
  m.emplace_back("path_source", to_string(c.path.source));
  m.emplace_back("status", nlp::to_string(c.solve->result.status));
  m.emplace_back("iterations", std::to_string(c.solve->result.iterations));
  m.emplace_back("J", fmt("%.17g", c.cost.J_total));
  m.emplace_back("J_tau", fmt("%.17g", c.cost.J_tau));
  m.emplace_back("J_T", fmt("%.17g", c.cost.J_T));
  m.emplace_back("J_N", fmt("%.17g", c.cost.J_N));
  m.emplace_back("lambda", fmt("%.17g", c.solve->dofs.lambda()));
  m.emplace_back("max_violation", fmt("%.3e", c.max_violation));
  return m;
}

int cmd_plan(const std::string& spec_path, const fs::path& out_dir, int n, int guesses, int jobs,
             int samples) {
  const ProblemSpec spec = read_problem(spec_path);
  PlanOptions opts;
  opts.n_elements = n;
  opts.max_guesses = guesses;
  opts.jobs = jobs;
  const PlanResult res = plan(spec, opts);
  fs::create_directories(out_dir);

  std::ostringstream summary;
  summary << "guess parity source status iterations J max_violation\n";
  for (int i = 0; i < static_cast<int>(res.candidates.size()); ++i) {
    const PlanCandidate& c = res.candidates[i];
    summary << i << ' ' << c.path.parity << ' ' << to_string(c.path.source) << ' ';
    if (!c.solve) {
      summary << "error - - - (" << c.error << ")\n";
      continue;
    }
    const auto& r = c.solve->result;
    summary << (r.converged() && !c.feasible ? "infeasible_audit" : nlp::to_string(r.status)) << ' '
            << r.iterations << ' ';
    if (r.converged()) {
      summary << fmt("%.10g", c.cost.J_total) << ' ' << fmt("%.2e", c.max_violation) << '\n';
    } else {
      summary << "- -\n";
    }
    if (r.log.size()) debug("guess " + std::to_string(i) + "\n" + nlp::format_log(r));
    if (c.success()) {
      const auto s = sample_trajectory(c.solve->dofs, samples);
      write_result(out_dir / ("solution_" + std::to_string(i) + ".csv"), s,
                   candidate_metadata(c, i));
    }
  }
  if (const PlanCandidate* best = res.best_candidate()) {
    summary << "best " << res.best << '\n';
    const auto s = sample_trajectory(best->solve->dofs, samples);
    write_result(out_dir / "best.csv", s, candidate_metadata(*best, res.best));
    PlotOptions plot;
    plot.obstacles = spec.obstacles;
    plot.title = "best solution, J = " + fmt("%.6g", best->cost.J_total);
    emit_plot(s, out_dir / "best.svg", plot);
  } else {
    summary << "best none\n";
  }
  write_file(out_dir / "summary.txt", summary.str());
  std::cout << summary.str();
  if (!res.best_candidate()) {
    std::cerr << "no guess converged to a feasible solution\n";
    return kNoSolution;
  }
  return kOk;
}

int cmd_converge(const std::string& spec_path, const std::vector<int>& n_list,
                 const fs::path& out_dir) {
  const ProblemSpec spec = read_problem(spec_path);
  if (!spec.obstacles.empty()) {
    std::cerr << "converge expects a spec without obstacles\n";
    return kUsage;
  }
  const auto rows = converge_study(spec, n_list);
  std::ostringstream table;
  table << "n status J log10_rel_gap iterations\n";
  bool any_failed = false;
  for (const auto& r : rows) {
    table << r.n << ' ' << (r.converged ? "ok" : "FAILED") << ' ';
    if (r.converged) {
      table << fmt("%.15g", r.J) << ' '
            << (std::isinf(r.log_rel_gap) ? std::string("-inf") : fmt("%.4f", r.log_rel_gap))
            << ' ' << r.iterations << '\n';
    } else {
      any_failed = true;
      table << "- - -\n";
    }
  }
  std::cout << table.str();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file(out_dir / "converge.txt", table.str());
  }
  bool any_ok = false;
  for (const auto& r : rows) any_ok |= r.converged;
  if (any_failed) info("some mesh sizes failed to converge");
  return any_ok ? kOk : kNoSolution;
}

int cmd_sweep(int subsample, int jobs, const fs::path& out_dir) {
  SweepConfig cfg;
  cfg.subsample = subsample;
  cfg.jobs = jobs;
  const int total = static_cast<int>(sweep_cases(cfg).size());
  info("sweep: " + std::to_string(total) + " cases");
  int done = 0;
  const SweepReport rep = run_sweep(cfg, [&](const SweepOutcome& o) {
    ++done;
    debug("case " + std::to_string(o.id) + ": " + std::to_string(o.solutions) + " solutions");
    if (done % 50 == 0) info(std::to_string(done) + "/" + std::to_string(total));
  });

  std::ostringstream cases;
  cases << "id,direction,distance,orientation,speed_pair,free_dofs,guesses,solutions,best_J,"
           "iterations,status\n";
  std::ostringstream timing;
  timing << "id,seconds\n";
  std::vector<int> iter_hist(6, 0);  // <25, <50, <75, <100, <200, other
  int converged_solves = 0;
  const auto all = sweep_cases(cfg);
  for (std::size_t i = 0; i < rep.outcomes.size(); ++i) {
    const auto& o = rep.outcomes[i];
    const auto& c = all[i];
    cases << o.id << ',' << c.direction << ',' << c.distance << ',' << c.orientation << ','
          << c.speed_pair << ',' << o.free_dofs << ',' << o.guesses << ',' << o.solutions << ','
          << fmt("%.10g", o.best_J) << ',';
    for (std::size_t k = 0; k < o.iterations.size(); ++k) {
      cases << (k ? ";" : "") << o.iterations[k];
    }
    cases << ',';
    for (std::size_t k = 0; k < o.status.size(); ++k) {
      cases << (k ? ";" : "") << o.status[k];
      if (o.status[k] == "converged") {
        ++converged_solves;
        const int it = o.iterations[k];
        iter_hist[it < 25 ? 0 : it < 50 ? 1 : it < 75 ? 2 : it < 100 ? 3 : it < 200 ? 4 : 5]++;
      }
    }
    cases << '\n';
    timing << o.id << ',' << fmt("%.4f", o.seconds) << '\n';
  }

  std::ostringstream report;
  report << "cases " << rep.outcomes.size() << '\n';
  report << "subsample " << subsample << '\n';
  report << "mean_solutions_per_case " << fmt("%.4f", rep.mean_solutions()) << '\n';
  report << "cases_without_solution " << rep.cases_without_solution() << '\n';
  const auto hist = rep.solution_histogram();
  report << "solutions_histogram";
  for (int h : hist) report << ' ' << h;
  report << '\n';
  report << "converged_solves " << converged_solves << '\n';
  report << "iterations_histogram <25 <50 <75 <100 <200 >=200:";
  for (int h : iter_hist) report << ' ' << h;
  report << '\n';
  std::cout << report.str();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file(out_dir / "cases.csv", cases.str());
    write_file(out_dir / "report.txt", report.str());
    write_file(out_dir / "timing.csv", timing.str());
  }
  return kOk;
}

int cmd_guess(const std::string& spec_path, const fs::path& out_dir, int n, int samples) {
  const ProblemSpec spec = read_problem(spec_path);
  const int n_el = n > 0 ? n : spec.n_elements;
  const auto guesses = build_guesses(spec, n_el);
  fs::create_directories(out_dir);
  std::ostringstream summary;
  summary << "guess parity theta_end source lambda speed_kind\n";
  int written = 0;
  for (int i = 0; i < static_cast<int>(guesses.size()); ++i) {
    const Guess& g = guesses[i];
    summary << i << ' ' << g.path.parity << ' ' << fmt("%.12g", g.path.theta_end) << ' '
            << to_string(g.path.source) << ' ' << fmt("%.12g", g.path.lambda) << ' '
            << static_cast<int>(g.speed.kind) << '\n';
    try {
      const auto s = sample_trajectory(g.dofs, samples);
      Metadata m{{"guess", std::to_string(i)},
                 {"parity", std::to_string(g.path.parity)},
                 {"path_source", to_string(g.path.source)},
                 {"lambda", fmt("%.17g", g.path.lambda)}};
      write_result(out_dir / ("guess_" + std::to_string(i) + ".csv"), s, m);
      PlotOptions plot;
      plot.obstacles = spec.obstacles;
      plot.title = "guess " + std::to_string(i);
      emit_plot(s, out_dir / ("guess_" + std::to_string(i) + ".svg"), plot);
      ++written;
    } catch (const Error& e) {
      info("guess " + std::to_string(i) + " could not be sampled: " + e.what());
    }
  }
  write_file(out_dir / "guesses.txt", summary.str());
  std::cout << summary.str();
  return written > 0 ? kOk : kNoSolution;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Comfortable trajectory planning for nonholonomic robots"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_dir = "out";
  int n = 0;
  int guesses = 4;
  int jobs = 1;
  int samples = 201;
  auto* plan_cmd = app.add_subcommand("plan", "Solve from every initial guess and keep the best");
  plan_cmd->add_option("spec", spec_path, "Problem JSON")->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("--out", out_dir, "Output directory");
  plan_cmd->add_option("--n", n, "Number of elements (default: from the spec)")
      ->check(CLI::PositiveNumber);
  plan_cmd->add_option("--guesses", guesses, "Initial guesses to try")->check(CLI::Range(1, 4));
  plan_cmd->add_option("--jobs", jobs, "Parallel solves")->check(CLI::PositiveNumber);
  plan_cmd->add_option("--samples", samples, "Samples per result file")->check(CLI::Range(2, 1000000));

  std::vector<int> n_list;
  std::string converge_out;
  auto* conv_cmd = app.add_subcommand("converge", "Mesh-convergence study of the optimal cost");
  conv_cmd->add_option("spec", spec_path, "Problem JSON")->required()->check(CLI::ExistingFile);
  conv_cmd->add_option("--n-list", n_list, "Element counts, e.g. 2,4,8")
      ->required()
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  conv_cmd->add_option("--out", converge_out, "Directory for the table");

  int subsample = 5;
  std::string sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "Benchmark sweep over boundary conditions");
  sweep_cmd->add_option("--subsample", subsample, "Keep every K-th case (1 = full grid)")
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--jobs", jobs, "Parallel cases")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", sweep_out, "Output directory");

  auto* guess_cmd = app.add_subcommand("guess", "Write the initial guesses without solving");
  guess_cmd->add_option("spec", spec_path, "Problem JSON")->required()->check(CLI::ExistingFile);
  guess_cmd->add_option("--out", out_dir, "Output directory");
  guess_cmd->add_option("--n", n, "Number of elements")->check(CLI::PositiveNumber);
  guess_cmd->add_option("--samples", samples, "Samples per guess file")->check(CLI::Range(2, 1000000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*plan_cmd) return cmd_plan(spec_path, out_dir, n, guesses, jobs, samples);
    if (*conv_cmd) return cmd_converge(spec_path, n_list, converge_out);
    if (*sweep_cmd) return cmd_sweep(subsample, jobs, sweep_out);
    if (*guess_cmd) return cmd_guess(spec_path, out_dir, n, samples);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidSpecError& e) {
    std::cerr << "invalid spec: " << e.what() << '\n';
    return kUsage;
  } catch (const DegenerateInputError& e) {
    std::cerr << "degenerate input: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
