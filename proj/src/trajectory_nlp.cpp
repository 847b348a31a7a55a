#include "comfort/trajectory_nlp.hpp"

#include <unordered_map>

#include "comfort/errors.hpp"

namespace comfort {

struct TrajectoryNlp::Shared {
  Shared(const ProblemSpec& s, DofVector b) : spec(s), base(std::move(b)) {}

  ProblemSpec spec;
  DofVector base;
  double speed_floor = 0.0;
  ConstraintSet constraints;
  std::vector<int> rows;
  // Hessian slot per local (a, c) pair, row-major count x count, -1 when
  // either DOF is eliminated or a > c in free order.
  std::vector<std::vector<int>> element_slots;
  std::vector<std::vector<int>> row_slots;
  // Jacobian entry per local DOF of each NLP row (-1 when eliminated).
  std::vector<std::vector<int>> row_entries;
  int hess_nnz = 0;
  int jac_nnz = 0;
};

namespace {

bool row_is_linear(RowKind kind) {
  switch (kind) {
    case RowKind::end_curvature:
    case RowKind::speed:
    case RowKind::curvature_lower:
    case RowKind::curvature_upper: return true;
    default: return false;
  }
}

double to_nlp_bound(double b) {
  if (b == std::numeric_limits<double>::infinity()) return nlp::kInfinity;
  if (b == -std::numeric_limits<double>::infinity()) return -nlp::kInfinity;
  return b;
}

}  // namespace

TrajectoryNlp::TrajectoryNlp(const ProblemSpec& spec, DofVector base)
    : shared_(std::make_shared<Shared>(spec, std::move(base))) {
  shared_->speed_floor = 1e-9 * spec.limits.v_max;
  shared_->constraints = assemble_constraints(spec, shared_->base.layout_ptr());
  build_structure();
}

const ConstraintSet& TrajectoryNlp::constraints() const { return shared_->constraints; }
const std::vector<int>& TrajectoryNlp::rows() const { return shared_->rows; }

void TrajectoryNlp::build_structure() {
  Shared& sh = *shared_;
  const ConstraintSet& set = sh.constraints;
  std::vector<int>& nlp_rows = sh.rows;
  const DofLayout& lay = sh.base.layout();
  const int n = lay.free_size();

  std::unordered_map<long long, int> hess_index;
  std::vector<nlp::SparseIndex> hess_structure;
  auto hess_slot = [&](int fa, int fc) {
    if (fa < fc) std::swap(fa, fc);
    const long long key = static_cast<long long>(fa) * n + fc;
    auto [it, inserted] = hess_index.emplace(key, static_cast<int>(hess_structure.size()));
    if (inserted) hess_structure.push_back({fa, fc});
    return it->second;
  };
  auto block_slots = [&](int count, const std::array<int, kMaxLocalDofs>& dofs,
                         unsigned skip = 0u) {
    std::vector<int> slots(count * count, -1);
    for (int a = 0; a < count; ++a) {
      if (skip >> a & 1u) continue;
      const int fa = lay.free_index(dofs[a]);
      if (fa < 0) continue;
      for (int c = 0; c < count; ++c) {
        const int fc = lay.free_index(dofs[c]);
        if (fc < 0 || fc > fa || (skip >> c & 1u)) continue;
        slots[a * count + c] = hess_slot(fa, fc);
      }
    }
    return slots;
  };

  // The element DOF lists do not depend on values.
  for (int e = 0; e < lay.n_elements(); ++e) {
    const LocalBlock b = element_cost(sh.base, e, sh.spec.weights, -1e300, 0);
    sh.element_slots.push_back(block_slots(b.count, b.dofs));
  }

  std::vector<nlp::SparseIndex> jac_structure;
  problem_.con_lower.clear();
  problem_.con_upper.clear();
  for (std::size_t i = 0; i < set.size(); ++i) {
    const ConstraintRow& row = set[i];
    bool any_free = false;
    for (int k = 0; k < row.count; ++k) any_free |= lay.free_index(row.dofs[k]) >= 0;
    if (!any_free) continue;
    const int nlp_row = static_cast<int>(nlp_rows.size());
    nlp_rows.push_back(static_cast<int>(i));
    problem_.con_lower.push_back(to_nlp_bound(row.lower));
    problem_.con_upper.push_back(to_nlp_bound(row.upper));
    std::vector<int> entries(row.count, -1);
    for (int k = 0; k < row.count; ++k) {
      const int f = lay.free_index(row.dofs[k]);
      if (f < 0) continue;
      entries[k] = static_cast<int>(jac_structure.size());
      jac_structure.push_back({nlp_row, f});
    }
    sh.row_entries.push_back(std::move(entries));
    // Linking rows are linear in the two positions (local slots 4 and 5).
    const bool linking = row.kind == RowKind::linking_x || row.kind == RowKind::linking_y;
    sh.row_slots.push_back(row_is_linear(row.kind)
                               ? std::vector<int>{}
                               : block_slots(row.count, row.dofs, linking ? 0b110000u : 0u));
  }
  sh.hess_nnz = static_cast<int>(hess_structure.size());
  sh.jac_nnz = static_cast<int>(jac_structure.size());

  problem_.n_vars = n;
  problem_.n_cons = static_cast<int>(nlp_rows.size());
  problem_.var_lower.assign(n, -nlp::kInfinity);
  problem_.var_upper.assign(n, nlp::kInfinity);
  problem_.var_lower[lay.free_index(lay.lambda())] = kMinPathLength;
  problem_.jacobian_structure = std::move(jac_structure);
  problem_.hessian_structure = std::move(hess_structure);

  auto shared = shared_;
  const ConstraintSet* cons = &shared->constraints;
  const std::vector<int>* rows = &shared->rows;
  auto make_dofs = [shared](std::span<const double> x) {
    DofVector d = shared->base;
    d.set_free_values(x);
    return d;
  };

  problem_.objective = [shared, make_dofs](std::span<const double> x, double& f) {
    try {
      const DofVector d = make_dofs(x);
      f = 0.0;
      for (int e = 0; e < d.layout().n_elements(); ++e) {
        f += element_cost(d, e, shared->spec.weights, shared->speed_floor, 0).value;
      }
      return std::isfinite(f);
    } catch (const NonPositiveSpeedError&) {
      return false;
    }
  };
  problem_.gradient = [shared, make_dofs](std::span<const double> x, std::span<double> g) {
    try {
      const DofVector d = make_dofs(x);
      std::fill(g.begin(), g.end(), 0.0);
      const auto& lay = d.layout();
      for (int e = 0; e < lay.n_elements(); ++e) {
        const LocalBlock b = element_cost(d, e, shared->spec.weights, shared->speed_floor, 1);
        for (int k = 0; k < b.count; ++k) {
          const int f = lay.free_index(b.dofs[k]);
          if (f >= 0) g[f] += b.grad[k];
        }
      }
      return true;
    } catch (const NonPositiveSpeedError&) {
      return false;
    }
  };
  problem_.constraints = [cons, rows, make_dofs](std::span<const double> x, std::span<double> g) {
    const DofVector d = make_dofs(x);
    for (std::size_t r = 0; r < rows->size(); ++r) g[r] = cons->evaluate((*rows)[r], d, 0).value;
    return true;
  };
  problem_.jacobian = [shared, cons, rows, make_dofs](std::span<const double> x,
                                                      std::span<double> values) {
    const DofVector d = make_dofs(x);
    for (std::size_t r = 0; r < rows->size(); ++r) {
      const LocalBlock b = cons->evaluate((*rows)[r], d, 1);
      const auto& entries = shared->row_entries[r];
      for (int k = 0; k < b.count; ++k) {
        if (entries[k] >= 0) values[entries[k]] = b.grad[k];
      }
    }
    return true;
  };
  problem_.hessian = [shared, cons, rows, make_dofs](std::span<const double> x, double obj_factor,
                                                     std::span<const double> y,
                                                     std::span<double> values) {
    try {
      const DofVector d = make_dofs(x);
      std::fill(values.begin(), values.end(), 0.0);
      auto scatter = [&](const LocalBlock& b, const std::vector<int>& slots, double w) {
        for (int a = 0; a < b.count; ++a) {
          for (int c = 0; c < b.count; ++c) {
            const int s = slots[a * b.count + c];
            if (s >= 0) values[s] += w * b.hess(a, c);
          }
        }
      };
      if (obj_factor != 0.0) {
        for (int e = 0; e < d.layout().n_elements(); ++e) {
          const LocalBlock b = element_cost(d, e, shared->spec.weights, shared->speed_floor, 2);
          scatter(b, shared->element_slots[e], obj_factor);
        }
      }
      for (std::size_t r = 0; r < rows->size(); ++r) {
        if (y[r] == 0.0 || shared->row_slots[r].empty()) continue;
        scatter(cons->evaluate((*rows)[r], d, 2), shared->row_slots[r], y[r]);
      }
      return true;
    } catch (const NonPositiveSpeedError&) {
      return false;
    }
  };
}

DofVector TrajectoryNlp::dofs_from(std::span<const double> x) const {
  DofVector d = shared_->base;
  d.set_free_values(x);
  return d;
}

std::vector<double> TrajectoryNlp::start_point(const DofVector& guess) const {
  const Eigen::VectorXd v = guess.free_values();
  return {v.data(), v.data() + v.size()};
}

nlp::SolverOptions trajectory_solver_options() {
  nlp::SolverOptions o;
  o.kappa_mu = 0.5;
  return o;
}

TrajectorySolve solve_trajectory(const ProblemSpec& spec, const DofVector& guess,
                                 const nlp::SolverOptions& options) {
  TrajectoryNlp nlp_problem(spec, guess);
  const auto x0 = nlp_problem.start_point(guess);
  nlp::SolveResult result = nlp::solve(nlp_problem.problem(), x0, options);
  DofVector dofs = nlp_problem.dofs_from(result.x);
  return {std::move(result), std::move(dofs)};
}

}  // namespace comfort
