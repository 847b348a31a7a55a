#include "comfort/nlp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace comfort::nlp {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

namespace {

constexpr double kBoundInf = 1e19;
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kKappaD = 1e-4;       // damping of one-sided bounds
constexpr double kKappaSigma = 1e10;   // bound multiplier safeguard
constexpr double kDeltaCFactor = 1e-9;  // static regularization of the constraint block
constexpr double kBoundPush = 1e-2;

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

bool has_lower(double b) { return b > -kBoundInf; }
bool has_upper(double b) { return b < kBoundInf; }

bool all_finite(const Vec& v) { return v.allFinite(); }

// One bounded side of a primal component. Components are x (0..n-1)
// followed by the inequality slacks s.
struct BoundSide {
  int index;
  double bound;
  bool one_sided;
};

struct Iterate {
  Vec x, s;
  Vec yc, yd;
  Vec zl, zu;  // per lower / upper bound side
};

// Scaled model values at a primal point.
struct ModelValues {
  double f = 0.0;
  Vec grad;
  Vec c;  // equality residuals
  Vec d;  // inequality bodies
  Vec jac;
};

struct Direction {
  Vec dx, ds, dyc, dyd, dzl, dzu;
};

class InteriorPoint {
 public:
  InteriorPoint(const NlpProblem& p, const SolverOptions& o, bool nested = false)
      : p_(p), opt_(o), nested_(nested) {
    setup();
  }

  /// Checked after every accepted step; returning true ends the solve.
  std::function<bool(const Vec& x)> stop_;

  SolveResult run(std::span<const double> x0);

 private:
  void setup();
  void build_bounds();
  void build_kkt_pattern();
  int kkt_slot(int row, int col) const;

  bool eval_point(const Vec& x, ModelValues& mv) const;
  bool eval_derivatives(const Vec& x, ModelValues& mv) const;
  bool eval_hessian(const Vec& x, const Vec& yc, const Vec& yd, Vec& h) const;
  void compute_scaling(std::span<const double> x);

  Vec jac_transpose_times(const Vec& jac, const Vec& yc, const Vec& yd) const;
  void jac_times(const Vec& jac, const Vec& dx, Vec& jc_dx, Vec& jd_dx) const;

  double component(const Vec& x, const Vec& s, int i) const { return i < n_ ? x[i] : s[i - n_]; }
  void slacks(const Vec& x, const Vec& s, Vec& sl, Vec& su) const;
  Vec interior_slacks(const Vec& d) const;

  double barrier(const Vec& x, const Vec& s, double f, double mu) const;
  Vec barrier_gradient(const Iterate& it, const ModelValues& mv, double mu) const;
  static double theta(const ModelValues& mv, const Vec& s);
  double kkt_error(const Iterate& it, const ModelValues& mv, double mu, double* inf_du,
                   double* inf_pr, double* compl_out) const;
  double unscaled_violation(const ModelValues& mv) const;
  // Scaled 1-norm of the bound violations of d, without slack push.
  double bound_violation(const ModelValues& mv) const;

  bool factorize(const Vec& hess, bool use_hess, const Vec& sigma, double delta_w,
                 const Vec& jac, bool* inertia_ok);
  Vec kkt_times(const Vec& z) const;
  Vec kkt_solve(const Vec& rhs) const;
  void solve_reduced(const Vec& jac, const Vec& rx, const Vec& rs, const Vec& rc, const Vec& rd,
                     Vec& dx, Vec& ds, Vec& dyc, Vec& dyd) const;
  bool compute_direction(const Iterate& it, const ModelValues& mv, const Vec& hess, double mu,
                         Direction& dir, double* reg_used);
  double max_step_primal(const Iterate& it, const Vec& dx, const Vec& ds, double tau) const;
  double max_step_dual(const Iterate& it, const Direction& dir, double tau) const;
  void safeguard_bound_multipliers(Iterate& it, double mu) const;

  bool filter_acceptable(double th, double ph) const;
  void add_to_filter(double th, double ph);
  bool restoration(Iterate& it, ModelValues& mv, double mu, int& iter, SolveResult& res);

  const NlpProblem& p_;
  SolverOptions opt_;
  bool nested_ = false;
  int n_ = 0;
  int m_ = 0;
  int me_ = 0;
  int mi_ = 0;
  std::vector<int> eq_rows_, ineq_rows_;
  std::vector<int> row_slot_;  // index within the equality or inequality block
  std::vector<char> row_is_eq_;
  std::vector<BoundSide> lower_, upper_;
  Vec d_lower_, d_upper_;  // scaled inequality bounds
  double obj_scale_ = 1.0;
  std::vector<double> con_scale_;

  // KKT matrix: primal block then equality multipliers, lower triangle.
  SpMat kkt_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  std::vector<int> diag_slot_;
  std::vector<int> hess_slot_;
  std::vector<std::pair<int, int>> eq_jac_slot_;  // (jacobian entry, slot)
  struct PairSlot {
    int row;  // inequality index
    int ea, eb;
    int slot;
    double factor;
  };
  std::vector<PairSlot> ineq_pairs_;
  std::vector<std::vector<int>> ineq_entries_;
  Vec slack_weight_;  // Sigma_s + delta_w used in the current factorization
  double last_delta_w_ = 0.0;

  std::vector<std::pair<double, double>> filter_;
  double theta_max_ = 0.0;
  double theta_min_ = 0.0;
};

void InteriorPoint::setup() {
  n_ = p_.n_vars;
  m_ = p_.n_cons;
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  need(n_ >= 1, "nlp: n_vars must be positive");
  need(m_ >= 0, "nlp: n_cons must be non-negative");
  need(static_cast<int>(p_.var_lower.size()) == n_ && static_cast<int>(p_.var_upper.size()) == n_,
       "nlp: variable bound sizes do not match n_vars");
  need(static_cast<int>(p_.con_lower.size()) == m_ && static_cast<int>(p_.con_upper.size()) == m_,
       "nlp: constraint bound sizes do not match n_cons");
  need(p_.objective && p_.gradient && p_.hessian && (m_ == 0 || (p_.constraints && p_.jacobian)),
       "nlp: missing callback");
  for (const auto& e : p_.jacobian_structure) {
    need(e.row >= 0 && e.row < m_ && e.col >= 0 && e.col < n_, "nlp: Jacobian index out of range");
  }
  for (const auto& e : p_.hessian_structure) {
    need(e.row >= 0 && e.row < n_ && e.col >= 0 && e.col < n_, "nlp: Hessian index out of range");
    need(e.row >= e.col, "nlp: Hessian structure must be lower triangular");
  }

  row_slot_.assign(m_, -1);
  row_is_eq_.assign(m_, 0);
  for (int i = 0; i < m_; ++i) {
    need(p_.con_lower[i] <= p_.con_upper[i], "nlp: constraint lower bound exceeds upper bound");
    if (p_.con_lower[i] == p_.con_upper[i]) {
      row_is_eq_[i] = 1;
      row_slot_[i] = static_cast<int>(eq_rows_.size());
      eq_rows_.push_back(i);
    } else {
      row_slot_[i] = static_cast<int>(ineq_rows_.size());
      ineq_rows_.push_back(i);
    }
  }
  me_ = static_cast<int>(eq_rows_.size());
  mi_ = static_cast<int>(ineq_rows_.size());
  for (int i = 0; i < n_; ++i) {
    need(p_.var_lower[i] < p_.var_upper[i], "nlp: variable bounds must satisfy lower < upper");
  }
  ineq_entries_.assign(mi_, {});
  for (int e = 0; e < static_cast<int>(p_.jacobian_structure.size()); ++e) {
    const int r = p_.jacobian_structure[e].row;
    if (!row_is_eq_[r]) ineq_entries_[row_slot_[r]].push_back(e);
  }
  con_scale_.assign(m_, 1.0);
}

void InteriorPoint::build_bounds() {
  lower_.clear();
  upper_.clear();
  for (int i = 0; i < n_; ++i) {
    const bool lo = has_lower(p_.var_lower[i]);
    const bool up = has_upper(p_.var_upper[i]);
    if (lo) lower_.push_back({i, p_.var_lower[i], !up});
    if (up) upper_.push_back({i, p_.var_upper[i], !lo});
  }
  d_lower_.resize(mi_);
  d_upper_.resize(mi_);
  for (int k = 0; k < mi_; ++k) {
    const int r = ineq_rows_[k];
    const bool lo = has_lower(p_.con_lower[r]);
    const bool up = has_upper(p_.con_upper[r]);
    d_lower_[k] = lo ? con_scale_[r] * p_.con_lower[r] : -kInf;
    d_upper_[k] = up ? con_scale_[r] * p_.con_upper[r] : kInf;
    if (lo) lower_.push_back({n_ + k, d_lower_[k], !up});
    if (up) upper_.push_back({n_ + k, d_upper_[k], !lo});
  }
}

int InteriorPoint::kkt_slot(int row, int col) const {
  if (row < col) std::swap(row, col);
  const int* outer = kkt_.outerIndexPtr();
  const int* inner = kkt_.innerIndexPtr();
  const int* first = inner + outer[col];
  const int* last = inner + outer[col + 1];
  const int* it = std::lower_bound(first, last, row);
  if (it == last || *it != row) throw std::logic_error("nlp: KKT slot missing");
  return static_cast<int>(it - inner);
}

void InteriorPoint::build_kkt_pattern() {
  const int dim = n_ + me_;
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < dim; ++i) trips.emplace_back(i, i, 0.0);
  for (const auto& e : p_.hessian_structure) trips.emplace_back(e.row, e.col, 0.0);
  for (const auto& e : p_.jacobian_structure) {
    if (row_is_eq_[e.row]) trips.emplace_back(n_ + row_slot_[e.row], e.col, 0.0);
  }
  for (const auto& entries : ineq_entries_) {
    for (std::size_t a = 0; a < entries.size(); ++a) {
      for (std::size_t b = a; b < entries.size(); ++b) {
        const int ca = p_.jacobian_structure[entries[a]].col;
        const int cb = p_.jacobian_structure[entries[b]].col;
        trips.emplace_back(std::max(ca, cb), std::min(ca, cb), 0.0);
      }
    }
  }
  kkt_.resize(dim, dim);
  kkt_.setFromTriplets(trips.begin(), trips.end());
  kkt_.makeCompressed();

  diag_slot_.resize(dim);
  for (int i = 0; i < dim; ++i) diag_slot_[i] = kkt_slot(i, i);
  hess_slot_.clear();
  for (const auto& e : p_.hessian_structure) hess_slot_.push_back(kkt_slot(e.row, e.col));
  eq_jac_slot_.clear();
  for (int e = 0; e < static_cast<int>(p_.jacobian_structure.size()); ++e) {
    const auto& je = p_.jacobian_structure[e];
    if (row_is_eq_[je.row]) eq_jac_slot_.emplace_back(e, kkt_slot(n_ + row_slot_[je.row], je.col));
  }
  ineq_pairs_.clear();
  for (int r = 0; r < mi_; ++r) {
    const auto& entries = ineq_entries_[r];
    for (std::size_t a = 0; a < entries.size(); ++a) {
      for (std::size_t b = a; b < entries.size(); ++b) {
        const int ca = p_.jacobian_structure[entries[a]].col;
        const int cb = p_.jacobian_structure[entries[b]].col;
        const double factor = (a != b && ca == cb) ? 2.0 : 1.0;
        ineq_pairs_.push_back({r, entries[a], entries[b], kkt_slot(ca, cb), factor});
      }
    }
  }
  ldlt_.analyzePattern(kkt_);
}

bool InteriorPoint::eval_point(const Vec& x, ModelValues& mv) const {
  double f = 0.0;
  if (!p_.objective(std::span<const double>(x.data(), n_), f) || !std::isfinite(f)) return false;
  mv.f = obj_scale_ * f;
  mv.c.resize(me_);
  mv.d.resize(mi_);
  if (m_ == 0) return true;
  std::vector<double> g(m_);
  if (!p_.constraints(std::span<const double>(x.data(), n_), g)) return false;
  for (int k = 0; k < me_; ++k) {
    const int r = eq_rows_[k];
    mv.c[k] = con_scale_[r] * (g[r] - p_.con_lower[r]);
  }
  for (int k = 0; k < mi_; ++k) {
    const int r = ineq_rows_[k];
    mv.d[k] = con_scale_[r] * g[r];
  }
  return all_finite(mv.c) && all_finite(mv.d);
}

bool InteriorPoint::eval_derivatives(const Vec& x, ModelValues& mv) const {
  mv.grad.resize(n_);
  if (!p_.gradient(std::span<const double>(x.data(), n_), std::span<double>(mv.grad.data(), n_))) {
    return false;
  }
  mv.grad *= obj_scale_;
  const int nnz = static_cast<int>(p_.jacobian_structure.size());
  mv.jac.resize(nnz);
  if (nnz > 0) {
    if (!p_.jacobian(std::span<const double>(x.data(), n_),
                     std::span<double>(mv.jac.data(), nnz))) {
      return false;
    }
    for (int e = 0; e < nnz; ++e) mv.jac[e] *= con_scale_[p_.jacobian_structure[e].row];
  }
  return all_finite(mv.grad) && all_finite(mv.jac);
}

bool InteriorPoint::eval_hessian(const Vec& x, const Vec& yc, const Vec& yd, Vec& h) const {
  const int nnz = static_cast<int>(p_.hessian_structure.size());
  h.resize(nnz);
  std::vector<double> y(m_);
  for (int r = 0; r < m_; ++r) {
    y[r] = con_scale_[r] * (row_is_eq_[r] ? yc[row_slot_[r]] : yd[row_slot_[r]]);
  }
  if (!p_.hessian(std::span<const double>(x.data(), n_), obj_scale_, y,
                  std::span<double>(h.data(), nnz))) {
    return false;
  }
  return all_finite(h);
}

void InteriorPoint::compute_scaling(std::span<const double> x) {
  const double gmax = opt_.scaling_gradient_max;
  std::vector<double> g(n_);
  obj_scale_ = 1.0;
  if (p_.gradient(x, g)) {
    double norm = 0.0;
    for (double a : g) norm = std::max(norm, std::abs(a));
    if (std::isfinite(norm) && norm > gmax) obj_scale_ = std::max(1e-8, gmax / norm);
  }
  const int nnz = static_cast<int>(p_.jacobian_structure.size());
  if (nnz == 0) return;
  std::vector<double> jac(nnz);
  if (!p_.jacobian(x, jac)) return;
  std::vector<double> row_max(m_, 0.0);
  for (int e = 0; e < nnz; ++e) {
    const int r = p_.jacobian_structure[e].row;
    row_max[r] = std::max(row_max[r], std::abs(jac[e]));
  }
  for (int r = 0; r < m_; ++r) {
    if (std::isfinite(row_max[r]) && row_max[r] > gmax) {
      con_scale_[r] = std::max(1e-8, gmax / row_max[r]);
    }
  }
}

Vec InteriorPoint::jac_transpose_times(const Vec& jac, const Vec& yc, const Vec& yd) const {
  Vec out = Vec::Zero(n_);
  for (int e = 0; e < static_cast<int>(p_.jacobian_structure.size()); ++e) {
    const auto& je = p_.jacobian_structure[e];
    const double y = row_is_eq_[je.row] ? yc[row_slot_[je.row]] : yd[row_slot_[je.row]];
    out[je.col] += jac[e] * y;
  }
  return out;
}

void InteriorPoint::jac_times(const Vec& jac, const Vec& dx, Vec& jc_dx, Vec& jd_dx) const {
  jc_dx = Vec::Zero(me_);
  jd_dx = Vec::Zero(mi_);
  for (int e = 0; e < static_cast<int>(p_.jacobian_structure.size()); ++e) {
    const auto& je = p_.jacobian_structure[e];
    const double v = jac[e] * dx[je.col];
    if (row_is_eq_[je.row]) {
      jc_dx[row_slot_[je.row]] += v;
    } else {
      jd_dx[row_slot_[je.row]] += v;
    }
  }
}

Vec InteriorPoint::interior_slacks(const Vec& d) const {
  Vec s = d;
  for (int k = 0; k < mi_; ++k) {
    const double lo = d_lower_[k], up = d_upper_[k];
    const bool hl = std::isfinite(lo), hu = std::isfinite(up);
    if (hl && hu) {
      const double push = std::min(kBoundPush * std::max(1.0, std::abs(lo)), kBoundPush * (up - lo));
      const double push_u = std::min(kBoundPush * std::max(1.0, std::abs(up)), kBoundPush * (up - lo));
      s[k] = std::clamp(s[k], lo + push, up - push_u);
    } else if (hl) {
      s[k] = std::max(s[k], lo + kBoundPush * std::max(1.0, std::abs(lo)));
    } else if (hu) {
      s[k] = std::min(s[k], up - kBoundPush * std::max(1.0, std::abs(up)));
    }
  }
  return s;
}

void InteriorPoint::slacks(const Vec& x, const Vec& s, Vec& sl, Vec& su) const {
  sl.resize(static_cast<int>(lower_.size()));
  su.resize(static_cast<int>(upper_.size()));
  for (int k = 0; k < sl.size(); ++k) sl[k] = component(x, s, lower_[k].index) - lower_[k].bound;
  for (int k = 0; k < su.size(); ++k) su[k] = upper_[k].bound - component(x, s, upper_[k].index);
}

double InteriorPoint::barrier(const Vec& x, const Vec& s, double f, double mu) const {
  Vec sl, su;
  slacks(x, s, sl, su);
  double log_sum = 0.0;
  double damp = 0.0;
  for (int k = 0; k < sl.size(); ++k) {
    if (!(sl[k] > 0.0)) return kInf;
    log_sum += std::log(sl[k]);
    if (lower_[k].one_sided) damp += sl[k];
  }
  for (int k = 0; k < su.size(); ++k) {
    if (!(su[k] > 0.0)) return kInf;
    log_sum += std::log(su[k]);
    if (upper_[k].one_sided) damp += su[k];
  }
  return f - mu * log_sum + kKappaD * mu * damp;
}

// Gradient of the barrier function with respect to (x, s).
Vec InteriorPoint::barrier_gradient(const Iterate& it, const ModelValues& mv, double mu) const {
  Vec g = Vec::Zero(n_ + mi_);
  g.head(n_) = mv.grad;
  Vec sl, su;
  slacks(it.x, it.s, sl, su);
  for (int k = 0; k < sl.size(); ++k) {
    g[lower_[k].index] += -mu / sl[k] + (lower_[k].one_sided ? kKappaD * mu : 0.0);
  }
  for (int k = 0; k < su.size(); ++k) {
    g[upper_[k].index] += mu / su[k] - (upper_[k].one_sided ? kKappaD * mu : 0.0);
  }
  return g;
}

double InteriorPoint::theta(const ModelValues& mv, const Vec& s) {
  return mv.c.lpNorm<1>() + (mv.d - s).lpNorm<1>();
}

double InteriorPoint::kkt_error(const Iterate& it, const ModelValues& mv, double mu,
                                double* inf_du, double* inf_pr, double* compl_out) const {
  Vec grad_l = Vec::Zero(n_ + mi_);
  grad_l.head(n_) = mv.grad + jac_transpose_times(mv.jac, it.yc, it.yd);
  grad_l.tail(mi_) = -it.yd;
  for (int k = 0; k < static_cast<int>(lower_.size()); ++k) grad_l[lower_[k].index] -= it.zl[k];
  for (int k = 0; k < static_cast<int>(upper_.size()); ++k) grad_l[upper_[k].index] += it.zu[k];
  const double du = grad_l.size() ? grad_l.lpNorm<Eigen::Infinity>() : 0.0;
  double pr = 0.0;
  if (me_ > 0) pr = std::max(pr, mv.c.lpNorm<Eigen::Infinity>());
  if (mi_ > 0) pr = std::max(pr, (mv.d - it.s).lpNorm<Eigen::Infinity>());
  Vec sl, su;
  slacks(it.x, it.s, sl, su);
  double co = 0.0;
  for (int k = 0; k < sl.size(); ++k) co = std::max(co, std::abs(sl[k] * it.zl[k] - mu));
  for (int k = 0; k < su.size(); ++k) co = std::max(co, std::abs(su[k] * it.zu[k] - mu));

  const double s_max = 100.0;
  const double z_sum = it.zl.lpNorm<1>() + it.zu.lpNorm<1>();
  const double n_z = static_cast<double>(lower_.size() + upper_.size());
  const double y_sum = it.yc.lpNorm<1>() + it.yd.lpNorm<1>();
  const double n_all = static_cast<double>(m_) + n_z;
  const double s_d = n_all > 0 ? std::max(s_max, (y_sum + z_sum) / n_all) / s_max : 1.0;
  const double s_c = n_z > 0 ? std::max(s_max, z_sum / n_z) / s_max : 1.0;
  if (inf_du) *inf_du = du;
  if (inf_pr) *inf_pr = pr;
  if (compl_out) *compl_out = co;
  return std::max({du / s_d, pr, co / s_c});
}

double InteriorPoint::bound_violation(const ModelValues& mv) const {
  double viol = mv.c.lpNorm<1>();
  for (int k = 0; k < mi_; ++k) {
    viol += std::max({0.0, d_lower_[k] - mv.d[k], mv.d[k] - d_upper_[k]});
  }
  return viol;
}

double InteriorPoint::unscaled_violation(const ModelValues& mv) const {
  double viol = 0.0;
  for (int k = 0; k < me_; ++k) viol = std::max(viol, std::abs(mv.c[k]) / con_scale_[eq_rows_[k]]);
  for (int k = 0; k < mi_; ++k) {
    const double scale = con_scale_[ineq_rows_[k]];
    viol = std::max(viol, (d_lower_[k] - mv.d[k]) / scale);
    viol = std::max(viol, (mv.d[k] - d_upper_[k]) / scale);
  }
  return viol;
}

// Assembles and factors the condensed KKT matrix
//   [W + Sigma_x + dw I + Jd^T (Sigma_s + dw I) Jd,  Jc^T]
//   [Jc,                                             -dc I]
bool InteriorPoint::factorize(const Vec& hess, bool use_hess, const Vec& sigma, double delta_w,
                              const Vec& jac, bool* inertia_ok) {
  double* vals = kkt_.valuePtr();
  std::fill(vals, vals + kkt_.nonZeros(), 0.0);
  for (int i = 0; i < n_; ++i) vals[diag_slot_[i]] += sigma[i] + delta_w;
  if (use_hess) {
    for (int k = 0; k < static_cast<int>(hess_slot_.size()); ++k) vals[hess_slot_[k]] += hess[k];
  }
  slack_weight_.resize(mi_);
  for (int r = 0; r < mi_; ++r) slack_weight_[r] = sigma[n_ + r] + delta_w;
  for (const auto& ps : ineq_pairs_) {
    vals[ps.slot] += ps.factor * slack_weight_[ps.row] * jac[ps.ea] * jac[ps.eb];
  }
  for (const auto& [e, slot] : eq_jac_slot_) vals[slot] += jac[e];
  for (int k = 0; k < me_; ++k) vals[diag_slot_[n_ + k]] = -kDeltaCFactor;

  ldlt_.factorize(kkt_);
  if (ldlt_.info() != Eigen::Success) {
    *inertia_ok = false;
    return true;
  }
  const Vec diag = ldlt_.vectorD();
  int pos = 0;
  int neg = 0;
  for (int i = 0; i < diag.size(); ++i) {
    if (!std::isfinite(diag[i])) {
      *inertia_ok = false;
      return true;
    }
    if (diag[i] > 0.0) ++pos;
    if (diag[i] < 0.0) ++neg;
  }
  *inertia_ok = (pos == n_ && neg == me_);
  return true;
}

// Product with the unregularized constraint block, used for refinement.
Vec InteriorPoint::kkt_times(const Vec& z) const {
  Vec out = Vec::Zero(z.size());
  for (int col = 0; col < kkt_.outerSize(); ++col) {
    for (SpMat::InnerIterator it(kkt_, col); it; ++it) {
      const int row = static_cast<int>(it.row());
      double v = it.value();
      if (row == col && row >= n_) v = 0.0;
      out[row] += v * z[col];
      if (row != col) out[col] += v * z[row];
    }
  }
  return out;
}

Vec InteriorPoint::kkt_solve(const Vec& rhs) const {
  Vec sol = ldlt_.solve(rhs);
  if (!sol.allFinite()) return sol;
  const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
  double prev = kInf;
  for (int k = 0; k < 8; ++k) {
    const Vec res = rhs - kkt_times(sol);
    const double rn = res.lpNorm<Eigen::Infinity>();
    if (rn <= 1e-14 * scale || rn > 0.5 * prev) break;
    prev = rn;
    const Vec corr = ldlt_.solve(res);
    if (!corr.allFinite()) break;
    sol += corr;
  }
  return sol;
}

// Solves the full primal-dual system for (dx, ds, dyc, dyd) given the
// residuals rx (primal), rs (slack), rc (equalities), rd (d(x) - s), using
// the current factorization.
void InteriorPoint::solve_reduced(const Vec& jac, const Vec& rx, const Vec& rs, const Vec& rc,
                                  const Vec& rd, Vec& dx, Vec& ds, Vec& dyc, Vec& dyd) const {
  Vec rhs(n_ + me_);
  Vec tmp = slack_weight_.cwiseProduct(rd) + rs;
  Vec jd_t = Vec::Zero(n_);
  for (int r = 0; r < mi_; ++r) {
    for (int e : ineq_entries_[r]) jd_t[p_.jacobian_structure[e].col] += jac[e] * tmp[r];
  }
  rhs.head(n_) = -rx - jd_t;
  rhs.tail(me_) = -rc;
  const Vec sol = kkt_solve(rhs);
  dx = sol.head(n_);
  dyc = sol.tail(me_);
  Vec jc_dx, jd_dx;
  jac_times(jac, dx, jc_dx, jd_dx);
  ds = jd_dx + rd;
  dyd = slack_weight_.cwiseProduct(ds) + rs;
}

bool InteriorPoint::compute_direction(const Iterate& it, const ModelValues& mv, const Vec& hess,
                                      double mu, Direction& dir, double* reg_used) {
  Vec sl, su;
  slacks(it.x, it.s, sl, su);
  Vec sigma = Vec::Zero(n_ + mi_);
  for (int k = 0; k < sl.size(); ++k) sigma[lower_[k].index] += it.zl[k] / sl[k];
  for (int k = 0; k < su.size(); ++k) sigma[upper_[k].index] += it.zu[k] / su[k];

  bool ok = false;
  double delta_w = 0.0;
  factorize(hess, true, sigma, delta_w, mv.jac, &ok);
  if (!ok) {
    delta_w = last_delta_w_ == 0.0 ? opt_.reg_init : std::max(opt_.reg_init, last_delta_w_ / 3.0);
    while (true) {
      factorize(hess, true, sigma, delta_w, mv.jac, &ok);
      if (ok) break;
      delta_w *= opt_.reg_factor;
      if (delta_w > opt_.reg_max) return false;
    }
    last_delta_w_ = delta_w;
  }
  *reg_used = delta_w;

  const Vec gphi = barrier_gradient(it, mv, mu);
  const Vec rx = gphi.head(n_) + jac_transpose_times(mv.jac, it.yc, it.yd);
  const Vec rs = gphi.tail(mi_) - it.yd;
  const Vec rd = mv.d - it.s;
  solve_reduced(mv.jac, rx, rs, mv.c, rd, dir.dx, dir.ds, dir.dyc, dir.dyd);
  if (!dir.dx.allFinite() || !dir.dyc.allFinite()) return false;

  dir.dzl.resize(sl.size());
  dir.dzu.resize(su.size());
  for (int k = 0; k < sl.size(); ++k) {
    const int i = lower_[k].index;
    const double dw = i < n_ ? dir.dx[i] : dir.ds[i - n_];
    dir.dzl[k] = (mu - it.zl[k] * sl[k] - it.zl[k] * dw) / sl[k];
  }
  for (int k = 0; k < su.size(); ++k) {
    const int i = upper_[k].index;
    const double dw = i < n_ ? dir.dx[i] : dir.ds[i - n_];
    dir.dzu[k] = (mu - it.zu[k] * su[k] + it.zu[k] * dw) / su[k];
  }
  return true;
}

double InteriorPoint::max_step_primal(const Iterate& it, const Vec& dx, const Vec& ds,
                                      double tau) const {
  Vec sl, su;
  slacks(it.x, it.s, sl, su);
  double alpha = 1.0;
  for (int k = 0; k < sl.size(); ++k) {
    const int i = lower_[k].index;
    const double dw = i < n_ ? dx[i] : ds[i - n_];
    if (dw < 0.0) alpha = std::min(alpha, -tau * sl[k] / dw);
  }
  for (int k = 0; k < su.size(); ++k) {
    const int i = upper_[k].index;
    const double dw = i < n_ ? dx[i] : ds[i - n_];
    if (dw > 0.0) alpha = std::min(alpha, tau * su[k] / dw);
  }
  return alpha;
}

double InteriorPoint::max_step_dual(const Iterate& it, const Direction& dir, double tau) const {
  double alpha = 1.0;
  for (int k = 0; k < it.zl.size(); ++k) {
    if (dir.dzl[k] < 0.0) alpha = std::min(alpha, -tau * it.zl[k] / dir.dzl[k]);
  }
  for (int k = 0; k < it.zu.size(); ++k) {
    if (dir.dzu[k] < 0.0) alpha = std::min(alpha, -tau * it.zu[k] / dir.dzu[k]);
  }
  return alpha;
}

void InteriorPoint::safeguard_bound_multipliers(Iterate& it, double mu) const {
  Vec sl, su;
  slacks(it.x, it.s, sl, su);
  for (int k = 0; k < sl.size(); ++k) {
    it.zl[k] = std::clamp(it.zl[k], mu / (kKappaSigma * sl[k]), kKappaSigma * mu / sl[k]);
  }
  for (int k = 0; k < su.size(); ++k) {
    it.zu[k] = std::clamp(it.zu[k], mu / (kKappaSigma * su[k]), kKappaSigma * mu / su[k]);
  }
}

bool InteriorPoint::filter_acceptable(double th, double ph) const {
  for (const auto& [ft, fp] : filter_) {
    if (th >= ft && ph >= fp) return false;
  }
  return true;
}

void InteriorPoint::add_to_filter(double th, double ph) {
  std::erase_if(filter_, [&](const auto& e) { return e.first >= th && e.second >= ph; });
  filter_.emplace_back(th, ph);
}

// Feasibility phase on the elastic problem
//   min rho sum(p + n) + zeta/2 |D (x - x_R)|^2,  lo <= g(x) - p + n <= up,
// solved by a nested interior-point run that stops as soon as the original
// filter accepts the point. Constraints are used in their scaled form.
bool InteriorPoint::restoration(Iterate& it, ModelValues& mv, double mu, int& iter,
                                SolveResult& res) {
  if (nested_ || m_ == 0) return false;
  constexpr double kRho = 1000.0;
  const double theta_start = theta(mv, it.s);
  const double zeta = std::sqrt(mu);
  const Vec x_ref = it.x;
  Vec dscale(n_);
  for (int i = 0; i < n_; ++i) dscale[i] = std::min(1.0, 1.0 / std::max(std::abs(x_ref[i]), 1e-12));

  // Scaled bodies and bounds of all rows in the original order.
  std::vector<double> lo(m_), up(m_);
  for (int r = 0; r < m_; ++r) {
    lo[r] = has_lower(p_.con_lower[r]) ? con_scale_[r] * p_.con_lower[r] : -kBoundInf;
    up[r] = has_upper(p_.con_upper[r]) ? con_scale_[r] * p_.con_upper[r] : kBoundInf;
  }
  auto bodies = [&](std::span<const double> x, std::vector<double>& g) {
    g.assign(m_, 0.0);
    if (!p_.constraints(x, g)) return false;
    for (int r = 0; r < m_; ++r) g[r] *= con_scale_[r];
    return true;
  };

  NlpProblem rp;
  const int nr = n_ + 2 * m_;
  rp.n_vars = nr;
  rp.n_cons = m_;
  rp.var_lower.assign(nr, 0.0);
  rp.var_upper.assign(nr, kInfinity);
  for (int i = 0; i < n_; ++i) {
    rp.var_lower[i] = p_.var_lower[i];
    rp.var_upper[i] = p_.var_upper[i];
  }
  rp.con_lower = lo;
  rp.con_upper = up;
  rp.jacobian_structure = p_.jacobian_structure;
  for (int r = 0; r < m_; ++r) {
    rp.jacobian_structure.push_back({r, n_ + r});
    rp.jacobian_structure.push_back({r, n_ + m_ + r});
  }
  rp.hessian_structure = p_.hessian_structure;
  std::vector<int> diag(n_, -1);
  for (int k = 0; k < static_cast<int>(p_.hessian_structure.size()); ++k) {
    const auto& e = p_.hessian_structure[k];
    if (e.row == e.col) diag[e.row] = k;
  }
  for (int i = 0; i < n_; ++i) {
    if (diag[i] < 0) {
      diag[i] = static_cast<int>(rp.hessian_structure.size());
      rp.hessian_structure.push_back({i, i});
    }
  }
  const int nnz_orig_jac = static_cast<int>(p_.jacobian_structure.size());
  const int nnz_orig_hess = static_cast<int>(p_.hessian_structure.size());

  rp.objective = [&](std::span<const double> z, double& f) {
    // Keep iterates inside the domain of the original objective.
    double f_orig = 0.0;
    if (!p_.objective(z.first(n_), f_orig) || !std::isfinite(f_orig)) return false;
    f = 0.0;
    for (int r = 0; r < 2 * m_; ++r) f += kRho * z[n_ + r];
    for (int i = 0; i < n_; ++i) {
      const double dx = dscale[i] * (z[i] - x_ref[i]);
      f += 0.5 * zeta * dx * dx;
    }
    return true;
  };
  rp.gradient = [&](std::span<const double> z, std::span<double> g) {
    for (int i = 0; i < n_; ++i) g[i] = zeta * dscale[i] * dscale[i] * (z[i] - x_ref[i]);
    for (int r = 0; r < 2 * m_; ++r) g[n_ + r] = kRho;
    return true;
  };
  rp.constraints = [&](std::span<const double> z, std::span<double> g) {
    std::vector<double> body;
    if (!bodies(z.first(n_), body)) return false;
    for (int r = 0; r < m_; ++r) g[r] = body[r] - z[n_ + r] + z[n_ + m_ + r];
    return true;
  };
  rp.jacobian = [&](std::span<const double> z, std::span<double> values) {
    if (!p_.jacobian(z.first(n_), values.first(nnz_orig_jac))) return false;
    for (int e = 0; e < nnz_orig_jac; ++e) values[e] *= con_scale_[p_.jacobian_structure[e].row];
    for (int r = 0; r < m_; ++r) {
      values[nnz_orig_jac + 2 * r] = -1.0;
      values[nnz_orig_jac + 2 * r + 1] = 1.0;
    }
    return true;
  };
  rp.hessian = [&](std::span<const double> z, double obj_factor, std::span<const double> y,
                   std::span<double> values) {
    std::fill(values.begin(), values.end(), 0.0);
    std::vector<double> ys(m_);
    for (int r = 0; r < m_; ++r) ys[r] = con_scale_[r] * y[r];
    if (!p_.hessian(z.first(n_), 0.0, ys, values.first(nnz_orig_hess))) return false;
    for (int i = 0; i < n_; ++i) values[diag[i]] += obj_factor * zeta * dscale[i] * dscale[i];
    return true;
  };

  // Start: x_R with p, n solving the centrality conditions for mu.
  std::vector<double> z0(nr, 0.0);
  std::copy(x_ref.data(), x_ref.data() + n_, z0.begin());
  {
    std::vector<double> body;
    if (!bodies(std::span<const double>(x_ref.data(), n_), body)) return false;
    for (int r = 0; r < m_; ++r) {
      double c = 0.0;
      if (body[r] > up[r]) c = body[r] - up[r];
      if (body[r] < lo[r]) c = body[r] - lo[r];
      const double a = (mu - kRho * c) / (2.0 * kRho);
      const double nn = a + std::sqrt(a * a + mu * c / (2.0 * kRho));
      z0[n_ + m_ + r] = std::max(nn, 1e-12);
      z0[n_ + r] = std::max(c + nn, 1e-12);
    }
  }

  SolverOptions ro = opt_;
  ro.max_iter = opt_.max_iter - iter;
  ro.record_log = false;
  ro.mu_init = std::max(mu, std::min(theta_start, 1e3));
  if (ro.max_iter <= 0) return false;

  Vec x_found;
  ModelValues mv_found;
  Vec s_found;
  InteriorPoint inner(rp, ro, true);
  inner.stop_ = [&](const Vec& z) {
    const Vec x = z.head(n_);
    ModelValues trial;
    if (!eval_point(x, trial)) return false;
    const Vec s = interior_slacks(trial.d);
    if (bound_violation(trial) > opt_.resto_reduction * theta_start) return false;
    const double th = theta(trial, s);
    if (!filter_acceptable(th, barrier(x, s, trial.f, mu))) return false;
    x_found = x;
    s_found = s;
    mv_found = std::move(trial);
    return true;
  };
  const SolveResult r = inner.run(z0);
  iter += r.iterations;
  if (opt_.record_log) {
    IterationRecord rec;
    rec.iter = iter;
    rec.objective = mv.f / obj_scale_;
    rec.inf_pr = unscaled_violation(mv_found.c.size() ? mv_found : mv);
    rec.mu = mu;
    rec.regularization = zeta;
    rec.ls_trials = r.iterations;
    rec.step_type = 'r';
    res.log.push_back(rec);
  }
  if (x_found.size() == 0) return false;
  if (!eval_derivatives(x_found, mv_found)) return false;
  it.x = x_found;
  it.s = s_found;
  mv = std::move(mv_found);
  // Bound multipliers restart on the central path.
  Vec sl, su;
  slacks(it.x, it.s, sl, su);
  for (int k = 0; k < sl.size(); ++k) it.zl[k] = std::min(1e3, mu / sl[k]);
  for (int k = 0; k < su.size(); ++k) it.zu[k] = std::min(1e3, mu / su[k]);
  safeguard_bound_multipliers(it, mu);
  return true;
}

SolveResult InteriorPoint::run(std::span<const double> x0) {
  SolveResult res;
  if (static_cast<int>(x0.size()) != n_) {
    throw std::invalid_argument("nlp: starting point has the wrong size");
  }
  Iterate it;
  it.x = Eigen::Map<const Vec>(x0.data(), n_);
  // Push the start strictly inside the variable bounds.
  for (int i = 0; i < n_; ++i) {
    const double lo = p_.var_lower[i];
    const double up = p_.var_upper[i];
    const bool hl = has_lower(lo), hu = has_upper(up);
    if (hl && hu) {
      const double push = std::min(kBoundPush * std::max(1.0, std::abs(lo)), kBoundPush * (up - lo));
      const double push_u = std::min(kBoundPush * std::max(1.0, std::abs(up)), kBoundPush * (up - lo));
      it.x[i] = std::clamp(it.x[i], lo + push, up - push_u);
    } else if (hl) {
      it.x[i] = std::max(it.x[i], lo + kBoundPush * std::max(1.0, std::abs(lo)));
    } else if (hu) {
      it.x[i] = std::min(it.x[i], up - kBoundPush * std::max(1.0, std::abs(up)));
    }
  }
  res.x.assign(it.x.data(), it.x.data() + n_);

  compute_scaling(std::span<const double>(it.x.data(), n_));
  build_bounds();
  build_kkt_pattern();

  ModelValues mv;
  if (!eval_point(it.x, mv) || !eval_derivatives(it.x, mv)) {
    res.status = SolveStatus::infeasible;
    res.message = "model evaluation failed at the starting point";
    return res;
  }
  it.s = interior_slacks(mv.d);
  it.yc = Vec::Zero(me_);
  it.yd = Vec::Zero(mi_);
  it.zl = Vec::Ones(static_cast<int>(lower_.size()));
  it.zu = Vec::Ones(static_cast<int>(upper_.size()));

  double mu = opt_.mu_init;
  const double mu_min = opt_.rel_tol / (opt_.kappa_eps + 1.0);
  const double theta0 = theta(mv, it.s);
  theta_max_ = 1e4 * std::max(1.0, theta0);
  theta_min_ = 1e-4 * std::max(1.0, theta0);
  filter_.clear();
  last_delta_w_ = 0.0;

  int iter = 0;
  bool force_mu_decrease = false;
  int tiny_steps = 0;
  Vec hess;
  auto finish = [&](SolveStatus status, std::string message) {
    res.status = status;
    res.message = std::move(message);
    res.x.assign(it.x.data(), it.x.data() + n_);
    res.objective = mv.f / obj_scale_;
    res.multipliers.assign(m_, 0.0);
    for (int r = 0; r < m_; ++r) {
      const double y = row_is_eq_[r] ? it.yc[row_slot_[r]] : it.yd[row_slot_[r]];
      res.multipliers[r] = y * con_scale_[r] / obj_scale_;
    }
    double du = 0.0, pr = 0.0, co = 0.0;
    res.kkt_error = kkt_error(it, mv, 0.0, &du, &pr, &co);
    res.primal_infeasibility = unscaled_violation(mv);
    res.dual_infeasibility = du;
    res.complementarity = co;
    res.iterations = iter;
    return res;
  };

  if (bound_violation(mv) > opt_.resto_start_violation) {
    if (!restoration(it, mv, mu, iter, res) && iter >= opt_.max_iter) {
      return finish(SolveStatus::max_iter, "iteration limit reached");
    }
  }

  while (true) {
    double du = 0.0, pr = 0.0, co = 0.0;
    const double e0 = kkt_error(it, mv, 0.0, &du, &pr, &co);
    if (e0 <= opt_.rel_tol && unscaled_violation(mv) <= opt_.constr_viol_tol) {
      return finish(SolveStatus::converged, "optimal solution found");
    }
    if (iter >= opt_.max_iter) return finish(SolveStatus::max_iter, "iteration limit reached");

    // Monotone barrier update.
    while (mu > mu_min &&
           (force_mu_decrease || kkt_error(it, mv, mu, nullptr, nullptr, nullptr) <=
                                     opt_.kappa_eps * mu)) {
      mu = std::max(mu_min, std::min(opt_.kappa_mu * mu, std::pow(mu, opt_.theta_mu)));
      filter_.clear();
      force_mu_decrease = false;
    }
    force_mu_decrease = false;

    if (!eval_hessian(it.x, it.yc, it.yd, hess)) {
      return finish(SolveStatus::numerical_failure, "Hessian evaluation failed");
    }
    Direction dir;
    double reg = 0.0;
    if (!compute_direction(it, mv, hess, mu, dir, &reg)) {
      return finish(SolveStatus::numerical_failure, "KKT system could not be regularized");
    }

    const double tau = std::max(opt_.tau_min, 1.0 - mu);
    const double alpha_max = max_step_primal(it, dir.dx, dir.ds, tau);
    const double alpha_dual = max_step_dual(it, dir, tau);
    const double th_k = theta(mv, it.s);
    const double ph_k = barrier(it.x, it.s, mv.f, mu);
    const Vec gphi = barrier_gradient(it, mv, mu);
    const double dd = gphi.head(n_).dot(dir.dx) + gphi.tail(mi_).dot(dir.ds);

    // Tiny steps: accept without a line search and tighten mu.
    double rel_step = 0.0;
    for (int i = 0; i < n_; ++i) {
      rel_step = std::max(rel_step, std::abs(dir.dx[i]) / (1.0 + std::abs(it.x[i])));
    }
    for (int k = 0; k < mi_; ++k) {
      rel_step = std::max(rel_step, std::abs(dir.ds[k]) / (1.0 + std::abs(it.s[k])));
    }
    const bool tiny = rel_step < 10.0 * kEps && th_k <= 1e-4;

    double alpha_min;
    if (dd < 0.0) {
      alpha_min = std::min(opt_.gamma_theta, opt_.gamma_phi * th_k / -dd);
      if (th_k <= theta_min_) {
        alpha_min = std::min(alpha_min, opt_.delta_switch * std::pow(th_k, opt_.s_theta) /
                                            std::pow(-dd, opt_.s_phi));
      }
    } else {
      alpha_min = opt_.gamma_theta;
    }
    alpha_min *= opt_.alpha_min_frac;

    auto acceptable = [&](double th_t, double ph_t, double alpha, bool* f_type) {
      if (!(th_t <= theta_max_) || !std::isfinite(ph_t)) return false;
      if (!filter_acceptable(th_t, ph_t)) return false;
      const bool switching = dd < 0.0 && alpha * std::pow(-dd, opt_.s_phi) >
                                              opt_.delta_switch * std::pow(th_k, opt_.s_theta);
      if (th_k <= theta_min_ && switching) {
        *f_type = true;
        return ph_t <= ph_k + opt_.eta_phi * alpha * dd;
      }
      *f_type = false;
      return th_t <= (1.0 - opt_.gamma_theta) * th_k || ph_t <= ph_k - opt_.gamma_phi * th_k;
    };

    bool accepted = false;
    bool f_type = false;
    double alpha = alpha_max;
    double alpha_y = alpha_max;
    int trials = 0;
    ModelValues trial;
    Vec xt, st;
    char step_type = ' ';
    if (tiny) {
      xt = it.x + alpha_max * dir.dx;
      st = it.s + alpha_max * dir.ds;
      if (eval_point(xt, trial)) {
        accepted = true;
        f_type = true;
        step_type = 't';
        force_mu_decrease = true;
        ++tiny_steps;
      }
    }
    while (!accepted) {
      ++trials;
      xt = it.x + alpha * dir.dx;
      st = it.s + alpha * dir.ds;
      if (eval_point(xt, trial)) {
        const double th_t = theta(trial, st);
        const double ph_t = barrier(xt, st, trial.f, mu);
        if (acceptable(th_t, ph_t, alpha, &f_type)) {
          accepted = true;
          alpha_y = alpha;
          break;
        }
        // Second-order correction on the first trial.
        if (trials == 1 && th_t >= th_k && opt_.max_soc > 0) {
          Vec c_soc = alpha * mv.c + trial.c;
          Vec d_soc = alpha * (mv.d - it.s) + (trial.d - st);
          double th_old = th_t;
          const Vec rx = gphi.head(n_) + jac_transpose_times(mv.jac, it.yc, it.yd);
          const Vec rs = gphi.tail(mi_) - it.yd;
          for (int k = 0; k < opt_.max_soc; ++k) {
            Vec dx, ds, dyc, dyd;
            solve_reduced(mv.jac, rx, rs, c_soc, d_soc, dx, ds, dyc, dyd);
            if (!dx.allFinite()) break;
            const double a_soc = max_step_primal(it, dx, ds, tau);
            Vec xs = it.x + a_soc * dx;
            Vec ss = it.s + a_soc * ds;
            ModelValues soc_mv;
            if (!eval_point(xs, soc_mv)) break;
            const double th_s = theta(soc_mv, ss);
            const double ph_s = barrier(xs, ss, soc_mv.f, mu);
            if (acceptable(th_s, ph_s, alpha, &f_type)) {
              accepted = true;
              xt = std::move(xs);
              st = std::move(ss);
              trial = std::move(soc_mv);
              alpha_y = a_soc;
              step_type = 's';
              break;
            }
            if (th_s > opt_.kappa_soc * th_old) break;
            th_old = th_s;
            c_soc = a_soc * c_soc + soc_mv.c;
            d_soc = a_soc * d_soc + (soc_mv.d - ss);
          }
          if (accepted) break;
        }
      }
      alpha *= 0.5;
      if (alpha < alpha_min || trials > 60) break;
    }

    if (!accepted) {
      if (th_k <= opt_.constr_viol_tol * 1e-2) {
        return finish(SolveStatus::numerical_failure, "line search failed near a feasible point");
      }
      add_to_filter(th_k, ph_k);
      if (!restoration(it, mv, mu, iter, res)) {
        if (iter >= opt_.max_iter) return finish(SolveStatus::max_iter, "iteration limit reached");
        const bool stuck_infeasible = theta(mv, it.s) > std::sqrt(opt_.constr_viol_tol);
        return finish(stuck_infeasible ? SolveStatus::infeasible : SolveStatus::numerical_failure,
                      "restoration phase failed");
      }
      it.yc.setZero();
      it.yd.setZero();
      continue;
    }

    if (!f_type) {
      add_to_filter((1.0 - opt_.gamma_theta) * th_k, ph_k - opt_.gamma_phi * th_k);
    }
    ModelValues next = std::move(trial);
    if (!eval_derivatives(xt, next)) {
      return finish(SolveStatus::numerical_failure, "derivative evaluation failed");
    }
    it.x = std::move(xt);
    it.s = std::move(st);
    it.yc += alpha_y * dir.dyc;
    it.yd += alpha_y * dir.dyd;
    it.zl += alpha_dual * dir.dzl;
    it.zu += alpha_dual * dir.dzu;
    safeguard_bound_multipliers(it, mu);
    mv = std::move(next);
    ++iter;

    if (opt_.record_log) {
      IterationRecord rec;
      rec.iter = iter;
      rec.objective = mv.f / obj_scale_;
      double du2 = 0.0, pr2 = 0.0;
      kkt_error(it, mv, mu, &du2, &pr2, nullptr);
      rec.inf_pr = unscaled_violation(mv);
      rec.inf_du = du2;
      rec.mu = mu;
      rec.alpha = step_type == 's' ? alpha_y : alpha;
      rec.regularization = reg;
      rec.ls_trials = trials;
      rec.step_type = step_type == ' ' ? (f_type ? 'f' : 'h') : step_type;
      res.log.push_back(rec);
    }
    if (stop_ && stop_(it.x)) return finish(SolveStatus::converged, "stopped by caller");
    if (tiny_steps > 5 && mu <= mu_min) {
      return finish(SolveStatus::numerical_failure, "search direction is too small");
    }
  }
}

}  // namespace

SolveResult solve(const NlpProblem& problem, std::span<const double> x0,
                  const SolverOptions& options) {
  InteriorPoint ip(problem, options);
  return ip.run(x0);
}

std::string format_log(const SolveResult& result) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%4s %15s %10s %10s %9s %9s %8s %3s\n", "iter", "objective",
                "inf_pr", "inf_du", "mu", "alpha", "reg", "ls");
  out << line;
  for (const auto& r : result.log) {
    std::snprintf(line, sizeof line, "%4d%c %14.7e %10.3e %10.3e %9.2e %9.2e %8.1e %3d\n", r.iter,
                  r.step_type, r.objective, r.inf_pr, r.inf_du, r.mu, r.alpha, r.regularization,
                  r.ls_trials);
    out << line;
  }
  out << "status: " << to_string(result.status) << " (" << result.message << ")\n";
  return out.str();
}

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Dense symmetric Hessian from lower-triangle values.
Eigen::MatrixXd dense_hessian(const NlpProblem& p, std::span<const double> values) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p.n_vars, p.n_vars);
  for (std::size_t k = 0; k < p.hessian_structure.size(); ++k) {
    const auto& e = p.hessian_structure[k];
    h(e.row, e.col) += values[k];
    if (e.row != e.col) h(e.col, e.row) += values[k];
  }
  return h;
}

}  // namespace

DerivativeReport check_derivatives(const NlpProblem& p, std::span<const double> x,
                                   std::uint64_t seed, double rel_step) {
  DerivativeReport rep;
  const int n = p.n_vars;
  const int m = p.n_cons;
  const std::size_t nnz_j = p.jacobian_structure.size();
  const std::size_t nnz_h = p.hessian_structure.size();
  std::vector<double> xv(x.begin(), x.end());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> y(m);
  for (double& a : y) a = unif(rng);

  std::vector<double> grad(n), jac(nnz_j), g(m);
  if (!p.gradient(x, grad) || (m > 0 && !p.jacobian(x, jac))) {
    rep.evaluation_failed = true;
    return rep;
  }
  Eigen::MatrixXd jac_dense = Eigen::MatrixXd::Zero(m, n);
  for (std::size_t e = 0; e < nnz_j; ++e) {
    jac_dense(p.jacobian_structure[e].row, p.jacobian_structure[e].col) += jac[e];
  }
  std::vector<double> h_obj(nnz_h), h_con(nnz_h), zero_y(m, 0.0);
  if (!p.hessian(x, 1.0, zero_y, h_obj) || !p.hessian(x, 0.0, y, h_con)) {
    rep.evaluation_failed = true;
    return rep;
  }
  const Eigen::MatrixXd hess_obj = dense_hessian(p, h_obj);
  const Eigen::MatrixXd hess_con = dense_hessian(p, h_con);

  // Gradient of f and of y^T g at a point.
  auto first_order = [&](const std::vector<double>& at, Eigen::VectorXd& gf, Eigen::VectorXd& gy,
                         Eigen::VectorXd& cons, double& f) {
    std::vector<double> gv(n), jv(nnz_j), cv(m);
    if (!p.objective(at, f) || !p.gradient(at, gv)) return false;
    if (m > 0 && (!p.constraints(at, cv) || !p.jacobian(at, jv))) return false;
    gf = Eigen::Map<Eigen::VectorXd>(gv.data(), n);
    gy = Eigen::VectorXd::Zero(n);
    for (std::size_t e = 0; e < nnz_j; ++e) {
      gy[p.jacobian_structure[e].col] += y[p.jacobian_structure[e].row] * jv[e];
    }
    cons = Eigen::Map<Eigen::VectorXd>(cv.data(), m);
    return true;
  };

  for (int i = 0; i < n; ++i) {
    const double h = rel_step * std::max(1.0, std::abs(xv[i]));
    std::vector<double> xp = xv, xm = xv;
    xp[i] += h;
    xm[i] -= h;
    Eigen::VectorXd gfp, gyp, cp, gfm, gym, cm;
    double fp = 0.0, fm = 0.0;
    if (!first_order(xp, gfp, gyp, cp, fp) || !first_order(xm, gfm, gym, cm, fm)) {
      rep.evaluation_failed = true;
      return rep;
    }
    rep.gradient = std::max(rep.gradient, rel_err(grad[i], (fp - fm) / (2.0 * h)));
    const Eigen::VectorXd dc = (cp - cm) / (2.0 * h);
    for (int r = 0; r < m; ++r) rep.jacobian = std::max(rep.jacobian, rel_err(jac_dense(r, i), dc[r]));
    const Eigen::VectorXd dgf = (gfp - gfm) / (2.0 * h);
    const Eigen::VectorXd dgy = (gyp - gym) / (2.0 * h);
    for (int r = 0; r < n; ++r) {
      rep.objective_hessian = std::max(rep.objective_hessian, rel_err(hess_obj(r, i), dgf[r]));
      rep.constraint_hessian = std::max(rep.constraint_hessian, rel_err(hess_con(r, i), dgy[r]));
    }
  }

  // Lagrangian Hessian-vector product along a random direction.
  Eigen::VectorXd dir(n);
  for (int i = 0; i < n; ++i) dir[i] = unif(rng);
  double xnorm = 0.0;
  for (double a : xv) xnorm = std::max(xnorm, std::abs(a));
  const double h = rel_step * std::max(1.0, xnorm);
  std::vector<double> xp = xv, xm = xv;
  for (int i = 0; i < n; ++i) {
    xp[i] += h * dir[i];
    xm[i] -= h * dir[i];
  }
  Eigen::VectorXd gfp, gyp, cp, gfm, gym, cm;
  double fp = 0.0, fm = 0.0;
  if (!first_order(xp, gfp, gyp, cp, fp) || !first_order(xm, gfm, gym, cm, fm)) {
    rep.evaluation_failed = true;
    return rep;
  }
  const Eigen::VectorXd fd = ((gfp + gyp) - (gfm + gym)) / (2.0 * h);
  const Eigen::VectorXd hv = (hess_obj + hess_con) * dir;
  rep.hessian_vector = (hv - fd).lpNorm<Eigen::Infinity>() /
                       std::max(1.0, fd.lpNorm<Eigen::Infinity>());
  return rep;
}

}  // namespace comfort::nlp
