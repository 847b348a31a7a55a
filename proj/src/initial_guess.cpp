#include "comfort/initial_guess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "comfort/errors.hpp"

namespace comfort {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * kPi;

double sinc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

// Three-segment orientation profile with first slope s.
struct CcProfile {
  double theta0, theta1, s;

  double mid() const { return theta0 + s / 3.0; }
  double last_slope() const { return -3.0 * (theta0 - theta1 + s / 3.0); }

  double value(double u) const {
    if (u < 1.0 / 3.0) return theta0 + s * u;
    if (u < 2.0 / 3.0) return mid();
    return mid() + last_slope() * (u - 2.0 / 3.0);
  }

  double slope(double u) const {
    constexpr double kKinkTol = 1e-12;
    if (std::abs(u - 1.0 / 3.0) < kKinkTol) return 0.5 * s;
    if (std::abs(u - 2.0 / 3.0) < kKinkTol) return 0.5 * last_slope();
    if (u < 1.0 / 3.0) return s;
    if (u < 2.0 / 3.0) return 0.0;
    return last_slope();
  }
};

// (int cos, int sin) of alpha + k (u - a) over a segment of length len.
void segment_integrals(double alpha, double k, double len, double& ic, double& is) {
  const double half = 0.5 * k * len;
  const double sc = len * sinc(half);
  ic += sc * std::cos(alpha + half);
  is += sc * std::sin(alpha + half);
}

double golden_section(const std::function<double(double)>& f, double a, double b, double tol) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

struct Frame {
  double angle = 0.0;
  double distance = 0.0;
};

Frame chord_frame(const ProblemSpec& spec) {
  const Vec2 d = spec.end.position - spec.start.position;
  Frame f;
  f.distance = d.norm();
  f.angle = f.distance > 0.0 ? std::atan2(d.y(), d.x()) : 0.0;
  return f;
}

// Hermite values on a uniform mesh from nodal values and slopes.
double hermite_value(const std::vector<double>& v, const std::vector<double>& dv, double u,
                     int order) {
  const int n = static_cast<int>(v.size()) - 1;
  const double h = 1.0 / n;
  const int e = std::clamp(static_cast<int>(std::floor(u * n)), 0, n - 1);
  const double x = std::clamp(u * n - e, 0.0, 1.0);
  const HermiteShape s = hermite_eval(x);
  const double c[4] = {v[e], h * dv[e], v[e + 1], h * dv[e + 1]};
  double out = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double shape = order == 0 ? s.value[k] : s.d1[k] / h;
    out += shape * c[k];
  }
  return out;
}

// Element-local Hermite coefficients at a reference point, already scaled to
// multiply (f_e, f'_e, f_{e+1}, f'_{e+1}).
struct ScaledShape {
  std::array<double, 4> value, d1, d2;
};

ScaledShape scaled_shape(double x, double h) {
  const HermiteShape s = hermite_eval(x);
  const double scale[4] = {1.0, h, 1.0, h};
  ScaledShape out;
  for (int k = 0; k < 4; ++k) {
    out.value[k] = s.value[k] * scale[k];
    out.d1[k] = s.d1[k] * scale[k] / h;
    out.d2[k] = s.d2[k] * scale[k] / (h * h);
  }
  return out;
}

// Sparse lower-triangle Hessian pattern builder.
class PatternBuilder {
 public:
  int slot(int a, int b) {
    if (a < b) std::swap(a, b);
    auto [it, inserted] = index_.emplace(std::make_pair(a, b), static_cast<int>(entries_.size()));
    if (inserted) entries_.push_back({a, b});
    return it->second;
  }
  const std::vector<nlp::SparseIndex>& entries() const { return entries_; }

 private:
  std::map<std::pair<int, int>, int> index_;
  std::vector<nlp::SparseIndex> entries_;
};

}  // namespace

const char* to_string(PathSource source) {
  return source == PathSource::cc ? "cc" : "mvc";
}

std::vector<ParityCandidate> parity_candidates(double theta0, double theta_tau) {
  const int center = static_cast<int>(std::lround((theta0 - theta_tau) / kTwoPi));
  std::vector<ParityCandidate> all;
  for (int n = center - 4; n <= center + 4; ++n) all.push_back({n, theta_tau + kTwoPi * n});
  std::sort(all.begin(), all.end(), [&](const ParityCandidate& a, const ParityCandidate& b) {
    const double da = std::abs(a.theta_end - theta0);
    const double db = std::abs(b.theta_end - theta0);
    if (std::abs(da - db) > 1e-12 * std::max(1.0, da)) return da < db;
    if (std::abs(a.parity) != std::abs(b.parity)) return std::abs(a.parity) < std::abs(b.parity);
    return a.parity > b.parity;
  });
  all.resize(3);
  return all;
}

double lambda_guess(const ProblemSpec& spec) {
  const double dl = (spec.end.position - spec.start.position).norm();
  const double r = spec.limits.turning_radius();
  if (!(dl > 0.0) && !(r > 0.0)) {
    throw DegenerateInputError("coincident end points and zero turning radius");
  }
  return std::max(r, 2.0 * dl);
}

double cc_objective(double theta0, double theta1, double slope, double target) {
  const CcProfile p{theta0, theta1, slope};
  double ic = 0.0, is = 0.0;
  const double third = 1.0 / 3.0;
  segment_integrals(theta0, slope, third, ic, is);
  segment_integrals(p.mid(), 0.0, third, ic, is);
  segment_integrals(p.mid(), p.last_slope(), third, ic, is);
  return (ic - target) * (ic - target) + is * is;
}

std::vector<PathGuess> cc_theta_guess(const ProblemSpec& spec, const ParityCandidate& parity,
                                      int n_elements) {
  if (n_elements < 1) throw InvalidMeshError("cc guess needs at least one element");
  const Frame frame = chord_frame(spec);
  const double lambda = lambda_guess(spec);
  const double target = frame.distance / lambda;
  const double th0 = spec.start.theta - frame.angle;
  const double th1 = parity.theta_end - frame.angle;
  auto cost = [&](double s) { return cc_objective(th0, th1, s, target); };

  constexpr int kHalf = 512;  // 8 pi / (pi / 64)
  const double step = kPi / 64.0;
  std::vector<double> s(2 * kHalf + 1), j(2 * kHalf + 1);
  for (int i = 0; i < static_cast<int>(s.size()); ++i) {
    s[i] = (i - kHalf) * step;
    j[i] = cost(s[i]);
  }
  const int last = static_cast<int>(s.size()) - 1;

  int peak = -1;
  for (int i = 1; i < last; ++i) {
    if (j[i] > j[i - 1] && j[i] >= j[i + 1]) {
      if (peak < 0 || std::abs(s[i]) < std::abs(s[peak])) peak = i;
    }
  }
  std::vector<int> minima;
  if (peak >= 0) {
    int a = peak;
    while (a > 0 && j[a - 1] <= j[a]) --a;
    if (a > 0) minima.push_back(a);
    int b = peak;
    while (b < last && j[b + 1] <= j[b]) ++b;
    if (b < last) minima.push_back(b);
  }
  if (minima.empty()) {
    minima.push_back(static_cast<int>(std::min_element(j.begin(), j.end()) - j.begin()));
  }

  std::vector<PathGuess> out;
  for (int i : minima) {
    const double lo = s[std::max(i - 1, 0)];
    const double hi = s[std::min(i + 1, last)];
    const double slope = golden_section(cost, lo, hi, 1e-8);
    const CcProfile prof{th0, th1, slope};
    PathGuess g;
    g.lambda = lambda;
    g.parity = parity.parity;
    g.theta_end = parity.theta_end;
    g.source = PathSource::cc;
    g.cc_slope = slope;
    g.cc_cost = cost(slope);
    g.theta.resize(n_elements + 1);
    g.dtheta.resize(n_elements + 1);
    for (int k = 0; k <= n_elements; ++k) {
      const double u = static_cast<double>(k) / n_elements;
      g.theta[k] = prof.value(u) + frame.angle;
      g.dtheta[k] = prof.slope(u);
    }
    g.theta.front() = spec.start.theta;
    g.theta.back() = parity.theta_end;
    g.dtheta.front() = lambda * spec.start.kappa;
    g.dtheta.back() = lambda * spec.end.kappa;
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

// Minimum variation curve: minimize lambda + w int theta''^2 subject to the
// end-point closure, end curvatures and the curvature bound.
struct MvcModel {
  int n = 0;
  double h = 0.0;
  double w = 0.0;
  double theta0 = 0.0;
  double theta_end = 0.0;
  double kappa0 = 0.0;
  double kappa1 = 0.0;
  double kappa_max = 0.0;
  Vec2 chord = Vec2::Zero();
  std::vector<ScaledShape> shapes;  // per Gauss point
  std::vector<double> weights;
  int n_vars = 0;
  int lambda_var = 0;

  // Variable index of nodal value / slope, -1 when fixed.
  int value_var(int i) const { return (i == 0 || i == n) ? -1 : i - 1; }
  int slope_var(int i) const { return (n - 1) + i; }

  std::array<int, 4> element_vars(int e) const {
    return {value_var(e), slope_var(e), value_var(e + 1), slope_var(e + 1)};
  }

  std::array<double, 4> element_coeffs(int e, std::span<const double> x) const {
    auto val = [&](int i) {
      if (i == 0) return theta0;
      if (i == n) return theta_end;
      return x[value_var(i)];
    };
    return {val(e), x[slope_var(e)], val(e + 1), x[slope_var(e + 1)]};
  }
};

double dot4(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}

}  // namespace

std::optional<PathGuess> mvc_path_guess(const ProblemSpec& spec, const PathGuess& seed,
                                        int n_elements, const nlp::SolverOptions& options) {
  if (static_cast<int>(seed.theta.size()) != n_elements + 1) {
    throw std::invalid_argument("mvc seed does not match the mesh");
  }
  auto m = std::make_shared<MvcModel>();
  m->n = n_elements;
  m->h = 1.0 / n_elements;
  m->w = std::max((spec.end.position - spec.start.position).norm(), spec.limits.turning_radius());
  m->theta0 = spec.start.theta;
  m->theta_end = seed.theta_end;
  m->kappa0 = spec.start.kappa;
  m->kappa1 = spec.end.kappa;
  m->kappa_max = spec.limits.kappa_max;
  m->chord = spec.end.position - spec.start.position;
  const auto& rule = cached_gauss_rule(kGaussPoints);
  for (int q = 0; q < kGaussPoints; ++q) {
    m->shapes.push_back(scaled_shape(rule.points[q], m->h));
    m->weights.push_back(m->h * rule.weights[q]);
  }
  const int n = n_elements;
  m->n_vars = (n - 1) + (n + 1) + 1;
  m->lambda_var = m->n_vars - 1;

  nlp::NlpProblem p;
  p.n_vars = m->n_vars;
  p.var_lower.assign(p.n_vars, -nlp::kInfinity);
  p.var_upper.assign(p.n_vars, nlp::kInfinity);
  const double lo = std::min(m->theta0, m->theta_end) - kTwoPi;
  const double up = std::max(m->theta0, m->theta_end) + kTwoPi;
  for (int i = 1; i < n; ++i) {
    p.var_lower[m->value_var(i)] = lo;
    p.var_upper[m->value_var(i)] = up;
  }
  p.var_lower[m->lambda_var] = 1e-3;

  // Rows: closure x, closure y, start curvature, end curvature, then two
  // curvature bounds per Gauss point.
  PatternBuilder hess;
  std::vector<nlp::SparseIndex> jac;
  const int lam = m->lambda_var;
  for (int e = 0; e < n; ++e) {
    const auto vars = m->element_vars(e);
    for (int a = 0; a < 4; ++a) {
      if (vars[a] < 0) continue;
      for (int b = 0; b < 4; ++b) {
        if (vars[b] >= 0) hess.slot(vars[a], vars[b]);
      }
      hess.slot(vars[a], lam);
    }
  }
  for (int r = 0; r < 2; ++r) {
    for (int v = 0; v < p.n_vars; ++v) jac.push_back({r, v});
  }
  jac.push_back({2, m->slope_var(0)});
  jac.push_back({2, lam});
  jac.push_back({3, m->slope_var(n)});
  jac.push_back({3, lam});
  int row = 4;
  for (int e = 0; e < n; ++e) {
    const auto vars = m->element_vars(e);
    for (int q = 0; q < kGaussPoints; ++q) {
      for (int side = 0; side < 2; ++side) {
        for (int a = 0; a < 4; ++a) {
          if (vars[a] >= 0) jac.push_back({row, vars[a]});
        }
        jac.push_back({row, lam});
        p.con_lower.push_back(side == 0 ? 0.0 : -nlp::kInfinity);
        p.con_upper.push_back(side == 0 ? nlp::kInfinity : 0.0);
        ++row;
      }
    }
  }
  p.con_lower.insert(p.con_lower.begin(), {m->chord.x(), m->chord.y(), 0.0, 0.0});
  p.con_upper.insert(p.con_upper.begin(), {m->chord.x(), m->chord.y(), 0.0, 0.0});
  p.n_cons = row;
  p.jacobian_structure = jac;
  p.hessian_structure = hess.entries();

  p.objective = [m](std::span<const double> x, double& f) {
    f = x[m->lambda_var];
    for (int e = 0; e < m->n; ++e) {
      const auto c = m->element_coeffs(e, x);
      for (int q = 0; q < kGaussPoints; ++q) {
        const double t2 = dot4(m->shapes[q].d2, c);
        f += m->w * m->weights[q] * t2 * t2;
      }
    }
    return true;
  };
  p.gradient = [m](std::span<const double> x, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    g[m->lambda_var] = 1.0;
    for (int e = 0; e < m->n; ++e) {
      const auto c = m->element_coeffs(e, x);
      const auto vars = m->element_vars(e);
      for (int q = 0; q < kGaussPoints; ++q) {
        const double t2 = dot4(m->shapes[q].d2, c);
        for (int a = 0; a < 4; ++a) {
          if (vars[a] >= 0) g[vars[a]] += 2.0 * m->w * m->weights[q] * t2 * m->shapes[q].d2[a];
        }
      }
    }
    return true;
  };
  p.constraints = [m](std::span<const double> x, std::span<double> g) {
    const double lambda = x[m->lambda_var];
    double ic = 0.0, is = 0.0;
    int row = 4;
    for (int e = 0; e < m->n; ++e) {
      const auto c = m->element_coeffs(e, x);
      for (int q = 0; q < kGaussPoints; ++q) {
        const double th = dot4(m->shapes[q].value, c);
        ic += m->weights[q] * std::cos(th);
        is += m->weights[q] * std::sin(th);
        const double t1 = dot4(m->shapes[q].d1, c);
        g[row++] = t1 + lambda * m->kappa_max;
        g[row++] = t1 - lambda * m->kappa_max;
      }
    }
    g[0] = lambda * ic;
    g[1] = lambda * is;
    g[2] = x[m->slope_var(0)] - lambda * m->kappa0;
    g[3] = x[m->slope_var(m->n)] - lambda * m->kappa1;
    return true;
  };
  p.jacobian = [m](std::span<const double> x, std::span<double> values) {
    const double lambda = x[m->lambda_var];
    const int nv = m->n_vars;
    std::fill(values.begin(), values.begin() + 2 * nv, 0.0);
    double ic = 0.0, is = 0.0;
    std::size_t k = 2 * nv + 4;
    for (int e = 0; e < m->n; ++e) {
      const auto c = m->element_coeffs(e, x);
      const auto vars = m->element_vars(e);
      for (int q = 0; q < kGaussPoints; ++q) {
        const auto& sh = m->shapes[q];
        const double th = dot4(sh.value, c);
        const double cs = std::cos(th), sn = std::sin(th);
        ic += m->weights[q] * cs;
        is += m->weights[q] * sn;
        for (int a = 0; a < 4; ++a) {
          if (vars[a] < 0) continue;
          values[vars[a]] += -lambda * m->weights[q] * sn * sh.value[a];
          values[nv + vars[a]] += lambda * m->weights[q] * cs * sh.value[a];
        }
        for (int side = 0; side < 2; ++side) {
          for (int a = 0; a < 4; ++a) {
            if (vars[a] >= 0) values[k++] = sh.d1[a];
          }
          values[k++] = side == 0 ? m->kappa_max : -m->kappa_max;
        }
      }
    }
    values[m->lambda_var] = ic;
    values[nv + m->lambda_var] = is;
    values[2 * nv + 0] = 1.0;
    values[2 * nv + 1] = -m->kappa0;
    values[2 * nv + 2] = 1.0;
    values[2 * nv + 3] = -m->kappa1;
    return true;
  };
  const std::vector<nlp::SparseIndex> hess_entries = hess.entries();
  auto slot_of = std::make_shared<std::map<std::pair<int, int>, int>>();
  for (int s = 0; s < static_cast<int>(hess_entries.size()); ++s) {
    (*slot_of)[{hess_entries[s].row, hess_entries[s].col}] = s;
  }
  p.hessian = [m, slot_of](std::span<const double> x, double obj_factor,
                           std::span<const double> y, std::span<double> values) {
    std::fill(values.begin(), values.end(), 0.0);
    const double lambda = x[m->lambda_var];
    auto add = [&](int a, int b, double v) {
      if (a < b) std::swap(a, b);
      values[slot_of->at({a, b})] += v;
    };
    for (int e = 0; e < m->n; ++e) {
      const auto c = m->element_coeffs(e, x);
      const auto vars = m->element_vars(e);
      for (int q = 0; q < kGaussPoints; ++q) {
        const auto& sh = m->shapes[q];
        const double wq = m->weights[q];
        const double th = dot4(sh.value, c);
        const double cs = std::cos(th), sn = std::sin(th);
        // Second derivative of y0 * lambda cos + y1 * lambda sin in theta.
        const double d2 = -lambda * wq * (y[0] * cs + y[1] * sn);
        const double dl = wq * (-y[0] * sn + y[1] * cs);
        for (int a = 0; a < 4; ++a) {
          if (vars[a] < 0) continue;
          for (int b = 0; b <= 3; ++b) {
            if (vars[b] < 0 || vars[b] > vars[a]) continue;
            const double obj = 2.0 * m->w * wq * sh.d2[a] * sh.d2[b];
            add(vars[a], vars[b], obj_factor * obj + d2 * sh.value[a] * sh.value[b]);
          }
          add(vars[a], m->lambda_var, dl * sh.value[a]);
        }
      }
    }
    return true;
  };

  std::vector<double> x0(p.n_vars);
  for (int i = 1; i < n; ++i) x0[m->value_var(i)] = seed.theta[i];
  for (int i = 0; i <= n; ++i) x0[m->slope_var(i)] = seed.dtheta[i];
  x0[lam] = seed.lambda;

  const nlp::SolveResult res = nlp::solve(p, x0, options);
  if (!res.converged()) return std::nullopt;

  PathGuess g = seed;
  g.source = PathSource::mvc;
  g.lambda = res.x[lam];
  for (int i = 1; i < n; ++i) g.theta[i] = res.x[m->value_var(i)];
  for (int i = 0; i <= n; ++i) g.dtheta[i] = res.x[m->slope_var(i)];
  g.theta.front() = spec.start.theta;
  g.theta.back() = seed.theta_end;
  return g;
}

double SpeedGuess::value(double u) const {
  double v = 0.0;
  if (!smooth_v.empty()) v += hermite_value(smooth_v, smooth_dv, u, 0);
  switch (kind) {
    case Kind::regular: break;
    case Kind::both_zero:
      v += coefficient * v_max * std::pow(u, left_exponent) * std::pow(1.0 - u, right_exponent);
      break;
    case Kind::right_zero:
      v += coefficient * v_max * u * u * std::pow(1.0 - u, right_exponent);
      break;
    case Kind::left_zero:
      v += coefficient * v_max * (1.0 - u) * (1.0 - u) * std::pow(u, left_exponent);
      break;
  }
  return v;
}

double SpeedGuess::slope(double u) const {
  double d = 0.0;
  if (!smooth_v.empty()) d += hermite_value(smooth_v, smooth_dv, u, 1);
  const double a = u, b = 1.0 - u;
  switch (kind) {
    case Kind::regular: break;
    case Kind::both_zero: {
      const double p = left_exponent, q = right_exponent;
      d += coefficient * v_max *
           (p * std::pow(a, p - 1.0) * std::pow(b, q) - q * std::pow(a, p) * std::pow(b, q - 1.0));
      break;
    }
    case Kind::right_zero: {
      const double q = right_exponent;
      d += coefficient * v_max * (2.0 * a * std::pow(b, q) - q * a * a * std::pow(b, q - 1.0));
      break;
    }
    case Kind::left_zero: {
      const double p = left_exponent;
      d += coefficient * v_max * (-2.0 * b * std::pow(a, p) + p * b * b * std::pow(a, p - 1.0));
      break;
    }
  }
  return d;
}

namespace {

// Smooth Hermite part by minimizing int v''^2 under pointwise bounds on the
// total speed (and optionally its slope). Nodal values/slopes flagged fixed
// keep the given data.
struct SmoothProblem {
  int n = 0;
  std::vector<double> value, slope;          // data for fixed entries
  std::vector<char> value_fixed, slope_fixed;
  std::function<double(double)> singular;    // added to the smooth part
  double v_lo = 0.0, v_hi = 0.0;
  bool slope_bounds = false;
  double a_lo = 0.0, a_hi = 0.0;
};

bool solve_smooth(const SmoothProblem& sp, double start_scale, const nlp::SolverOptions& opts,
                  std::vector<double>& v_out, std::vector<double>& dv_out) {
  const int n = sp.n;
  const double h = 1.0 / n;
  std::vector<int> value_var(n + 1, -1), slope_var(n + 1, -1);
  int nv = 0;
  for (int i = 0; i <= n; ++i) {
    if (!sp.value_fixed[i]) value_var[i] = nv++;
    if (!sp.slope_fixed[i]) slope_var[i] = nv++;
  }
  v_out = sp.value;
  dv_out = sp.slope;
  if (nv == 0) return true;

  const auto& rule = cached_gauss_rule(kGaussPoints);
  std::vector<ScaledShape> shapes;
  for (int q = 0; q < kGaussPoints; ++q) shapes.push_back(scaled_shape(rule.points[q], h));

  auto coeffs = [&](int e, std::span<const double> x) {
    auto val = [&](int i) { return value_var[i] >= 0 ? x[value_var[i]] : sp.value[i]; };
    auto slp = [&](int i) { return slope_var[i] >= 0 ? x[slope_var[i]] : sp.slope[i]; };
    return std::array<double, 4>{val(e), slp(e), val(e + 1), slp(e + 1)};
  };
  auto vars_of = [&](int e) {
    return std::array<int, 4>{value_var[e], slope_var[e], value_var[e + 1], slope_var[e + 1]};
  };

  // Bound rows start at the Gauss points; points where the dense check
  // finds a value outside the box are added and the QP solved again.
  struct RowPoint {
    double u;
    ScaledShape shape;
  };
  std::vector<std::vector<RowPoint>> cpoints(n);
  for (int e = 0; e < n; ++e) {
    for (int q = 0; q < kGaussPoints; ++q) {
      cpoints[e].push_back({(e + rule.points[q]) * h, shapes[q]});
    }
  }
  const int slope_rows = sp.slope_bounds ? 2 : 1;

  auto solve_once = [&](const std::vector<double>& x0) {
    nlp::NlpProblem p;
    p.n_vars = nv;
    p.var_lower.assign(nv, -nlp::kInfinity);
    p.var_upper.assign(nv, nlp::kInfinity);
    PatternBuilder hess;
    int row = 0;
    for (int e = 0; e < n; ++e) {
      const auto vars = vars_of(e);
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          if (vars[a] >= 0 && vars[b] >= 0) hess.slot(vars[a], vars[b]);
        }
      }
      for (const RowPoint& rp : cpoints[e]) {
        for (int kind = 0; kind < slope_rows; ++kind) {
          for (int a = 0; a < 4; ++a) {
            if (vars[a] >= 0) p.jacobian_structure.push_back({row, vars[a]});
          }
          const double sing = kind == 0 && sp.singular ? sp.singular(rp.u) : 0.0;
          p.con_lower.push_back((kind == 0 ? sp.v_lo : sp.a_lo) - sing);
          p.con_upper.push_back((kind == 0 ? sp.v_hi : sp.a_hi) - sing);
          ++row;
        }
      }
    }
    // Rows without free DOFs have an empty structure; they are constant.
    p.n_cons = row;
    p.hessian_structure = hess.entries();
    std::map<std::pair<int, int>, int> slot_of;
    for (int s = 0; s < static_cast<int>(p.hessian_structure.size()); ++s) {
      slot_of[{p.hessian_structure[s].row, p.hessian_structure[s].col}] = s;
    }

    p.objective = [&](std::span<const double> x, double& f) {
      f = 0.0;
      for (int e = 0; e < n; ++e) {
        const auto c = coeffs(e, x);
        for (int q = 0; q < kGaussPoints; ++q) {
          const double d2 = dot4(shapes[q].d2, c);
          f += h * rule.weights[q] * d2 * d2;
        }
      }
      return true;
    };
    p.gradient = [&](std::span<const double> x, std::span<double> g) {
      std::fill(g.begin(), g.end(), 0.0);
      for (int e = 0; e < n; ++e) {
        const auto c = coeffs(e, x);
        const auto vars = vars_of(e);
        for (int q = 0; q < kGaussPoints; ++q) {
          const double d2 = dot4(shapes[q].d2, c);
          for (int a = 0; a < 4; ++a) {
            if (vars[a] >= 0) g[vars[a]] += 2.0 * h * rule.weights[q] * d2 * shapes[q].d2[a];
          }
        }
      }
      return true;
    };
    p.constraints = [&](std::span<const double> x, std::span<double> g) {
      int r = 0;
      for (int e = 0; e < n; ++e) {
        const auto c = coeffs(e, x);
        for (const RowPoint& rp : cpoints[e]) {
          g[r++] = dot4(rp.shape.value, c);
          if (slope_rows == 2) g[r++] = dot4(rp.shape.d1, c);
        }
      }
      return true;
    };
    p.jacobian = [&](std::span<const double>, std::span<double> values) {
      std::size_t k = 0;
      for (int e = 0; e < n; ++e) {
        const auto vars = vars_of(e);
        for (const RowPoint& rp : cpoints[e]) {
          for (int kind = 0; kind < slope_rows; ++kind) {
            for (int a = 0; a < 4; ++a) {
              if (vars[a] >= 0) values[k++] = kind == 0 ? rp.shape.value[a] : rp.shape.d1[a];
            }
          }
        }
      }
      return true;
    };
    p.hessian = [&](std::span<const double>, double obj_factor, std::span<const double>,
                    std::span<double> values) {
      std::fill(values.begin(), values.end(), 0.0);
      for (int e = 0; e < n; ++e) {
        const auto vars = vars_of(e);
        for (int q = 0; q < kGaussPoints; ++q) {
          for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
              if (vars[a] < 0 || vars[b] < 0 || vars[b] > vars[a]) continue;
              values[slot_of.at({vars[a], vars[b]})] +=
                  obj_factor * 2.0 * h * rule.weights[q] * shapes[q].d2[a] * shapes[q].d2[b];
            }
          }
        }
      }
      return true;
    };
    return nlp::solve(p, x0, opts);
  };

  // Start: straight interpolation between the end values.
  std::vector<double> x0(nv);
  const double va = sp.value[0], vb = sp.value[n];
  const double mid_cap = 0.5 * (sp.v_lo + sp.v_hi);
  for (int i = 0; i <= n; ++i) {
    const double u = static_cast<double>(i) / n;
    double val = (1.0 - u) * va + u * vb;
    if (sp.singular) val = std::min(val, mid_cap - sp.singular(u));
    if (value_var[i] >= 0) x0[value_var[i]] = start_scale * val;
    if (slope_var[i] >= 0) x0[slope_var[i]] = start_scale * (vb - va);
  }

  constexpr int kRefineRounds = 6;
  constexpr int kCheckPoints = 64;
  nlp::SolveResult res;
  for (int round = 0; round < kRefineRounds; ++round) {
    nlp::SolveResult r = solve_once(x0);
    // A failed refinement keeps the previous converged solution.
    if (round == 0 || r.converged()) res = std::move(r);
    if (!res.converged() || (round > 0 && !r.converged())) break;
    bool added = false;
    for (int e = 0; e < n; ++e) {
      const auto c = coeffs(e, res.x);
      double worst = 1e-10 * std::max(1.0, std::abs(sp.v_hi)), worst_x = -1.0;
      for (int k = 0; k <= kCheckPoints; ++k) {
        const double x = static_cast<double>(k) / kCheckPoints;
        const double u = (e + x) * h;
        const double v = dot4(scaled_shape(x, h).value, c) + (sp.singular ? sp.singular(u) : 0.0);
        const double excess = std::max(v - sp.v_hi, sp.v_lo - v);
        if (excess > worst) {
          worst = excess;
          worst_x = x;
        }
      }
      if (worst_x < 0.0) continue;
      // Polish the location of the worst excess on the check grid cell.
      const double step = 1.0 / kCheckPoints;
      const double x_best = golden_section(
          [&](double x) {
            const double u = (e + x) * h;
            const double v = dot4(scaled_shape(x, h).value, c) + (sp.singular ? sp.singular(u) : 0.0);
            return -std::max(v - sp.v_hi, sp.v_lo - v);
          },
          std::max(0.0, worst_x - step), std::min(1.0, worst_x + step), 1e-10);
      cpoints[e].push_back({(e + x_best) * h, scaled_shape(x_best, h)});
      added = true;
    }
    if (!added) break;
    x0 = res.x;
  }
  for (int i = 0; i <= n; ++i) {
    if (value_var[i] >= 0) v_out[i] = res.x[value_var[i]];
    if (slope_var[i] >= 0) dv_out[i] = res.x[slope_var[i]];
  }
  return res.converged();
}

}  // namespace

SpeedGuess speed_guess(const ProblemSpec& spec, double lambda, int n_elements,
                       const SpeedGuessOptions& options) {
  const auto& lim = spec.limits;
  const double v0 = spec.start.v, v1 = spec.end.v;
  if (v0 > lim.v_max || v1 > lim.v_max) {
    throw InvalidSpecError("boundary speed exceeds limits.v_max");
  }
  if (!(lambda > 0.0)) throw DomainError("speed guess needs a positive path length");
  if (n_elements < 1) throw InvalidMeshError("speed guess needs at least one element");

  SpeedGuess g;
  g.n_elements = n_elements;
  g.v_max = lim.v_max;
  g.left_exponent = singular_exponent(spec.start);
  g.right_exponent = singular_exponent(spec.end);
  const int n = n_elements;

  SmoothProblem sp;
  sp.n = n;
  sp.value.assign(n + 1, 0.0);
  sp.slope.assign(n + 1, 0.0);
  sp.value_fixed.assign(n + 1, 0);
  sp.slope_fixed.assign(n + 1, 0);
  sp.value_fixed[0] = sp.value_fixed[n] = 1;

  if (v0 > 0.0 && v1 > 0.0) {
    g.kind = SpeedGuess::Kind::regular;
    sp.value[0] = v0;
    sp.value[n] = v1;
    sp.slope[0] = spec.start.a_T * lambda / v0;
    sp.slope[n] = spec.end.a_T * lambda / v1;
    sp.slope_fixed[0] = sp.slope_fixed[n] = 1;
    const double vmin = std::min(v0, v1);
    sp.v_lo = vmin / 2.0;
    sp.v_hi = lim.v_max;
    sp.slope_bounds = true;
    sp.a_lo = 10.0 * lim.a_T.min * lambda / vmin;
    sp.a_hi = 10.0 * lim.a_T.max * lambda / vmin;
  } else if (v0 == 0.0 && v1 == 0.0) {
    g.kind = SpeedGuess::Kind::both_zero;
    const double p = g.left_exponent, q = g.right_exponent;
    const double us = p / (p + q);
    g.coefficient = 1.0 / (std::pow(us, p) * std::pow(1.0 - us, q));
    return g;
  } else {
    const bool right = v1 == 0.0;
    g.kind = right ? SpeedGuess::Kind::right_zero : SpeedGuess::Kind::left_zero;
    // Singular part u^2 (1-u)^q peaks at u = 2 / (2 + q) with value v_max / 2.
    const double q = right ? g.right_exponent : g.left_exponent;
    const double us = 2.0 / (2.0 + q);
    g.coefficient = 1.0 / (2.0 * us * us * std::pow(1.0 - us, q));
    const double coef = g.coefficient * lim.v_max;
    if (right) {
      sp.singular = [coef, q](double u) { return coef * u * u * std::pow(1.0 - u, q); };
      sp.value[0] = v0;
      sp.slope[0] = spec.start.a_T * lambda / v0;
      sp.slope_fixed[0] = 1;
    } else {
      sp.singular = [coef, q](double u) {
        return coef * (1.0 - u) * (1.0 - u) * std::pow(u, q);
      };
      sp.value[n] = v1;
      sp.slope[n] = spec.end.a_T * lambda / v1;
      sp.slope_fixed[n] = 1;
    }
    sp.v_lo = 0.0;
    sp.v_hi = lim.v_max;
  }
  g.optimized = solve_smooth(sp, options.start_scale, options.solver, g.smooth_v, g.smooth_dv);
  return g;
}

DofVector assemble_guess(const ProblemSpec& spec, std::shared_ptr<const DofLayout> layout,
                         const PathGuess& path, const SpeedGuess& speed) {
  const int n = layout->n_elements();
  if (static_cast<int>(path.theta.size()) != n + 1 || speed.n_elements != n) {
    throw std::invalid_argument("guess does not match the layout mesh");
  }
  DofVector d(layout);
  apply_boundary_data(d, spec, path.theta_end);
  const auto& lay = *layout;
  const double lambda = path.lambda;
  d[lay.lambda()] = lambda;
  for (int i = 0; i <= n; ++i) {
    if (i > 0 && i < n) d[lay.theta(i)] = path.theta[i];
    d[lay.dtheta(i)] = path.dtheta[i];
  }
  d[lay.dtheta(0)] = lambda * spec.start.kappa;
  d[lay.dtheta(n)] = lambda * spec.end.kappa;

  const double v_floor = 1e-3 * spec.limits.v_max;
  for (int i = 1; i < n; ++i) {
    const double u = lay.mesh().node_coords[i];
    d[lay.v(i)] = std::max(speed.value(u), v_floor);
    d[lay.dv(i)] = speed.slope(u);
  }
  if (spec.start.v > 0.0) d[lay.dv(0)] = spec.start.a_T * lambda / spec.start.v;
  if (spec.end.v > 0.0) d[lay.dv(n)] = spec.end.a_T * lambda / spec.end.v;

  // Flatten slopes where the interpolant dips to non-positive speed.
  for (int pass = 0; pass < 2; ++pass) {
    for (int e = 0; e < n; ++e) {
      bool bad = false;
      for (int q = 0; q < kGaussPoints; ++q) bad |= !(d.apply(lay.v_gauss(e, q), 0) > v_floor * 1e-3);
      if (!bad) continue;
      for (int node : {e, e + 1}) {
        if (lay.role(lay.dv(node)) == DofRole::free) d[lay.dv(node)] = 0.0;
      }
    }
  }

  // Positions by integrating the orientation segment by segment.
  Vec2 r = spec.start.position;
  for (int j = 1; j + 1 < lay.n_points(); ++j) {
    r += position_integral(d, lay.point_u(j - 1), lay.point_u(j));
    d[lay.px(j)] = r.x();
    d[lay.py(j)] = r.y();
  }
  return d;
}

std::vector<Guess> build_guesses(const ProblemSpec& spec, int n_elements, int max_guesses) {
  max_guesses = std::clamp(max_guesses, 1, 4);
  const auto parities = parity_candidates(spec.start.theta, spec.end.theta);
  std::vector<PathGuess> seeds = cc_theta_guess(spec, parities[0], n_elements);
  for (int k = 1; k < 3; ++k) {
    auto cands = cc_theta_guess(spec, parities[k], n_elements);
    if (cands.empty()) continue;
    seeds.push_back(*std::min_element(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
      return a.cc_cost < b.cc_cost;
    }));
  }
  if (static_cast<int>(seeds.size()) > max_guesses) seeds.resize(max_guesses);

  const auto layout = dof_layout(spec, n_elements);
  std::vector<Guess> out;
  for (const PathGuess& seed : seeds) {
    PathGuess path = seed;
    if (auto refined = mvc_path_guess(spec, seed, n_elements)) path = std::move(*refined);
    SpeedGuess speed = speed_guess(spec, path.lambda, n_elements);
    DofVector dofs = assemble_guess(spec, layout, path, speed);
    out.push_back({std::move(path), std::move(speed), std::move(dofs)});
  }
  return out;
}

}  // namespace comfort
