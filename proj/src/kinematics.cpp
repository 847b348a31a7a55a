#include "comfort/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "comfort/errors.hpp"

namespace comfort {

namespace {

void check_range(const Range& r, const char* name) {
  if (!(r.min <= r.max)) throw InvalidSpecError(std::string("limits.") + name + ": min > max");
}

void check_end(const BoundaryState& s, const char* name, double v_max) {
  if (!(s.v >= 0.0)) throw InvalidSpecError(std::string(name) + ".v must be non-negative");
  if (s.v > v_max) throw InvalidSpecError(std::string(name) + ".v exceeds limits.v_max");
  if (!std::isfinite(s.theta) || !std::isfinite(s.kappa) || !std::isfinite(s.a_T) ||
      !s.position.allFinite()) {
    throw InvalidSpecError(std::string(name) + " has non-finite values");
  }
}

}  // namespace

void ProblemSpec::validate() const {
  if (!(limits.v_max > 0.0)) throw InvalidSpecError("limits.v_max must be positive");
  if (!(limits.kappa_max > 0.0)) throw InvalidSpecError("limits.kappa_max must be positive");
  check_range(limits.a_T, "a_T");
  check_range(limits.a_N, "a_N");
  check_range(limits.omega, "omega");
  if (!(weights.w_T > 0.0)) throw InvalidSpecError("weights.w_T must be positive");
  if (!(weights.w_N > 0.0)) throw InvalidSpecError("weights.w_N must be positive");
  check_end(start, "start", limits.v_max);
  check_end(end, "end", limits.v_max);
  // Starting from rest needs a_T >= 0; stopping needs a_T <= 0.
  if (start.v == 0.0 && start.a_T < 0.0) {
    throw InvalidSpecError("start: negative tangential acceleration at zero speed");
  }
  if (end.v == 0.0 && end.a_T > 0.0) {
    throw InvalidSpecError("end: positive tangential acceleration at zero speed");
  }
  const bool singular = start.v == 0.0 || end.v == 0.0;
  if (n_elements < (singular ? 2 : 1)) throw InvalidSpecError("mesh.n too small");
  if (points_per_element < 0) throw InvalidSpecError("mesh.M must be non-negative");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const auto& obs = obstacles.obstacles[i];
    for (const auto* s : {&start, &end}) {
      const bool at_center = (s->position - obs.center()).norm() == 0.0;
      if (at_center || obs.clearance(s->position).value < 0.0) {
        throw InvalidSpecError((s == &start ? std::string("start") : std::string("end")) +
                               " position lies inside obstacle " + std::to_string(i));
      }
    }
  }
}

double singular_exponent(const BoundaryState& state) {
  return state.a_T == 0.0 ? kExponentZeroAccel : kExponentNonzeroAccel;
}

Mesh mesh_for(const ProblemSpec& spec, int n_elements) {
  return build_mesh(n_elements, spec.start.v == 0.0, spec.end.v == 0.0,
                    singular_exponent(spec.start), singular_exponent(spec.end));
}

DofLayout::DofLayout(Mesh mesh, int points_per_element)
    : mesh_(std::move(mesh)), points_per_element_(points_per_element) {
  if (mesh_.n_elements < 1) throw InvalidMeshError("layout needs a non-empty mesh");
  if (points_per_element_ < 0) throw InvalidMeshError("points per element must be >= 0");
  n_points_ = mesh_.n_elements * points_per_element_ + mesh_.n_elements + 1;
  roles_.assign(raw_size(), DofRole::free);
  // The singular element carries no slope unknown at its boundary node.
  if (mesh_.left_singular) roles_[dv(0)] = DofRole::eliminated;
  if (mesh_.right_singular) roles_[dv(n_nodes() - 1)] = DofRole::eliminated;
  rebuild_free_map();

  const auto& rule = cached_gauss_rule(kGaussPoints);
  v_gauss_.reserve(mesh_.n_elements * kGaussPoints);
  theta_gauss_.reserve(mesh_.n_elements * kGaussPoints);
  for (int e = 0; e < mesh_.n_elements; ++e) {
    for (int q = 0; q < kGaussPoints; ++q) {
      v_gauss_.push_back(v_stencil(e, rule.points[q]));
      theta_gauss_.push_back(theta_stencil(e, rule.points[q]));
    }
    const QuadratureRule cost_rule = element_rule(mesh_, e, rule);
    for (int q = 0; q < kGaussPoints; ++q) {
      v_cost_.push_back(v_stencil(e, cost_rule.points[q]));
      theta_cost_.push_back(theta_stencil(e, cost_rule.points[q]));
      cost_weights_.push_back(cost_rule.weights[q]);
    }
  }
}

double DofLayout::point_u(int point) const {
  if (point == n_points_ - 1) return 1.0;
  return static_cast<double>(point) / (n_points_ - 1);
}

void DofLayout::set_role(int raw, DofRole role) {
  roles_[raw] = role;
  rebuild_free_map();
}

void DofLayout::rebuild_free_map() {
  free_index_.assign(roles_.size(), -1);
  free_to_raw_.clear();
  for (int i = 0; i < static_cast<int>(roles_.size()); ++i) {
    if (roles_[i] != DofRole::eliminated) {
      free_index_[i] = static_cast<int>(free_to_raw_.size());
      free_to_raw_.push_back(i);
    }
  }
}

namespace {

FieldStencil hermite_stencil(const HermiteShape& s, double h, std::array<int, 4> dofs) {
  FieldStencil st;
  st.count = 4;
  st.dofs = dofs;
  const double scale0[4] = {1.0, h, 1.0, h};
  for (int k = 0; k < 4; ++k) {
    st.value[k] = s.value[k] * scale0[k];
    st.d1[k] = s.d1[k] * scale0[k] / h;
    st.d2[k] = s.d2[k] * scale0[k] / (h * h);
  }
  return st;
}

}  // namespace

FieldStencil DofLayout::v_stencil(int e, double x) const {
  const double h = mesh_.element_width;
  const bool left = e == 0 && mesh_.left_singular;
  const bool right = e == mesh_.n_elements - 1 && mesh_.right_singular;
  if (left || right) {
    const int node = left ? 1 : mesh_.n_elements - 1;
    const SingularShape s =
        singular_eval(x, left ? mesh_.left_exponent : mesh_.right_exponent,
                      left ? Side::left : Side::right);
    FieldStencil st;
    st.count = 2;
    st.dofs = {v(node), dv(node), 0, 0};
    st.value = {s.value[0], h * s.value[1], 0.0, 0.0};
    st.d1 = {s.d1[0] / h, s.d1[1], 0.0, 0.0};
    st.d2 = {s.d2[0] / (h * h), s.d2[1] / h, 0.0, 0.0};
    return st;
  }
  return hermite_stencil(hermite_eval(x), h, {v(e), dv(e), v(e + 1), dv(e + 1)});
}

FieldStencil DofLayout::theta_stencil(int e, double x) const {
  return hermite_stencil(hermite_eval(x), mesh_.element_width,
                         {theta(e), dtheta(e), theta(e + 1), dtheta(e + 1)});
}

std::shared_ptr<const DofLayout> dof_layout(const ProblemSpec& spec) {
  return dof_layout(spec, spec.n_elements);
}

std::shared_ptr<const DofLayout> dof_layout(const ProblemSpec& spec, int n_elements) {
  if (n_elements < 1) throw InvalidMeshError("mesh needs at least one element");
  auto layout = std::make_shared<DofLayout>(mesh_for(spec, n_elements), spec.points_per_element);
  const int last = layout->n_nodes() - 1;
  const int last_point = layout->n_points() - 1;
  for (int raw : {layout->v(0), layout->v(last), layout->theta(0), layout->theta(last),
                  layout->px(0), layout->py(0), layout->px(last_point), layout->py(last_point)}) {
    layout->set_role(raw, DofRole::eliminated);
  }
  layout->set_role(layout->dtheta(0), DofRole::relation);
  layout->set_role(layout->dtheta(last), DofRole::relation);
  if (spec.start.v > 0.0) layout->set_role(layout->dv(0), DofRole::relation);
  if (spec.end.v > 0.0) layout->set_role(layout->dv(last), DofRole::relation);
  return layout;
}

DofVector::DofVector(std::shared_ptr<const DofLayout> layout)
    : layout_(std::move(layout)), raw_(layout_->raw_size(), 0.0) {}

Eigen::VectorXd DofVector::free_values() const {
  const auto& map = layout_->free_to_raw();
  Eigen::VectorXd out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = raw_[map[i]];
  return out;
}

void DofVector::set_free_values(std::span<const double> values) {
  const auto& map = layout_->free_to_raw();
  for (std::size_t i = 0; i < map.size(); ++i) raw_[map[i]] = values[i];
}

double DofVector::apply(const FieldStencil& s, int order) const {
  const auto& c = order == 0 ? s.value : (order == 1 ? s.d1 : s.d2);
  double sum = 0.0;
  for (int k = 0; k < s.count; ++k) sum += c[k] * raw_[s.dofs[k]];
  return sum;
}

void apply_boundary_data(DofVector& dofs, const ProblemSpec& spec, double theta_end) {
  const auto& layout = dofs.layout();
  const int last = layout.n_nodes() - 1;
  const int last_point = layout.n_points() - 1;
  dofs[layout.v(0)] = spec.start.v;
  dofs[layout.v(last)] = spec.end.v;
  dofs[layout.theta(0)] = spec.start.theta;
  dofs[layout.theta(last)] = theta_end;
  dofs[layout.px(0)] = spec.start.position.x();
  dofs[layout.py(0)] = spec.start.position.y();
  dofs[layout.px(last_point)] = spec.end.position.x();
  dofs[layout.py(last_point)] = spec.end.position.y();
  if (layout.mesh().left_singular) dofs[layout.dv(0)] = 0.0;
  if (layout.mesh().right_singular) dofs[layout.dv(last)] = 0.0;
}

namespace {

bool at_singular_end(const Mesh& mesh, double u) {
  return (u == 0.0 && mesh.left_singular) || (u == 1.0 && mesh.right_singular);
}

void check_u(double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("u outside [0,1]");
}

}  // namespace

KinematicSample eval_fields(const DofVector& dofs, double u) {
  check_u(u);
  const auto& layout = dofs.layout();
  const auto& mesh = layout.mesh();
  if (at_singular_end(mesh, u)) {
    throw DomainError("eval_fields: derivatives are unbounded at a zero-speed endpoint");
  }
  const int e = mesh.element_of(u);
  const double x = std::clamp(mesh.local_coord(e, u), 0.0, 1.0);
  const FieldStencil vs = layout.v_stencil(e, x);
  const FieldStencil ts = layout.theta_stencil(e, x);
  const double lambda = dofs.lambda();

  KinematicSample s;
  s.u = u;
  s.v = dofs.apply(vs, 0);
  s.dv = dofs.apply(vs, 1);
  s.d2v = dofs.apply(vs, 2);
  s.theta = dofs.apply(ts, 0);
  s.dtheta = dofs.apply(ts, 1);
  s.d2theta = dofs.apply(ts, 2);
  s.a_T = s.v * s.dv / lambda;
  s.a_N = s.v * s.v * s.dtheta / lambda;
  s.kappa = s.dtheta / lambda;
  s.omega = s.dtheta * s.v / lambda;
  return s;
}

double speed_at(const DofVector& dofs, double u) {
  check_u(u);
  const auto& layout = dofs.layout();
  if (at_singular_end(layout.mesh(), u)) return 0.0;
  const int e = layout.mesh().element_of(u);
  return dofs.apply(layout.v_stencil(e, std::clamp(layout.mesh().local_coord(e, u), 0.0, 1.0)), 0);
}

double theta_at(const DofVector& dofs, double u) {
  check_u(u);
  const auto& layout = dofs.layout();
  const int e = layout.mesh().element_of(u);
  return dofs.apply(
      layout.theta_stencil(e, std::clamp(layout.mesh().local_coord(e, u), 0.0, 1.0)), 0);
}

namespace {

// Visits (element, local x, weight in u) for a Gauss rule on each element
// fragment covering [a, b].
template <typename Fn>
void for_each_fragment_point(const Mesh& mesh, double a, double b, bool graded, Fn&& fn) {
  if (!(b > a)) return;
  const int e0 = mesh.element_of(a);
  const int e1 = mesh.element_of(b);
  for (int e = e0; e <= e1; ++e) {
    const double lo = std::max(a, mesh.node_coords[e]);
    const double hi = std::min(b, mesh.node_coords[e + 1]);
    if (!(hi > lo)) continue;
    QuadratureRule rule = cached_gauss_rule(kGaussPoints);
    // A fragment touching a zero-speed end gets the graded rule, which
    // integrates the u^(-p) behaviour of 1/v accurately.
    if (graded && e == 0 && mesh.left_singular && lo == 0.0) {
      rule = graded_rule(rule, mesh.left_exponent, Side::left);
    } else if (graded && e == mesh.n_elements - 1 && mesh.right_singular && hi == 1.0) {
      rule = graded_rule(rule, mesh.right_exponent, Side::right);
    } else if (graded && mesh.is_singular(e)) {
      rule = cached_gauss_rule(2 * kGaussPoints);
    }
    const double len = hi - lo;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double u = lo + len * rule.points[q];
      fn(e, mesh.local_coord(e, u), len * rule.weights[q]);
    }
  }
}

}  // namespace

double time_map(const DofVector& dofs, double u) {
  check_u(u);
  const auto& layout = dofs.layout();
  const double lambda = dofs.lambda();
  double t = 0.0;
  for_each_fragment_point(layout.mesh(), 0.0, u, true, [&](int e, double x, double w) {
    const double v = dofs.apply(layout.v_stencil(e, std::clamp(x, 0.0, 1.0)), 0);
    if (!(v > 0.0)) throw NonPositiveSpeedError("time_map: non-positive speed at a quadrature point");
    t += w * lambda / v;
  });
  return t;
}

Vec2 position_integral(const DofVector& dofs, double u_a, double u_b) {
  check_u(u_a);
  check_u(u_b);
  if (u_b < u_a) throw DomainError("position_integral: u_b < u_a");
  const auto& layout = dofs.layout();
  Vec2 r = Vec2::Zero();
  for_each_fragment_point(layout.mesh(), u_a, u_b, false, [&](int e, double x, double w) {
    const double th = dofs.apply(layout.theta_stencil(e, std::clamp(x, 0.0, 1.0)), 0);
    r += w * Vec2(std::cos(th), std::sin(th));
  });
  return dofs.lambda() * r;
}

}  // namespace comfort
