#include "comfort/constraint_system.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pointwise.hpp"

namespace comfort {

struct ConstraintContext {
  std::shared_ptr<const DofLayout> layout;
  Limits limits;
  BoundaryState start;
  BoundaryState end;
  ObstacleField obstacles;
  // Orientation stencils and u-weights of the Gauss rule on each segment
  // [u_{j-1}, u_j], kGaussPoints per segment, segment j stored at j - 1.
  std::vector<FieldStencil> segment_stencils;
  std::vector<double> segment_weights;
};

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCenterShift = 1e-9;

using detail::kLam;
using detail::kT1;
using detail::kV;
using detail::kV1;
using detail::PointValue;
using detail::Vec6;

std::shared_ptr<const ConstraintContext> make_context(const ProblemSpec& spec,
                                                      std::shared_ptr<const DofLayout> layout) {
  if (!layout) throw std::invalid_argument("constraint assembly needs a layout");
  auto ctx = std::make_shared<ConstraintContext>();
  ctx->layout = std::move(layout);
  ctx->limits = spec.limits;
  ctx->start = spec.start;
  ctx->end = spec.end;
  ctx->obstacles = spec.obstacles;
  const auto& lay = *ctx->layout;
  const auto& mesh = lay.mesh();
  const auto& rule = cached_gauss_rule(kGaussPoints);
  for (int j = 1; j < lay.n_points(); ++j) {
    const int e = lay.segment_element(j);
    const double a = lay.point_u(j - 1);
    const double b = lay.point_u(j);
    for (int q = 0; q < kGaussPoints; ++q) {
      const double u = a + (b - a) * rule.points[q];
      const double x = std::clamp(mesh.local_coord(e, u), 0.0, 1.0);
      ctx->segment_stencils.push_back(lay.theta_stencil(e, x));
      ctx->segment_weights.push_back((b - a) * rule.weights[q]);
    }
  }
  return ctx;
}

// Which fields a Gauss-point row depends on.
struct FieldUse {
  bool speed;
  bool orientation;
  bool length;
};

FieldUse field_use(RowKind kind) {
  switch (kind) {
    case RowKind::speed: return {true, false, false};
    case RowKind::tangential_lower:
    case RowKind::tangential_upper: return {true, false, true};
    case RowKind::curvature_lower:
    case RowKind::curvature_upper: return {false, true, true};
    default: return {true, true, true};
  }
}

detail::PrimitiveMap gauss_map(const DofLayout& lay, RowKind kind, int e, int q) {
  const FieldUse use = field_use(kind);
  detail::PrimitiveMap map = detail::primitive_map(use.speed ? &lay.v_gauss(e, q) : nullptr,
                                                   use.orientation ? &lay.theta_gauss(e, q) : nullptr,
                                                   lay.lambda());
  if (!use.length) {
    // Drop the trailing lambda column.
    --map.count;
    map.P.col(map.count).setZero();
  }
  return map;
}

// Gauss-point row body as a function of the primitives.
PointValue gauss_body(RowKind kind, const Vec6& p, const Limits& lim) {
  PointValue f;
  const double v = p[kV], v1 = p[kV1], t1 = p[kT1], lam = p[kLam];
  auto linear_in_lambda = [&](double coef) {
    f.value -= coef * lam;
    f.grad[kLam] -= coef;
  };
  switch (kind) {
    case RowKind::speed:
      f.value = v;
      f.grad[kV] = 1.0;
      break;
    case RowKind::tangential_lower:
    case RowKind::tangential_upper:
      f.value = v * v1;
      f.grad[kV] = v1;
      f.grad[kV1] = v;
      f.hess(kV, kV1) = f.hess(kV1, kV) = 1.0;
      linear_in_lambda(kind == RowKind::tangential_lower ? lim.a_T.min : lim.a_T.max);
      break;
    case RowKind::normal_lower:
    case RowKind::normal_upper:
      f.value = v * v * t1;
      f.grad[kV] = 2.0 * v * t1;
      f.grad[kT1] = v * v;
      f.hess(kV, kV) = 2.0 * t1;
      f.hess(kV, kT1) = f.hess(kT1, kV) = 2.0 * v;
      linear_in_lambda(kind == RowKind::normal_lower ? lim.a_N.min : lim.a_N.max);
      break;
    case RowKind::angular_lower:
    case RowKind::angular_upper:
      f.value = v * t1;
      f.grad[kV] = t1;
      f.grad[kT1] = v;
      f.hess(kV, kT1) = f.hess(kT1, kV) = 1.0;
      linear_in_lambda(kind == RowKind::angular_lower ? lim.omega.min : lim.omega.max);
      break;
    case RowKind::curvature_lower:
    case RowKind::curvature_upper:
      f.value = t1;
      f.grad[kT1] = 1.0;
      linear_in_lambda(kind == RowKind::curvature_lower ? -lim.kappa_max : lim.kappa_max);
      break;
    default:
      throw std::logic_error("not a Gauss-point row");
  }
  return f;
}

LocalBlock linking_block(const ConstraintContext& ctx, const ConstraintRow& row,
                         const DofVector& dofs, int order) {
  const auto& lay = *ctx.layout;
  const bool along_x = row.kind == RowKind::linking_x;
  const int j = row.point;
  const double lam = dofs.lambda();
  LocalBlock b;
  b.count = row.count;
  b.dofs = row.dofs;
  // Local layout: four orientation DOFs, previous position, this position, lambda.
  double integral = 0.0;
  Eigen::Vector4d d_int = Eigen::Vector4d::Zero();
  Eigen::Matrix4d h_int = Eigen::Matrix4d::Zero();
  const std::size_t base = static_cast<std::size_t>(j - 1) * kGaussPoints;
  for (int q = 0; q < kGaussPoints; ++q) {
    const FieldStencil& st = ctx.segment_stencils[base + q];
    const double w = ctx.segment_weights[base + q];
    const double th = dofs.apply(st, 0);
    const double c = std::cos(th), s = std::sin(th);
    // Integrand and its first two derivatives in theta.
    const double f0 = along_x ? c : s;
    const double f1 = along_x ? -s : c;
    const double f2 = -f0;
    integral += w * f0;
    if (order >= 1) {
      const Eigen::Vector4d phi(st.value[0], st.value[1], st.value[2], st.value[3]);
      d_int += w * f1 * phi;
      if (order >= 2) h_int += w * f2 * phi * phi.transpose();
    }
  }
  const double pos_prev = dofs[along_x ? lay.px(j - 1) : lay.py(j - 1)];
  const double pos = dofs[along_x ? lay.px(j) : lay.py(j)];
  b.value = pos - pos_prev - lam * integral;
  if (order >= 1) {
    b.grad.head<4>() = -lam * d_int;
    b.grad[4] = -1.0;
    b.grad[5] = 1.0;
    b.grad[6] = -integral;
  }
  if (order >= 2) {
    b.hess.topLeftCorner<4, 4>() = -lam * h_int;
    b.hess.block<4, 1>(0, 6) = -d_int;
    b.hess.block<1, 4>(6, 0) = -d_int.transpose();
  }
  return b;
}

ConstraintRow make_row(RowKind kind, double lower, double upper) {
  ConstraintRow r;
  r.kind = kind;
  r.lower = lower;
  r.upper = upper;
  return r;
}

void add_equalities(ConstraintSet& set, const ConstraintContext& ctx) {
  const auto& lay = *ctx.layout;
  for (int j = 1; j < lay.n_points(); ++j) {
    const int e = lay.segment_element(j);
    for (RowKind kind : {RowKind::linking_x, RowKind::linking_y}) {
      ConstraintRow r = make_row(kind, 0.0, 0.0);
      r.point = j;
      r.element = e;
      const bool along_x = kind == RowKind::linking_x;
      r.dofs = {lay.theta(e), lay.dtheta(e), lay.theta(e + 1), lay.dtheta(e + 1),
                along_x ? lay.px(j - 1) : lay.py(j - 1), along_x ? lay.px(j) : lay.py(j),
                lay.lambda()};
      r.count = 7;
      set.add_row(r);
    }
  }
  const int last = lay.n_nodes() - 1;
  const auto& mesh = lay.mesh();
  for (int side = 0; side < 2; ++side) {
    const BoundaryState& s = side == 0 ? ctx.start : ctx.end;
    const int node = side == 0 ? 0 : last;
    ConstraintRow curv = make_row(RowKind::end_curvature, 0.0, 0.0);
    curv.node = node;
    curv.dofs = {lay.dtheta(node), lay.lambda()};
    curv.count = 2;
    set.add_row(curv);
    if (s.v > 0.0) {
      ConstraintRow acc = make_row(RowKind::end_acceleration, 0.0, 0.0);
      acc.node = node;
      acc.dofs = {lay.v(node), lay.dv(node), lay.lambda()};
      acc.count = 3;
      set.add_row(acc);
    } else if (s.a_T != 0.0) {
      const bool singular = side == 0 ? mesh.left_singular : mesh.right_singular;
      if (singular) {
        ConstraintRow acc = make_row(RowKind::singular_acceleration, 0.0, 0.0);
        acc.node = side == 0 ? 1 : last - 1;
        acc.dofs = {lay.v(acc.node), lay.lambda()};
        acc.count = 2;
        set.add_row(acc);
      }
    }
  }
}

void add_inequalities(ConstraintSet& set, const ConstraintContext& ctx) {
  const auto& lay = *ctx.layout;
  const auto& lim = ctx.limits;
  int box = 0;
  for (int e = 0; e < lay.n_elements(); ++e) {
    for (int q = 0; q < kGaussPoints; ++q) {
      auto add = [&](RowKind kind, double lo, double up, int box_id) {
        ConstraintRow r = make_row(kind, lo, up);
        r.element = e;
        r.gauss = q;
        r.box = box_id;
        const auto map = gauss_map(lay, kind, e, q);
        r.count = map.count;
        r.dofs = map.dofs;
        set.add_row(r);
      };
      add(RowKind::speed, 0.0, lim.v_max, box++);
      add(RowKind::tangential_lower, 0.0, kInf, box);
      add(RowKind::tangential_upper, -kInf, 0.0, box++);
      add(RowKind::normal_lower, 0.0, kInf, box);
      add(RowKind::normal_upper, -kInf, 0.0, box++);
      add(RowKind::angular_lower, 0.0, kInf, box);
      add(RowKind::angular_upper, -kInf, 0.0, box++);
      add(RowKind::curvature_lower, 0.0, kInf, box);
      add(RowKind::curvature_upper, -kInf, 0.0, box++);
    }
  }
}

void add_obstacles(ConstraintSet& set, const ConstraintContext& ctx) {
  const auto& lay = *ctx.layout;
  for (int j = 0; j < lay.n_points(); ++j) {
    for (int i = 0; i < static_cast<int>(ctx.obstacles.size()); ++i) {
      ConstraintRow r = make_row(RowKind::obstacle, 0.0, kInf);
      r.point = j;
      r.obstacle = i;
      r.dofs = {lay.px(j), lay.py(j)};
      r.count = 2;
      set.add_row(r);
    }
  }
}

}  // namespace

const char* to_string(RowKind kind) {
  switch (kind) {
    case RowKind::linking_x: return "linking_x";
    case RowKind::linking_y: return "linking_y";
    case RowKind::end_curvature: return "end_curvature";
    case RowKind::end_acceleration: return "end_acceleration";
    case RowKind::singular_acceleration: return "singular_acceleration";
    case RowKind::speed: return "speed";
    case RowKind::tangential_lower: return "tangential_lower";
    case RowKind::tangential_upper: return "tangential_upper";
    case RowKind::normal_lower: return "normal_lower";
    case RowKind::normal_upper: return "normal_upper";
    case RowKind::angular_lower: return "angular_lower";
    case RowKind::angular_upper: return "angular_upper";
    case RowKind::curvature_lower: return "curvature_lower";
    case RowKind::curvature_upper: return "curvature_upper";
    case RowKind::obstacle: return "obstacle";
  }
  return "unknown";
}

bool is_equality(RowKind kind) {
  switch (kind) {
    case RowKind::linking_x:
    case RowKind::linking_y:
    case RowKind::end_curvature:
    case RowKind::end_acceleration:
    case RowKind::singular_acceleration: return true;
    default: return false;
  }
}

std::string describe(const ConstraintRow& row) {
  std::string s = to_string(row.kind);
  if (row.node >= 0) s += " node " + std::to_string(row.node);
  if (row.element >= 0 && row.gauss >= 0) {
    s += " element " + std::to_string(row.element) + " gauss " + std::to_string(row.gauss);
  }
  if (row.point >= 0) s += " point " + std::to_string(row.point);
  if (row.obstacle >= 0) s += " obstacle " + std::to_string(row.obstacle);
  return s;
}

ConstraintSet::ConstraintSet(std::shared_ptr<const ConstraintContext> context)
    : context_(std::move(context)) {}

int ConstraintSet::equality_count() const {
  int n = 0;
  for (const auto& r : rows_) n += is_equality(r.kind) ? 1 : 0;
  return n;
}

int ConstraintSet::inequality_count() const {
  return static_cast<int>(rows_.size()) - equality_count();
}

int ConstraintSet::box_count() const {
  int max_box = -1;
  int first = -1;
  for (const auto& r : rows_) {
    if (r.box < 0) continue;
    if (first < 0) first = r.box;
    max_box = std::max(max_box, r.box);
  }
  return first < 0 ? 0 : max_box - first + 1;
}

int ConstraintSet::obstacle_count() const {
  int n = 0;
  for (const auto& r : rows_) n += r.kind == RowKind::obstacle ? 1 : 0;
  return n;
}

void ConstraintSet::append(const ConstraintSet& other) {
  if (!context_) {
    context_ = other.context_;
  } else if (other.context_ && other.context_->layout != context_->layout) {
    throw std::invalid_argument("constraint sets built on different layouts");
  }
  rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

LocalBlock ConstraintSet::evaluate(std::size_t i, const DofVector& dofs, int order) const {
  const ConstraintContext& ctx = *context_;
  const ConstraintRow& row = rows_.at(i);
  const auto& lay = *ctx.layout;
  LocalBlock b;
  b.count = row.count;
  b.dofs = row.dofs;
  switch (row.kind) {
    case RowKind::linking_x:
    case RowKind::linking_y:
      return linking_block(ctx, row, dofs, order);
    case RowKind::end_curvature: {
      const double kappa = row.node == 0 ? ctx.start.kappa : ctx.end.kappa;
      b.value = dofs[row.dofs[0]] - dofs.lambda() * kappa;
      b.grad[0] = 1.0;
      b.grad[1] = -kappa;
      return b;
    }
    case RowKind::end_acceleration: {
      const double a = row.node == 0 ? ctx.start.a_T : ctx.end.a_T;
      const double v = dofs[row.dofs[0]], dv = dofs[row.dofs[1]];
      b.value = v * dv - dofs.lambda() * a;
      b.grad[0] = dv;
      b.grad[1] = v;
      b.grad[2] = -a;
      b.hess(0, 1) = b.hess(1, 0) = 1.0;
      return b;
    }
    case RowKind::singular_acceleration: {
      // Near a zero-speed end v ~ v_k sqrt(x), so v v' / lambda -> +-v_k^2 / (2 h lambda).
      const bool left = row.node == 1;
      const double a = left ? ctx.start.a_T : ctx.end.a_T;
      const double h = lay.mesh().element_width;
      const double sign = left ? -1.0 : 1.0;
      const double v = dofs[row.dofs[0]];
      b.value = v * v + sign * 2.0 * h * dofs.lambda() * a;
      b.grad[0] = 2.0 * v;
      b.grad[1] = sign * 2.0 * h * a;
      b.hess(0, 0) = 2.0;
      return b;
    }
    case RowKind::obstacle: {
      Vec2 r(dofs[row.dofs[0]], dofs[row.dofs[1]]);
      const auto& obs = ctx.obstacles.obstacles[row.obstacle];
      if (r == obs.center()) r.x() += kCenterShift;
      const Clearance c = obs.clearance(r);
      b.value = c.value;
      b.grad.head<2>() = c.gradient;
      b.hess.topLeftCorner<2, 2>() = c.hessian;
      return b;
    }
    default: {
      const auto map = gauss_map(lay, row.kind, row.element, row.gauss);
      const Vec6 p = detail::primitives(map, dofs);
      LocalBlock out;
      out.count = map.count;
      out.dofs = map.dofs;
      detail::accumulate(out, map, gauss_body(row.kind, p, ctx.limits), 1.0, order);
      return out;
    }
  }
}

std::vector<double> ConstraintSet::values(const DofVector& dofs) const {
  std::vector<double> out(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) out[i] = evaluate(i, dofs, 0).value;
  return out;
}

double ConstraintSet::max_violation(const DofVector& dofs) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const double g = evaluate(i, dofs, 0).value;
    worst = std::max({worst, rows_[i].lower - g, g - rows_[i].upper});
  }
  return worst;
}

ConstraintSet assemble_equalities(const ProblemSpec& spec,
                                  std::shared_ptr<const DofLayout> layout) {
  ConstraintSet set(make_context(spec, std::move(layout)));
  add_equalities(set, *set.context());
  return set;
}

ConstraintSet assemble_inequalities(const ProblemSpec& spec,
                                    std::shared_ptr<const DofLayout> layout) {
  ConstraintSet set(make_context(spec, std::move(layout)));
  add_inequalities(set, *set.context());
  return set;
}

ConstraintSet obstacle_constraints(const ProblemSpec& spec,
                                   std::shared_ptr<const DofLayout> layout) {
  ConstraintSet set(make_context(spec, std::move(layout)));
  add_obstacles(set, *set.context());
  return set;
}

ConstraintSet assemble_constraints(const ProblemSpec& spec,
                                   std::shared_ptr<const DofLayout> layout) {
  ConstraintSet set(make_context(spec, std::move(layout)));
  add_equalities(set, *set.context());
  add_inequalities(set, *set.context());
  add_obstacles(set, *set.context());
  return set;
}

}  // namespace comfort
