#include "comfort/discomfort_cost.hpp"

#include "comfort/errors.hpp"
#include "pointwise.hpp"

namespace comfort {

namespace {

struct ElementParts {
  double tau = 0.0;
  double tangential = 0.0;
  double normal = 0.0;
};

detail::Vec6 check_speed(detail::Vec6 p, double floor) {
  if (!(p[detail::kV] > floor)) {
    throw NonPositiveSpeedError("non-positive speed at a quadrature point");
  }
  return p;
}

// Unweighted parts with an arbitrary rule; stencils built on the fly.
ElementParts element_parts(const DofVector& dofs, int e, const QuadratureRule& rule,
                           double floor) {
  const auto& layout = dofs.layout();
  const double h = layout.mesh().element_width;
  ElementParts parts;
  const QuadratureRule r = element_rule(layout.mesh(), e, rule);
  for (std::size_t q = 0; q < r.size(); ++q) {
    const FieldStencil vs = layout.v_stencil(e, r.points[q]);
    const FieldStencil ts = layout.theta_stencil(e, r.points[q]);
    const auto map = detail::primitive_map(&vs, &ts, layout.lambda());
    const auto p = check_speed(detail::primitives(map, dofs), floor);
    const double w = h * r.weights[q];
    parts.tau += w * detail::time_density(p).value;
    parts.tangential += w * detail::tangential_density(p).value;
    parts.normal += w * detail::normal_density(p).value;
  }
  return parts;
}

}  // namespace

Eigen::SparseMatrix<double> SparseHessian::to_matrix() const {
  std::vector<Eigen::Triplet<double>> full = entries;
  for (const auto& t : entries) {
    if (t.row() != t.col()) full.emplace_back(t.col(), t.row(), t.value());
  }
  Eigen::SparseMatrix<double> m(dim, dim);
  m.setFromTriplets(full.begin(), full.end());
  return m;
}

LocalBlock element_cost(const DofVector& dofs, int e, const Weights& weights, double speed_floor,
                        int order) {
  const auto& layout = dofs.layout();
  const double h = layout.mesh().element_width;
  LocalBlock block;
  for (int q = 0; q < kGaussPoints; ++q) {
    const auto map =
        detail::primitive_map(&layout.v_cost(e, q), &layout.theta_cost(e, q), layout.lambda());
    if (q == 0) {
      block.count = map.count;
      block.dofs = map.dofs;
    }
    const auto p = check_speed(detail::primitives(map, dofs), speed_floor);
    const double w = h * layout.cost_weight(e, q);
    detail::accumulate(block, map, detail::time_density(p), w, order);
    detail::accumulate(block, map, detail::tangential_density(p), w * weights.w_T, order);
    detail::accumulate(block, map, detail::normal_density(p), w * weights.w_N, order);
  }
  return block;
}

CostBreakdown cost_eval(const DofVector& dofs, const Weights& weights,
                        const CostOptions& options) {
  const auto& rule = cached_gauss_rule(options.quadrature_points);
  CostBreakdown c;
  for (int e = 0; e < dofs.layout().n_elements(); ++e) {
    const ElementParts parts = element_parts(dofs, e, rule, options.speed_floor);
    c.J_tau += parts.tau;
    c.J_T_raw += parts.tangential;
    c.J_N_raw += parts.normal;
  }
  c.J_T = weights.w_T * c.J_T_raw;
  c.J_N = weights.w_N * c.J_N_raw;
  c.J_total = c.J_tau + c.J_T + c.J_N;
  return c;
}

Eigen::VectorXd cost_gradient(const DofVector& dofs, const Weights& weights,
                              const CostOptions& options) {
  const auto& layout = dofs.layout();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(layout.free_size());
  for (int e = 0; e < layout.n_elements(); ++e) {
    const LocalBlock b = element_cost(dofs, e, weights, options.speed_floor, 1);
    for (int k = 0; k < b.count; ++k) {
      const int fi = layout.free_index(b.dofs[k]);
      if (fi >= 0) g[fi] += b.grad[k];
    }
  }
  return g;
}

SparseHessian cost_hessian(const DofVector& dofs, const Weights& weights,
                           const CostOptions& options) {
  const auto& layout = dofs.layout();
  std::vector<Eigen::Triplet<double>> trips;
  for (int e = 0; e < layout.n_elements(); ++e) {
    const LocalBlock b = element_cost(dofs, e, weights, options.speed_floor, 2);
    for (int a = 0; a < b.count; ++a) {
      const int fa = layout.free_index(b.dofs[a]);
      if (fa < 0) continue;
      for (int c = 0; c < b.count; ++c) {
        const int fc = layout.free_index(b.dofs[c]);
        if (fc < 0 || fc > fa) continue;
        trips.emplace_back(fa, fc, b.hess(a, c));
      }
    }
  }
  Eigen::SparseMatrix<double> lower(layout.free_size(), layout.free_size());
  lower.setFromTriplets(trips.begin(), trips.end());
  SparseHessian h;
  h.dim = layout.free_size();
  for (int k = 0; k < lower.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(lower, k); it; ++it) {
      h.entries.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  return h;
}

}  // namespace comfort
