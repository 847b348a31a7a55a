#include "pointwise.hpp"

namespace comfort::detail {

namespace {

// f = g * q^2 from the parts and their derivatives.
PointValue square_product(double g, const Vec6& dg, const Mat6& hg, double q, const Vec6& dq,
                          const Mat6& hq) {
  PointValue f;
  f.value = g * q * q;
  f.grad = q * q * dg + 2.0 * g * q * dq;
  f.hess = q * q * hg + 2.0 * q * (dg * dq.transpose() + dq * dg.transpose()) +
           2.0 * g * (dq * dq.transpose() + q * hq);
  return f;
}

}  // namespace

PointValue time_density(const Vec6& p) {
  const double v = p[kV];
  const double lam = p[kLam];
  PointValue f;
  f.value = lam / v;
  f.grad[kV] = -lam / (v * v);
  f.grad[kLam] = 1.0 / v;
  f.hess(kV, kV) = 2.0 * lam / (v * v * v);
  f.hess(kV, kLam) = f.hess(kLam, kV) = -1.0 / (v * v);
  return f;
}

PointValue tangential_density(const Vec6& p) {
  const double v = p[kV], v1 = p[kV1], v2 = p[kV2], t1 = p[kT1], lam = p[kLam];
  const double il = 1.0 / lam;
  const double il3 = il * il * il;

  const double g = v * il3;
  Vec6 dg = Vec6::Zero();
  dg[kV] = il3;
  dg[kLam] = -3.0 * v * il3 * il;
  Mat6 hg = Mat6::Zero();
  hg(kV, kLam) = hg(kLam, kV) = -3.0 * il3 * il;
  hg(kLam, kLam) = 12.0 * v * il3 * il * il;

  const double q = v1 * v1 + v * v2 - v * v * t1 * t1;
  Vec6 dq = Vec6::Zero();
  dq[kV] = v2 - 2.0 * v * t1 * t1;
  dq[kV1] = 2.0 * v1;
  dq[kV2] = v;
  dq[kT1] = -2.0 * v * v * t1;
  Mat6 hq = Mat6::Zero();
  hq(kV, kV) = -2.0 * t1 * t1;
  hq(kV, kV2) = hq(kV2, kV) = 1.0;
  hq(kV, kT1) = hq(kT1, kV) = -4.0 * v * t1;
  hq(kV1, kV1) = 2.0;
  hq(kT1, kT1) = -2.0 * v * v;
  return square_product(g, dg, hg, q, dq, hq);
}

PointValue normal_density(const Vec6& p) {
  const double v = p[kV], v1 = p[kV1], t1 = p[kT1], t2 = p[kT2], lam = p[kLam];
  const double il = 1.0 / lam;
  const double il3 = il * il * il;

  const double g = v * v * v * il3;
  Vec6 dg = Vec6::Zero();
  dg[kV] = 3.0 * v * v * il3;
  dg[kLam] = -3.0 * v * v * v * il3 * il;
  Mat6 hg = Mat6::Zero();
  hg(kV, kV) = 6.0 * v * il3;
  hg(kV, kLam) = hg(kLam, kV) = -9.0 * v * v * il3 * il;
  hg(kLam, kLam) = 12.0 * v * v * v * il3 * il * il;

  const double q = 3.0 * v1 * t1 + v * t2;
  Vec6 dq = Vec6::Zero();
  dq[kV] = t2;
  dq[kV1] = 3.0 * t1;
  dq[kT1] = 3.0 * v1;
  dq[kT2] = v;
  Mat6 hq = Mat6::Zero();
  hq(kV, kT2) = hq(kT2, kV) = 1.0;
  hq(kV1, kT1) = hq(kT1, kV1) = 3.0;
  return square_product(g, dg, hg, q, dq, hq);
}

PrimitiveMap primitive_map(const FieldStencil* vs, const FieldStencil* ts, int lambda_dof) {
  PrimitiveMap m;
  if (vs) {
    for (int k = 0; k < vs->count; ++k) {
      m.dofs[m.count] = vs->dofs[k];
      m.P(kV, m.count) = vs->value[k];
      m.P(kV1, m.count) = vs->d1[k];
      m.P(kV2, m.count) = vs->d2[k];
      ++m.count;
    }
  }
  if (ts) {
    for (int k = 0; k < ts->count; ++k) {
      m.dofs[m.count] = ts->dofs[k];
      m.P(kT1, m.count) = ts->d1[k];
      m.P(kT2, m.count) = ts->d2[k];
      ++m.count;
    }
  }
  m.dofs[m.count] = lambda_dof;
  m.P(kLam, m.count) = 1.0;
  ++m.count;
  return m;
}

Vec6 primitives(const PrimitiveMap& map, const DofVector& dofs) {
  Vec6 p = Vec6::Zero();
  for (int k = 0; k < map.count; ++k) p += map.P.col(k) * dofs[map.dofs[k]];
  return p;
}

void accumulate(LocalBlock& block, const PrimitiveMap& map, const PointValue& pv, double weight,
                int order) {
  const int c = map.count;
  block.value += weight * pv.value;
  if (order < 1) return;
  const auto P = map.P.leftCols(c);
  block.grad.head(c) += weight * (P.transpose() * pv.grad);
  if (order < 2) return;
  block.hess.topLeftCorner(c, c) += weight * (P.transpose() * pv.hess * P);
}

}  // namespace comfort::detail
