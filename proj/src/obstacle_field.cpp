#include "comfort/obstacle_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "comfort/errors.hpp"

namespace comfort {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double phi) {
  double w = std::fmod(phi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

}  // namespace

StarShapedObstacle StarShapedObstacle::circle(const Vec2& center, double radius) {
  if (!(radius > 0.0)) throw InvalidSpecError("circle obstacle radius must be positive");
  StarShapedObstacle obs;
  obs.center_ = center;
  obs.radius_ = radius;
  return obs;
}

StarShapedObstacle StarShapedObstacle::polar(const Vec2& center,
                                             std::vector<std::pair<double, double>> knots) {
  for (auto& [phi, rho] : knots) {
    phi = wrap_angle(phi);
    if (!(rho > 0.0)) throw InvalidSpecError("polar obstacle radius must be positive");
  }
  std::sort(knots.begin(), knots.end());
  for (std::size_t k = 1; k < knots.size(); ++k) {
    if (knots[k].first - knots[k - 1].first < 1e-12) {
      throw InvalidSpecError("polar obstacle has duplicate knot angles");
    }
  }
  const int n = static_cast<int>(knots.size());
  if (n < 3) throw InvalidSpecError("polar obstacle needs at least three knots");

  StarShapedObstacle obs;
  obs.center_ = center;
  for (const auto& [phi, rho] : knots) {
    obs.knots_phi_.push_back(phi);
    obs.knots_rho_.push_back(rho);
  }
  obs.radius_ = *std::max_element(obs.knots_rho_.begin(), obs.knots_rho_.end());

  // Periodic cubic spline: cyclic tridiagonal system for the knot second
  // derivatives.
  auto width = [&](int k) {
    const int k1 = (k + 1) % n;
    double h = obs.knots_phi_[k1] - obs.knots_phi_[k];
    if (k1 == 0) h += kTwoPi;
    return h;
  };
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b(n);
  for (int k = 0; k < n; ++k) {
    const int km = (k + n - 1) % n;
    const int kp = (k + 1) % n;
    const double hm = width(km);
    const double hk = width(k);
    a(k, km) += hm;
    a(k, k) += 2.0 * (hm + hk);
    a(k, kp) += hk;
    b(k) = 6.0 * ((obs.knots_rho_[kp] - obs.knots_rho_[k]) / hk -
                  (obs.knots_rho_[k] - obs.knots_rho_[km]) / hm);
  }
  const Eigen::VectorXd m = a.partialPivLu().solve(b);
  obs.second_derivs_.assign(m.data(), m.data() + n);
  return obs;
}

RadialValue StarShapedObstacle::rho(double phi) const {
  if (is_circle()) return {radius_, 0.0, 0.0};
  const double w = wrap_angle(phi);
  const int n = static_cast<int>(knots_phi_.size());
  int k;
  double t;
  if (w < knots_phi_.front()) {
    k = n - 1;
    t = w + kTwoPi - knots_phi_[k];
  } else {
    k = static_cast<int>(std::upper_bound(knots_phi_.begin(), knots_phi_.end(), w) -
                         knots_phi_.begin()) - 1;
    t = w - knots_phi_[k];
  }
  const int k1 = (k + 1) % n;
  const double h = (k1 == 0 ? knots_phi_[0] + kTwoPi : knots_phi_[k1]) - knots_phi_[k];
  const double a = (h - t) / h;
  const double b = t / h;
  const double y0 = knots_rho_[k];
  const double y1 = knots_rho_[k1];
  const double m0 = second_derivs_[k];
  const double m1 = second_derivs_[k1];
  RadialValue r;
  r.rho = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
  r.d1 = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
  r.d2 = a * m0 + b * m1;
  return r;
}

Clearance StarShapedObstacle::clearance(const Vec2& r) const {
  const Vec2 d = r - center_;
  const double dist2 = d.squaredNorm();
  const double dist = std::sqrt(dist2);
  const double phi = std::atan2(d.y(), d.x());
  const RadialValue rv = rho(phi);

  const Vec2 grad_dist = d / dist;
  const Vec2 grad_phi(-d.y() / dist2, d.x() / dist2);
  const Mat2 hess_dist = (Mat2::Identity() - d * d.transpose() / dist2) / dist;
  Mat2 hess_phi;
  const double dist4 = dist2 * dist2;
  hess_phi << 2.0 * d.x() * d.y() / dist4, (d.y() * d.y() - d.x() * d.x()) / dist4,
      (d.y() * d.y() - d.x() * d.x()) / dist4, -2.0 * d.x() * d.y() / dist4;

  Clearance c;
  c.value = dist - rv.rho;
  c.gradient = grad_dist - rv.d1 * grad_phi;
  c.hessian = hess_dist - rv.d2 * grad_phi * grad_phi.transpose() - rv.d1 * hess_phi;
  return c;
}

double StarShapedObstacle::max_radius() const {
  if (is_circle()) return radius_;
  double best = radius_;
  constexpr int kSamples = 4096;
  for (int i = 0; i < kSamples; ++i) best = std::max(best, rho(kTwoPi * i / kSamples).rho);
  return best;
}

std::vector<std::string> StarShapedObstacle::validate() const {
  std::vector<std::string> warnings;
  if (is_circle()) return warnings;
  constexpr int kSamples = 4096;
  for (int i = 0; i < kSamples; ++i) {
    const double phi = kTwoPi * i / kSamples;
    if (rho(phi).rho <= 0.0) {
      warnings.push_back("radial profile is non-positive near phi = " + std::to_string(phi));
      break;
    }
  }
  return warnings;
}

}  // namespace comfort
