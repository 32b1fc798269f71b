#include "nmc/geometry.hpp"

#include <cmath>

namespace nmc {
namespace {

// Quintic smoothstep, C^2 across [0, 1].
double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

double smoothstep_deriv(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return 30.0 * t * t * (1.0 - t) * (1.0 - t);
}

void check_finite(const Eigen::Ref<const Vector>& x, const char* what) {
  if (!x.allFinite()) throw InvalidInput(std::string(what) + ": non-finite input point");
}

}  // namespace

ConvexDomain ConvexDomain::ball(Vector center, double radius) {
  if (!(radius > 0.0) || !center.allFinite())
    throw InvalidInput("ConvexDomain::ball: radius must be positive and center finite");
  ConvexDomain d;
  d.kind_ = Kind::Ball;
  d.dim_ = center.size();
  d.center_ = std::move(center);
  d.radius_ = radius;
  return d;
}

ConvexDomain ConvexDomain::ellipsoid(Vector center, Vector semi_axes) {
  if (center.size() != semi_axes.size())
    throw InvalidInput("ConvexDomain::ellipsoid: center/semi-axes dimension mismatch");
  if (!center.allFinite() || !semi_axes.allFinite() || (semi_axes.array() <= 0.0).any())
    throw InvalidInput("ConvexDomain::ellipsoid: semi-axes must be positive and finite");
  ConvexDomain d;
  d.kind_ = Kind::Ellipsoid;
  d.dim_ = center.size();
  d.center_ = std::move(center);
  d.semi_axes_ = std::move(semi_axes);
  d.radius_ = d.semi_axes_.maxCoeff();
  return d;
}

ConvexDomain ConvexDomain::interval(double lo, double hi) {
  if (!(lo < hi)) throw InvalidInput("ConvexDomain::interval: requires lo < hi");
  Vector c(1);
  c << 0.5 * (lo + hi);
  return ball(std::move(c), 0.5 * (hi - lo));
}

ConvexDomain ConvexDomain::custom(Index dim, CustomFns fns) {
  if (dim < 1 || !fns.level || !fns.grad_level || !fns.project)
    throw InvalidInput("ConvexDomain::custom: needs dim >= 1 and all three callbacks");
  ConvexDomain d;
  d.kind_ = Kind::Custom;
  d.dim_ = dim;
  d.center_ = Vector::Zero(dim);
  d.radius_ = 1.0;
  d.custom_ = std::move(fns);
  return d;
}

double ConvexDomain::level(const Eigen::Ref<const Vector>& x) const {
  check_finite(x, "level");
  switch (kind_) {
    case Kind::Ball: {
      const double rho2 = (x - center_).squaredNorm();
      const double base = (rho2 - radius_ * radius_) / (2.0 * radius_);
      const double r1 = 1.5 * radius_, r2 = 2.0 * radius_;
      if (rho2 <= r1 * r1) return base;
      const double rho = std::sqrt(rho2);
      const double cap = (r2 * r2 - radius_ * radius_) / (2.0 * radius_);
      const double s = smoothstep((rho - r1) / (r2 - r1));
      return (1.0 - s) * base + s * cap;
    }
    case Kind::Ellipsoid: {
      const Vector y = x - center_;
      const double q = (y.array() / semi_axes_.array()).square().sum() - 1.0;
      const Vector gq = 2.0 * (y.array() / semi_axes_.array().square()).matrix();
      const double base = q / std::sqrt(gq.squaredNorm() + q * q);
      const double rho = y.norm();
      const double r1 = 2.0 * radius_, r2 = 3.0 * radius_;
      if (rho <= r1) return base;
      const double s = smoothstep((rho - r1) / (r2 - r1));
      return (1.0 - s) * base + s * radius_;
    }
    case Kind::Custom:
      return custom_.level(x);
  }
  return 0.0;
}

void ConvexDomain::grad_level(const Eigen::Ref<const Vector>& x, Vector& out) const {
  check_finite(x, "grad_level");
  switch (kind_) {
    case Kind::Ball: {
      const double rho2 = (x - center_).squaredNorm();
      const double r1 = 1.5 * radius_, r2 = 2.0 * radius_;
      if (rho2 <= r1 * r1) {
        out = (x - center_) / radius_;
        return;
      }
      const double rho = std::sqrt(rho2);
      if (rho >= r2) {
        out = Vector::Zero(dim_);
        return;
      }
      const double base = (rho * rho - radius_ * radius_) / (2.0 * radius_);
      const double cap = (r2 * r2 - radius_ * radius_) / (2.0 * radius_);
      const double t = (rho - r1) / (r2 - r1);
      const double s = smoothstep(t);
      const double sp = smoothstep_deriv(t) / (r2 - r1);
      // d/drho of (1-s) base + s cap, along the unit radial direction
      const double dr = (1.0 - s) * (rho / radius_) + sp * (cap - base);
      out = (dr / rho) * (x - center_);
      return;
    }
    case Kind::Ellipsoid: {
      const Vector y = x - center_;
      const double q = (y.array() / semi_axes_.array()).square().sum() - 1.0;
      const Vector gq = 2.0 * (y.array() / semi_axes_.array().square()).matrix();
      const double D2 = gq.squaredNorm() + q * q;
      const double D = std::sqrt(D2);
      // grad of q/D with D = sqrt(|gq|^2 + q^2); H = Hessian of q is diagonal.
      const Vector Hgq = 2.0 * (gq.array() / semi_axes_.array().square()).matrix();
      const Vector gD = (Hgq + q * gq) / D;
      Vector base_grad = gq / D - (q / D2) * gD;
      const double rho = y.norm();
      const double r1 = 2.0 * radius_, r2 = 3.0 * radius_;
      if (rho <= r1) {
        out = std::move(base_grad);
        return;
      }
      if (rho >= r2) {
        out = Vector::Zero(dim_);
        return;
      }
      const double base = q / D;
      const double t = (rho - r1) / (r2 - r1);
      const double s = smoothstep(t);
      const double sp = smoothstep_deriv(t) / (r2 - r1);
      out = (1.0 - s) * base_grad + (sp * (radius_ - base) / rho) * y;
      return;
    }
    case Kind::Custom:
      custom_.grad_level(x, out);
      return;
  }
}

Vector ConvexDomain::grad_level(const Eigen::Ref<const Vector>& x) const {
  Vector out;
  grad_level(x, out);
  return out;
}

// Lagrange multiplier t > 0 for projecting an exterior point c + y onto the
// ellipsoid: the projection is z_i = c_i + a_i^2 y_i / (a_i^2 + t) where
// F(t) = sum a_i^2 y_i^2 / (a_i^2 + t)^2 - 1 = 0.  F is strictly decreasing
// with F(0) > 0, so the root is unique; safeguarded Newton with a bisection
// bracket.
double ConvexDomain::ellipsoid_multiplier(const Eigen::Ref<const Vector>& y) const {
  const Vector a2 = semi_axes_.array().square();
  const Vector w = (semi_axes_.array() * y.array()).square();  // a_i^2 y_i^2

  auto F = [&](double t) {
    double s = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
      const double d = a2[i] + t;
      s += w[i] / (d * d);
    }
    return s - 1.0;
  };
  auto dF = [&](double t) {
    double s = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
      const double d = a2[i] + t;
      s += w[i] / (d * d * d);
    }
    return -2.0 * s;
  };

  double lo = 0.0;
  double hi = std::max((semi_axes_.array() * y.array().abs()).matrix().norm(), 1e-30);
  while (F(hi) > 0.0) hi *= 2.0;

  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double f = F(t);
    if (std::abs(f) < 1e-15) break;
    if (f > 0.0)
      lo = t;
    else
      hi = t;
    const double step = f / dF(t);
    double next = t - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // bisection fallback
    if (std::abs(next - t) < 1e-16 * (1.0 + t)) {
      t = next;
      break;
    }
    t = next;
  }
  return t;
}

void ConvexDomain::project(const Eigen::Ref<const Vector>& x, Vector& out) const {
  check_finite(x, "project");
  switch (kind_) {
    case Kind::Ball: {
      const double rho2 = (x - center_).squaredNorm();
      if (rho2 <= radius_ * radius_) {
        out = x;
        return;
      }
      out = center_ + (radius_ / std::sqrt(rho2)) * (x - center_);
      return;
    }
    case Kind::Ellipsoid: {
      const Vector y = x - center_;
      if ((y.array() / semi_axes_.array()).square().sum() <= 1.0) {
        out = x;
        return;
      }
      const double t = ellipsoid_multiplier(y);
      const Vector a2 = semi_axes_.array().square();
      out = center_ + (a2.array() * y.array() / (a2.array() + t)).matrix();
      return;
    }
    case Kind::Custom:
      custom_.project(x, out);
      return;
  }
}

Vector ConvexDomain::project(const Eigen::Ref<const Vector>& x) const {
  Vector out;
  project(x, out);
  return out;
}

double ConvexDomain::boundary_distance(const Eigen::Ref<const Vector>& x) const {
  if (kind_ == Kind::Ball) {
    const double rho = (x - center_).norm();
    return std::abs(radius_ - rho);
  }
  const double lv = level(x);
  if (lv <= 0.0) return -lv;  // level-based proxy inside non-ball domains
  Vector p;
  project(x, p);
  return (x - p).norm();
}

std::pair<Vector, Vector> ConvexDomain::bounding_box(double pad) const {
  Vector half;
  if (kind_ == Kind::Ellipsoid)
    half = semi_axes_;
  else
    half = Vector::Constant(dim_, radius_);
  const double extra = pad * radius_;
  return {center_ - half - Vector::Constant(dim_, extra),
          center_ + half + Vector::Constant(dim_, extra)};
}

GeometryEval domain_eval(const ConvexDomain& domain, const Eigen::Ref<const Vector>& x) {
  check_finite(x, "domain_eval");
  GeometryEval e;
  e.level = domain.level(x);
  domain.grad_level(x, e.normal);
  domain.project(x, e.projection);
  e.distance = e.level <= 0.0 ? 0.0 : (x - e.projection).norm();
  return e;
}

void penalization_delta(const ConvexDomain& domain, const Eigen::Ref<const Vector>& x,
                        Vector& out) {
  domain.project(x, out);
  out = 2.0 * (x - out);
}

Vector penalization_delta(const ConvexDomain& domain, const Eigen::Ref<const Vector>& x) {
  Vector out;
  penalization_delta(domain, x, out);
  return out;
}

void resolvent_delta(const ConvexDomain& domain, const Eigen::Ref<const Vector>& v,
                     double lambda, Vector& out) {
  if (!(lambda >= 0.0)) throw InvalidInput("resolvent_delta: lambda must be >= 0");
  check_finite(v, "resolvent_delta");
  domain.project(v, out);
  if ((out - v).isZero(0.0)) {
    out = v;
    return;
  }
  out = (v + 2.0 * lambda * out) / (1.0 + 2.0 * lambda);
}

Vector resolvent_delta(const ConvexDomain& domain, const Eigen::Ref<const Vector>& v,
                       double lambda) {
  Vector out;
  resolvent_delta(domain, v, lambda, out);
  return out;
}

}  // namespace nmc
