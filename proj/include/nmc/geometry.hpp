#ifndef NMC_GEOMETRY_HPP
#define NMC_GEOMETRY_HPP

#include <functional>
#include <utility>

#include "nmc/types.hpp"

namespace nmc {

// Bounded convex C^2 domain G = { level < 0 } with unit outward normal
// grad(level) on the boundary.  The level function is clamped to a constant
// far from the closure so it stays bounded with bounded derivatives; the
// clamp never touches the projection or the penalization term.
class ConvexDomain {
 public:
  enum class Kind { Ball, Ellipsoid, Custom };

  struct CustomFns {
    std::function<double(const Vector&)> level;
    std::function<void(const Vector&, Vector&)> grad_level;
    std::function<void(const Vector&, Vector&)> project;
  };

  static ConvexDomain ball(Vector center, double radius);
  // Axis-aligned ellipsoid sum((x_i-c_i)^2/a_i^2) < 1.
  static ConvexDomain ellipsoid(Vector center, Vector semi_axes);
  // 1-D interval (lo, hi), stored as a ball.
  static ConvexDomain interval(double lo, double hi);
  static ConvexDomain custom(Index dim, CustomFns fns);

  Kind kind() const { return kind_; }
  Index dim() const { return dim_; }
  const Vector& center() const { return center_; }
  double radius() const { return radius_; }
  const Vector& semi_axes() const { return semi_axes_; }

  // Level function; < 0 inside, 0 on the boundary, > 0 outside.
  double level(const Eigen::Ref<const Vector>& x) const;
  void grad_level(const Eigen::Ref<const Vector>& x, Vector& out) const;
  Vector grad_level(const Eigen::Ref<const Vector>& x) const;

  // Projection onto the closure; identity on the closure itself
  // (level(x) = 0 counts as inside).
  void project(const Eigen::Ref<const Vector>& x, Vector& out) const;
  Vector project(const Eigen::Ref<const Vector>& x) const;

  bool contains(const Eigen::Ref<const Vector>& x) const { return level(x) <= 0.0; }

  // Distance to the boundary: dist(x, closure) outside, distance to
  // the boundary surface inside (exact for balls, level-based for the
  // other kinds).  Used as a regression feature.
  double boundary_distance(const Eigen::Ref<const Vector>& x) const;

  // A box [lo, hi]^d that contains the closure; pad in multiples of the
  // largest semi-axis.
  std::pair<Vector, Vector> bounding_box(double pad = 0.0) const;

 private:
  ConvexDomain() = default;

  Kind kind_ = Kind::Ball;
  Index dim_ = 0;
  Vector center_;
  double radius_ = 0.0;
  Vector semi_axes_;
  CustomFns custom_;

  double ellipsoid_multiplier(const Eigen::Ref<const Vector>& y) const;
};

struct GeometryEval {
  double level = 0.0;
  Vector normal;      // grad(level) at x
  Vector projection;  // projection of x onto the closure
  double distance = 0.0;
};

GeometryEval domain_eval(const ConvexDomain& domain, const Eigen::Ref<const Vector>& x);

// Penalization term: gradient of squared distance to the closure,
// delta(x) = 2 (x - projection(x)); zero on the closure.
Vector penalization_delta(const ConvexDomain& domain, const Eigen::Ref<const Vector>& x);
void penalization_delta(const ConvexDomain& domain, const Eigen::Ref<const Vector>& x,
                        Vector& out);

// Unique x with x + 2 lambda (x - projection(x)) = v.  Closed form: v itself
// on the closure, otherwise the point (v + 2 lambda proj(v)) / (1 + 2 lambda)
// on the segment [proj(v), v].
Vector resolvent_delta(const ConvexDomain& domain, const Eigen::Ref<const Vector>& v,
                       double lambda);
void resolvent_delta(const ConvexDomain& domain, const Eigen::Ref<const Vector>& v,
                     double lambda, Vector& out);

}  // namespace nmc

#endif  // NMC_GEOMETRY_HPP
