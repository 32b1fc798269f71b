#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "nmc/geometry.hpp"
#include "nmc/rng.hpp"

using namespace nmc;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

// Independent projection oracle for an axis-aligned ellipse: dense scan of
// the boundary parametrization followed by ternary-search refinement.
Vector ellipse_projection_oracle(const Vector& center, const Vector& axes, const Vector& x) {
  auto point = [&](double th) {
    return vec2(center[0] + axes[0] * std::cos(th), center[1] + axes[1] * std::sin(th));
  };
  auto dist2 = [&](double th) { return (point(th) - x).squaredNorm(); };
  const int n = 20000;
  double best_th = 0.0, best = dist2(0.0);
  for (int i = 1; i < n; ++i) {
    const double th = 2.0 * M_PI * i / n;
    const double d = dist2(th);
    if (d < best) {
      best = d;
      best_th = th;
    }
  }
  double lo = best_th - 2.0 * M_PI / n, hi = best_th + 2.0 * M_PI / n;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (dist2(m1) < dist2(m2))
      hi = m2;
    else
      lo = m1;
  }
  return point(0.5 * (lo + hi));
}

Vector random_point(std::uint64_t seed, std::uint64_t id, Index d, double span) {
  Vector x(d);
  for (Index j = 0; j < d; ++j)
    x[j] = span * (2.0 * uniform01(seed, id, static_cast<std::uint32_t>(j), 7) - 1.0);
  return x;
}

}  // namespace

TEST_CASE("ball level, gradient, projection") {
  const auto G = ConvexDomain::ball(vec2(0.5, -1.0), 2.0);

  SUBCASE("closed-form values near the boundary") {
    const Vector x = vec2(0.5 + 3.0, -1.0);  // distance 1 outside
    CHECK(G.level(x) == doctest::Approx((9.0 - 4.0) / 4.0));
    CHECK(G.project(x).isApprox(vec2(2.5, -1.0), 1e-14));
    CHECK(G.grad_level(vec2(2.5, -1.0)).isApprox(vec2(1.0, 0.0), 1e-14));
    CHECK(G.boundary_distance(x) == doctest::Approx(1.0));
    CHECK(G.boundary_distance(vec2(0.5, -1.0)) == doctest::Approx(2.0));
  }

  SUBCASE("projection is the identity on the closure") {
    const Vector on = vec2(0.5, 1.0);
    CHECK(G.project(on) == on);
    const Vector in = vec2(0.6, -0.9);
    CHECK(G.project(in) == in);
    CHECK(G.contains(in));
  }

  SUBCASE("level is clamped far away") {
    const Vector far1 = vec2(0.5 + 10.0, -1.0);
    const Vector far2 = vec2(0.5, -1.0 + 50.0);
    CHECK(G.level(far1) == doctest::Approx(G.level(far2)));
    CHECK(G.grad_level(far1).norm() == 0.0);
  }

  SUBCASE("gradient matches finite differences through the blend region") {
    for (int i = 0; i < 200; ++i) {
      Vector x = vec2(0.5, -1.0) + random_point(11, static_cast<std::uint64_t>(i), 2, 4.5);
      const Vector g = G.grad_level(x);
      const double h = 1e-6;
      for (Index j = 0; j < 2; ++j) {
        Vector xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const double fd = (G.level(xp) - G.level(xm)) / (2.0 * h);
        CHECK(g[j] == doctest::Approx(fd).epsilon(5e-5));
      }
    }
  }
}

TEST_CASE("ellipse projection against a parametric oracle") {
  const Vector c = vec2(0.25, -0.5);
  const Vector a = vec2(2.0, 0.7);
  const auto G = ConvexDomain::ellipsoid(c, a);

  for (int i = 0; i < 300; ++i) {
    Vector x = c + random_point(23, static_cast<std::uint64_t>(i), 2, 5.0);
    const double q = ((x - c).array() / a.array()).square().sum() - 1.0;
    if (q <= 0.0) {
      CHECK(G.project(x) == x);
      continue;
    }
    const Vector p = G.project(x);
    const Vector p_star = ellipse_projection_oracle(c, a, x);
    CHECK((x - p).norm() == doctest::Approx((x - p_star).norm()).epsilon(1e-9));
    CHECK((p - p_star).norm() < 1e-6);
    // projected point lies on the boundary
    CHECK(std::abs(((p - c).array() / a.array()).square().sum() - 1.0) < 1e-10);
    CHECK(G.boundary_distance(x) == doctest::Approx((x - p).norm()));
  }
}

TEST_CASE("ellipsoid level function") {
  const Vector c = vec2(0.0, 0.0);
  const Vector a = vec2(1.5, 0.5);
  const auto G = ConvexDomain::ellipsoid(c, a);

  SUBCASE("sign convention and boundary zero") {
    CHECK(G.level(vec2(0.0, 0.0)) < 0.0);
    CHECK(G.level(vec2(1.5, 0.0)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(G.level(vec2(2.0, 1.0)) > 0.0);
  }

  SUBCASE("unit outward normal on the boundary") {
    for (int i = 0; i < 100; ++i) {
      const double th = 2.0 * M_PI * i / 100.0;
      const Vector b = vec2(1.5 * std::cos(th), 0.5 * std::sin(th));
      const Vector g = G.grad_level(b);
      CHECK(g.norm() == doctest::Approx(1.0).epsilon(1e-10));
      // normal direction: proportional to (x/a1^2, y/a2^2)
      const Vector nrm = vec2(b[0] / 2.25, b[1] / 0.25).normalized();
      CHECK(g.isApprox(nrm, 1e-9));
    }
  }

  SUBCASE("gradient matches finite differences, including the far blend") {
    for (int i = 0; i < 200; ++i) {
      Vector x = random_point(37, static_cast<std::uint64_t>(i), 2, 4.0);
      const Vector g = G.grad_level(x);
      const double h = 1e-6;
      for (Index j = 0; j < 2; ++j) {
        Vector xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const double fd = (G.level(xp) - G.level(xm)) / (2.0 * h);
        CHECK(g[j] == doctest::Approx(fd).epsilon(1e-4));
      }
    }
  }

  SUBCASE("level is clamped far away") {
    CHECK(G.level(vec2(10.0, 0.0)) == doctest::Approx(G.level(vec2(0.0, 20.0))));
    CHECK(G.grad_level(vec2(10.0, 0.0)).norm() == 0.0);
  }
}

TEST_CASE("penalization term: subdifferential inequality and Lipschitz bound") {
  const auto ball = ConvexDomain::ball(vec2(0.0, 0.0), 1.0);
  const auto ell = ConvexDomain::ellipsoid(vec2(0.1, 0.2), vec2(1.2, 0.6));

  for (const ConvexDomain* G : {&ball, &ell}) {
    for (int i = 0; i < 500; ++i) {
      const Vector x = random_point(51, static_cast<std::uint64_t>(i), 2, 3.0);
      const Vector d = penalization_delta(*G, x);
      // |delta| = 2 dist(x, closure)
      const double dist = G->contains(x) ? 0.0 : (x - G->project(x)).norm();
      CHECK(std::abs(d.norm() - 2.0 * dist) < 1e-9);
      // <z - x, delta(x)> <= 0 for z in the closure
      for (int zi = 0; zi < 10; ++zi) {
        Vector z = random_point(52, static_cast<std::uint64_t>(1000 * i + zi), 2, 2.0);
        z = G->project(z);
        CHECK((z - x).dot(d) <= 1e-12);
      }
      // delta is 2-Lipschitz
      const Vector y = random_point(53, static_cast<std::uint64_t>(i), 2, 3.0);
      const Vector dy = penalization_delta(*G, y);
      CHECK((d - dy).norm() <= 2.0 * (x - y).norm() + 1e-9);
    }
  }
}

TEST_CASE("resolvent of the penalization term") {
  const auto ball = ConvexDomain::ball(vec2(0.0, 0.0), 1.0);
  const auto ell = ConvexDomain::ellipsoid(vec2(0.0, 0.0), vec2(2.0, 0.5));

  for (const ConvexDomain* G : {&ball, &ell}) {
    for (int i = 0; i < 300; ++i) {
      const Vector v = random_point(71, static_cast<std::uint64_t>(i), 2, 4.0);
      const double lambda =
          std::pow(10.0, 4.0 * uniform01(72, static_cast<std::uint64_t>(i), 0, 0) - 2.0);
      const Vector x = resolvent_delta(*G, v, lambda);
      const Vector res = x + 2.0 * lambda * (x - G->project(x)) - v;
      CHECK(res.norm() <= 1e-10 * (1.0 + v.norm()));
      if (G->contains(v)) CHECK(x == v);
    }
  }
  CHECK_THROWS_AS(resolvent_delta(ball, vec2(0, 0), -1.0), InvalidInput);
}

TEST_CASE("interval and custom domains") {
  const auto I = ConvexDomain::interval(-1.0, 3.0);
  Vector x(1);
  x << 4.0;
  CHECK(I.project(x)[0] == doctest::Approx(3.0));
  x << -2.5;
  CHECK(I.project(x)[0] == doctest::Approx(-1.0));
  x << 0.7;
  CHECK(I.contains(x));
  CHECK(I.boundary_distance(x) == doctest::Approx(1.7));

  // custom domain wrapping the unit ball reproduces the built-in one
  const auto B = ConvexDomain::ball(vec2(0.0, 0.0), 1.0);
  ConvexDomain::CustomFns fns;
  fns.level = [&](const Vector& p) { return B.level(p); };
  fns.grad_level = [&](const Vector& p, Vector& out) { B.grad_level(p, out); };
  fns.project = [&](const Vector& p, Vector& out) { B.project(p, out); };
  const auto C = ConvexDomain::custom(2, std::move(fns));
  for (int i = 0; i < 50; ++i) {
    const Vector p = random_point(91, static_cast<std::uint64_t>(i), 2, 2.0);
    CHECK(C.level(p) == B.level(p));
    CHECK(C.project(p) == B.project(p));
    CHECK(C.grad_level(p) == B.grad_level(p));
  }
}

TEST_CASE("validation and bounding boxes") {
  CHECK_THROWS_AS(ConvexDomain::ball(vec2(0, 0), -1.0), InvalidInput);
  CHECK_THROWS_AS(ConvexDomain::ellipsoid(vec2(0, 0), vec2(1.0, 0.0)), InvalidInput);
  CHECK_THROWS_AS(ConvexDomain::interval(2.0, 2.0), InvalidInput);

  const auto G = ConvexDomain::ball(vec2(0, 0), 1.0);
  Vector bad = vec2(std::numeric_limits<double>::quiet_NaN(), 0.0);
  CHECK_THROWS_AS(G.level(bad), InvalidInput);
  CHECK_THROWS_AS(G.project(bad), InvalidInput);

  const auto E = ConvexDomain::ellipsoid(vec2(1.0, -1.0), vec2(2.0, 0.5));
  const auto [lo, hi] = E.bounding_box(0.5);
  for (int i = 0; i < 100; ++i) {
    const double th = 2.0 * M_PI * i / 100.0;
    const Vector b = vec2(1.0 + 2.0 * std::cos(th), -1.0 + 0.5 * std::sin(th));
    CHECK((b.array() >= lo.array()).all());
    CHECK((b.array() <= hi.array()).all());
  }

  const auto e = domain_eval(G, vec2(2.0, 0.0));
  CHECK(e.level > 0.0);
  CHECK(e.distance == doctest::Approx(1.0));
  CHECK(e.projection.isApprox(vec2(1.0, 0.0), 1e-14));
}
