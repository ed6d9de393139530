#include <gtest/gtest.h>

#include <random>

#include "conetrace/metric.hpp"

using namespace conetrace;

namespace {

// Scaled octagon: cone points are far from the origin, so the start face is a large flat
// chart where Busemann values have closed forms.
const ConeSurface& big() {
  static const ConeSurface s = regular_polygon_surface("big", 8, 1000.0);
  return s;
}

const double kDir = 0.3;
Vec2 along(double t, double dir = kDir) { return unit(dir) * t; }
Vec2 left_normal(double dir = kDir) { return unit(dir + kPi / 2); }

}  // namespace

TEST(Busemann, PointAheadOnTheRay) {
  const ConeSurface& s = big();
  BusemannEstimate b = busemann(s, {0, {0, 0}, kDir}, {0, {0, 0}}, {0, along(2.0)});
  EXPECT_TRUE(b.converged);
  EXPECT_NEAR(b.value, -2.0, 1e-6);
}

TEST(Busemann, PerpendicularOffsetFollowsPythagoras) {
  const ConeSurface& s = big();
  std::vector<double> sched{1, 2, 4, 8, 16, 32, 64, 128, 256};
  BusemannEstimate b = busemann(s, {0, {0, 0}, kDir}, {0, {0, 0}}, {0, left_normal()}, sched, 1e-12);
  ASSERT_EQ(b.history.size(), sched.size());
  for (auto [t, a] : b.history) EXPECT_NEAR(a, std::sqrt(t * t + 1) - t, 1e-9) << t;
  // With the default schedule the limit is zero.
  EXPECT_NEAR(busemann(s, {0, {0, 0}, kDir}, {0, {0, 0}}, {0, left_normal()}).value, 0.0, default_busemann_tol(s));
}

TEST(Busemann, SamePointIsZero) {
  const ConeSurface& s = big();
  BusemannEstimate b = busemann(s, {0, {0, 0}, kDir}, {0, {30, -20}}, {0, {30, -20}});
  EXPECT_NEAR(b.value, 0.0, 1e-9);
}

TEST(Busemann, LipschitzAndMonotoneOnUnitOctagon) {
  ConeSurface s = builtin("octagon6pi");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.8, 0.8), a(0, kTwoPi);
  int done = 0;
  while (done < 25) {
    Vec2 o{u(rng), u(rng)}, x{u(rng), u(rng)}, xp{u(rng), u(rng)};
    if (!s.contains(0, o, -1e-3) || !s.contains(0, x, -1e-3) || !s.contains(0, xp, -1e-3)) continue;
    TangentState st{0, o, a(rng)};
    BusemannEstimate b;
    try {
      b = busemann(s, st, {0, x}, {0, xp});
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::ConeOnRay);
      continue;
    }
    EXPECT_LE(std::abs(b.value), dist(x, xp) + default_busemann_tol(s));
    BusemannEstimate m = busemann(s, st, {0, o}, {0, xp});
    for (size_t k = 1; k < m.history.size(); ++k) EXPECT_LE(m.history[k].second, m.history[k - 1].second + 1e-9);
    ++done;
  }
}

TEST(Busemann, ConeOnRay) {
  ConeSurface s = builtin("octagon6pi");
  try {
    busemann(s, {0, {0, 0}, kPi / 8}, {0, {0, 0}}, {0, {0.1, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConeOnRay);
  }
}

TEST(Reparam, TimeShift) {
  const ConeSurface& s = big();
  RealizedPolyline g1 = geodesic_ray(s, {0, {0, 0}, kDir}, 130000);
  RealizedPolyline g2 = geodesic_ray(s, {0, along(3.0), kDir}, 130000);
  Reparam r = equidistant_reparam(s, g1, g2, chart_segment(s, 0, {0, 0}, along(3.0)));
  EXPECT_NEAR(r.c, 3.0, default_busemann_tol(s));
  for (auto p : convergence_profile(s, g1, g2, chart_segment(s, 0, {0, 0}, along(3.0)), r, 5000, 6))
    EXPECT_NEAR(p.dist, 0.0, 1e-6);
}

TEST(Reparam, ParallelOffset) {
  const ConeSurface& s = big();
  RealizedPolyline g1 = geodesic_ray(s, {0, {0, 0}, kDir}, 130000);
  RealizedPolyline g2 = geodesic_ray(s, {0, left_normal(), kDir}, 130000);
  Reparam r = equidistant_reparam(s, g1, g2, chart_segment(s, 0, {0, 0}, left_normal()));
  EXPECT_NEAR(r.c, 0.0, default_busemann_tol(s));
}

TEST(Reparam, AntiParallelHasNoBracket) {
  const ConeSurface& s = big();
  RealizedPolyline g1 = geodesic_ray(s, {0, {0, 0}, kDir}, 130000);
  RealizedPolyline g2 = geodesic_ray(s, {0, left_normal(), kDir + kPi}, 130000);
  try {
    equidistant_reparam(s, g1, g2, chart_segment(s, 0, {0, 0}, left_normal()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoBracket);
  }
}

TEST(Reparam, FlatStripProfileIsConstant) {
  ConeSurface s = builtin("octagon6pi");
  const double a = std::cos(kPi / 8);
  RealizedPolyline g1 = geodesic_ray(s, {0, {-a, 0.0}, 0.0}, 200);
  RealizedPolyline g2 = geodesic_ray(s, {0, {-a, 0.1}, 0.0}, 200);
  Polyline tether = chart_segment(s, 0, {-a, 0.0}, {-a, 0.1});
  Reparam r = equidistant_reparam(s, g1, g2, tether);
  EXPECT_NEAR(r.c, 0.0, default_busemann_tol(s));
  auto prof = convergence_profile(s, g1, g2, tether, r, 60, 13);
  for (auto p : prof) EXPECT_NEAR(p.dist, prof.front().dist, 1e-6);
  EXPECT_NEAR(prof.front().dist, 0.1, 1e-4);
}
