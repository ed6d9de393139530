#include <gtest/gtest.h>

#include <random>

#include "conetrace/metric.hpp"
#include "conetrace/polyline.hpp"

using namespace conetrace;

namespace {

// Closed polygonal walk at radius r around a cone apex, sweeping `phi` radians of cone
// angle in small chords, each traced from its own corner chart.
Polyline circle_walk(const ConeSurface& s, int cls, double c0, double phi, double r, int steps) {
  Polyline P;
  double dphi = phi / steps;
  for (int k = 0; k < steps; ++k) {
    double c = c0 + k * dphi;
    auto d = s.direction_at(cls, c);
    Vec2 v = s.vertex(d.corner.face, d.corner.vertex);
    Vec2 p = v + unit(d.chart_dir) * r;
    Vec2 q = v + unit(d.chart_dir + dphi) * r;
    GeodesicPath g = trace(s, normalize_state(s, {d.corner.face, p, (q - p).arg()}), dist(p, q));
    Polyline leg = from_path(s, g);
    P = k == 0 ? leg : concat(s, P, leg);
  }
  return P;
}

// Law of cosines on a cone of angle theta: two points at radius r swept apart by phi.
// The apex is a point of the surface, so only phi mod theta matters.
double cone_chord(double r, double phi, double theta) {
  double sep = wrap(phi, theta);
  double a = std::min(sep, theta - sep);
  return a >= kPi ? 2 * r : 2 * r * std::sin(a / 2);
}

void expect_taut(const ConeSurface& s, const Polyline& P) {
  for (size_t i = 1; i + 1 < P.anchors.size(); ++i) {
    const Anchor& a = P.anchors[i];
    ASSERT_EQ(a.kind, Anchor::Vertex);
    EXPECT_GE(std::min(left_angle(s, a), right_angle(s, a)), kPi - 1e-9);
  }
}

}  // namespace

TEST(Tauten, StraightensInsideAFace) {
  ConeSurface s = builtin("octagon6pi");
  Polyline P = concat(s, chart_segment(s, 0, {-0.5, 0}, {0, 0.4}), chart_segment(s, 0, {0, 0.4}, {0.5, 0.1}));
  Polyline T = tauten(s, P);
  EXPECT_NEAR(T.length(), dist({-0.5, 0}, {0.5, 0.1}), 1e-12);
  EXPECT_EQ(T.anchors.size(), 2u);
}

TEST(Tauten, BacktrackCancels) {
  ConeSurface s = builtin("octagon6pi");
  Polyline P = concat(s, chart_segment(s, 0, {-0.5, 0}, {0.3, 0}), chart_segment(s, 0, {0.3, 0}, {0.1, 0}));
  EXPECT_NEAR(tauten(s, P).length(), 0.6, 1e-12);
}

TEST(Tauten, WalkAroundConeMatchesLawOfCosines) {
  ConeSurface s = builtin("octagon6pi");
  const double r = 0.2;
  const double theta = s.cone_angle(0);
  for (double phi : {0.7, 2.0, 3.0, 3.3, 5.0, 9.0, 17.0, 6 * kPi + 1.0, 12 * kPi + 4.0}) {
    Polyline T = tauten(s, circle_walk(s, 0, 0.4, phi, r, 40));
    double expected = cone_chord(r, phi, theta);
    EXPECT_NEAR(T.length(), expected, 1e-10) << phi;
    expect_taut(s, T);
    EXPECT_EQ(T.cone_anchor_count(), expected == 2 * r ? 1 : 0) << phi;
  }
}

TEST(Tauten, LengthNeverIncreases) {
  ConeSurface s = builtin("decagon4pi4pi");
  TautStats st;
  tauten(s, circle_walk(s, 1, 0.0, 7.0, 0.15, 60), {}, &st);
  double prev = 1e300;
  for (double L : st.lengths) {
    EXPECT_LE(L, prev + 1e-12);
    prev = L;
  }
}

TEST(Tauten, ShortPathsMatchLocalDistance) {
  // Two traced legs of total length below half the shortest saddle loop are homotopic to
  // the shortest path between their ends, so tautening must reproduce the surface distance.
  for (const char* name : {"octagon6pi", "decagon4pi4pi"}) {
    ConeSurface s = builtin(name);
    const double leg = 0.45 * min_cone_separation(s) / 2;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ang(0, kTwoPi), len(0.2 * leg, leg), rad(0.02, 0.15);
    int checked = 0, via_cone = 0;
    for (int i = 0; i < 200 && checked < 60; ++i) {
      // Start near a random vertex so that cone points get involved.
      int v = static_cast<int>(rng() % s.edge_count(0));
      Vec2 x = s.vertex(0, v) + (s.centroid(0) - s.vertex(0, v)) * rad(rng);
      GeodesicPath g1 = trace(s, normalize_state(s, {0, x, ang(rng)}), len(rng));
      if (g1.hit_cone()) continue;
      GeodesicPath g2 = trace(s, normalize_state(s, {g1.end_state().face, g1.end_state().point, ang(rng)}), len(rng));
      if (g2.hit_cone()) continue;
      Polyline P = concat(s, from_path(s, g1), from_path(s, g2));
      TangentState y = g2.end_state();
      double d = local_distance(s, {0, x}, {y.face, y.point}, 10.0);
      Polyline T = tauten(s, P);
      EXPECT_NEAR(T.length(), d, 1e-10) << name << " " << i;
      expect_taut(s, T);
      ++checked;
      via_cone += T.cone_anchor_count() > 0;
    }
    // Short walks around each cone, sweeping more than pi, do bend at the apex.
    for (int cls : s.cone_classes())
      for (int k = 0; k < 10; ++k) {
        double r = rad(rng) * 0.2, c0 = ang(rng), phi = kPi + ang(rng) / 2;
        Polyline P = circle_walk(s, cls, c0, phi, r, 5);
        auto x = s.direction_at(cls, c0);
        auto y = s.direction_at(cls, c0 + phi);
        SurfacePoint px{x.corner.face, s.vertex(x.corner.face, x.corner.vertex) + unit(x.chart_dir) * r};
        SurfacePoint py{y.corner.face, s.vertex(y.corner.face, y.corner.vertex) + unit(y.chart_dir) * r};
        Polyline T = tauten(s, P);
        EXPECT_NEAR(T.length(), local_distance(s, px, py, 10.0), 1e-10) << name;
        via_cone += T.cone_anchor_count() > 0;
      }
    EXPECT_GE(checked, 40);
    EXPECT_GT(via_cone, 5) << name;
  }
}

TEST(Realize, LegsLandOnAnchors) {
  ConeSurface s = builtin("octagon6pi");
  Polyline T = tauten(s, circle_walk(s, 0, 0.4, 9.0, 0.2, 40));
  RealizedPolyline R = realize(s, T);
  ASSERT_EQ(R.legs.size(), T.legs.size());
  for (size_t i = 0; i < R.legs.size(); ++i) {
    EXPECT_NEAR(R.legs[i].length, T.legs[i], 1e-9);
    if (T.anchors[i + 1].kind == Anchor::Vertex) {
      ASSERT_TRUE(R.legs[i].hit_cone());
      EXPECT_EQ(R.legs[i].cone_hit().cls, T.anchors[i + 1].cls);
    }
  }
}

TEST(Realize, SplitAtKeepsLength) {
  ConeSurface s = builtin("octagon6pi");
  RealizedPolyline R = realize(s, tauten(s, circle_walk(s, 0, 0.4, 9.0, 0.2, 40)));
  for (double t : {0.05, 0.2, 0.33}) {
    auto [pre, suf] = split_at(s, R, t);
    EXPECT_NEAR(pre.length(), t, 1e-12);
    EXPECT_NEAR(suf.length(), R.length() - t, 1e-12);
    EXPECT_NEAR(tauten(s, concat(s, pre, suf)).length(), R.length(), 1e-10);
  }
}

TEST(Tauten, IndependentOfCutOrder) {
  // Reversal and extra subdivision change which wedges get cut first; the geodesic of
  // the class must not depend on that.
  ConeSurface s = builtin("octagon6pi");
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-0.8, 0.8), a(0, kTwoPi), l(5, 60);
  int done = 0;
  while (done < 20) {
    Vec2 o{u(rng), u(rng)}, x{u(rng), u(rng)};
    if (!s.contains(0, o, -1e-3) || !s.contains(0, x, -1e-3)) continue;
    GeodesicPath g = trace(s, {0, o, a(rng)}, l(rng));
    if (g.hit_cone()) continue;
    RealizedPolyline R = realize(s, from_path(s, g));
    Polyline P = concat(s, chart_segment(s, 0, x, o), R.poly);
    auto [pre, suf] = split_at(s, R, 0.37 * g.length);
    Polyline Q = concat(s, concat(s, chart_segment(s, 0, x, o), pre), suf);
    double L = tauten(s, P).length();
    EXPECT_NEAR(tauten(s, reversed(P)).length(), L, 1e-9);
    EXPECT_NEAR(tauten(s, Q).length(), L, 1e-9);
    EXPECT_LE(L, P.length() + 1e-12);
    ++done;
  }
}

TEST(Tauten, EveryStepStaysConsistent) {
  // Tether plus a long ray, folded back on itself: long thin wedges, spikes where the
  // two halves coincide, and rows of collinear cones along cylinder directions.
  ConeSurface s = builtin("octagon6pi");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 0.5), a(0, kTwoPi);
  int done = 0;
  while (done < 8) {
    Vec2 p1{u(rng), u(rng)};
    Vec2 p2 = p1 + unit(a(rng));
    double dir = a(rng);
    if (!s.contains(0, p2, -1e-3)) continue;
    GeodesicPath g = trace(s, {0, p1, dir}, 150);
    if (g.hit_cone()) continue;
    RealizedPolyline g1 = realize(s, from_path(s, g));
    Polyline tether = chart_segment(s, 0, p1, p2);
    TautOptions opt;
    double worst = 0.0;
    opt.on_step = [&](const Polyline& Q) { worst = std::max(worst, leg_mismatch(s, Q)); };
    RealizedPolyline g2 = realize(s, tauten(s, concat(s, reversed(tether), g1.poly), opt));
    EXPECT_LE(worst, 1e-6);
    EXPECT_LE(leg_mismatch(s, g2.poly), 1e-6);
    // Back along g1, across the tether and out along g2 ends where g1 ends.
    Polyline U = concat(s, concat(s, reversed(g1.poly), tether), g2.poly);
    worst = 0.0;
    EXPECT_NEAR(tauten(s, U, opt).length(), 0.0, 1e-6);
    EXPECT_LE(worst, 1e-6);
    ++done;
  }
}
