#include <gtest/gtest.h>

#include <random>

#include "conetrace/closed_geodesics.hpp"

using namespace conetrace;

namespace {

const double kApothem = std::cos(kPi / 8);
const double kHalfWidth = std::sin(kPi / 8);

Polyline kinked_mid_loop(const ConeSurface& s, double kink = 0.1) {
  return concat(s, chart_segment(s, 0, {-kApothem, 0}, {0, kink}), chart_segment(s, 0, {0, kink}, {kApothem, 0}));
}

ConeSurface commutator_octagon() {
  ConeSurface o = builtin("octagon6pi");
  return ConeSurface::build("abAB", {o.face(0)}, {{{0, 0}, {0, 2}}, {{0, 1}, {0, 3}}, {{0, 4}, {0, 6}}, {{0, 5}, {0, 7}}});
}

ConeSurface split_torus() {
  return ConeSurface::build("split", {{{0, 0}, {1, 0}, {1, 1}}, {{0, 0}, {1, 1}, {0, 1}}},
                            {{{0, 2}, {1, 0}}, {{0, 0}, {1, 1}}, {{0, 1}, {1, 2}}});
}

// A traced geodesic from p closed back to p through face charts.
Polyline random_loop(const ConeSurface& s, std::mt19937_64& rng, double len) {
  std::uniform_real_distribution<double> a(0, kTwoPi), w(0.05, 0.3);
  for (;;) {
    int f = static_cast<int>(rng() % s.face_count());
    Vec2 c = s.centroid(f);
    Vec2 p = c + (s.vertex(f, static_cast<int>(rng() % s.edge_count(f))) - c) * w(rng);
    GeodesicPath g = trace(s, normalize_state(s, {f, p, a(rng)}), len);
    if (g.hit_cone()) continue;
    TangentState e = g.end_state();
    return concat(s, from_path(s, g), connecting_path(s, e.face, e.point, f, p));
  }
}

}  // namespace

TEST(Shorten, PerturbedMidLoopBecomesTheCore) {
  ConeSurface s = builtin("octagon6pi");
  ShortenStats st;
  ClosedGeodesic g = shorten(s, kinked_mid_loop(s), {}, &st);
  EXPECT_NEAR(g.period, 2 * kApothem, 1e-12);
  EXPECT_FALSE(g.through_cones);
  EXPECT_TRUE(g.passages.empty());
  ASSERT_EQ(g.legs.size(), 1u);
  ASSERT_TRUE(g.legs.front().closed_period.has_value());
  // Canonical central translate: the horizontal line through the center.
  TangentState c = g.legs.front().start;
  EXPECT_NEAR(std::abs(std::sin(c.direction)), 0.0, 1e-12);
  EXPECT_NEAR(c.point.y, 0.0, 1e-9);
  EXPECT_NEAR(g.holonomy.translation().norm(), g.period, 1e-12);
  EXPECT_TRUE(check_certificate(s, g).ok);
  for (size_t i = 1; i < st.lengths.size(); ++i) EXPECT_LE(st.lengths[i], st.lengths[i - 1] + 1e-15);
}

TEST(Shorten, Idempotent) {
  ConeSurface s = builtin("octagon6pi");
  ClosedGeodesic g = shorten(s, kinked_mid_loop(s));
  ShortenStats st;
  ClosedGeodesic h = shorten(s, g.cycle, {}, &st);
  EXPECT_LE(std::abs(h.period - g.period), 1e-12);
  EXPECT_EQ(st.rounds, 1);
  ClosedGeodesic u = find_unique_closed(s, 200, 7);
  EXPECT_LE(std::abs(shorten(s, u.cycle).period - u.period), 1e-12);
}

TEST(Shorten, SmallLoopIsNullHomotopic) {
  ConeSurface s = builtin("octagon6pi");
  Polyline P = concat(s, concat(s, chart_segment(s, 0, {0, 0}, {0.1, 0}), chart_segment(s, 0, {0.1, 0}, {0, 0.1})),
                      chart_segment(s, 0, {0, 0.1}, {0, 0}));
  try {
    shorten(s, P);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NullHomotopic);
  }
  try {
    shorten(s, chart_segment(s, 0, {0, 0}, {0.3, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotALoop);
  }
}

TEST(Shorten, RandomLoopsSatisfyTheCertificate) {
  for (const ConeSurface& s : {builtin("octagon6pi"), builtin("decagon4pi4pi"), commutator_octagon()}) {
    std::mt19937_64 rng(13);
    int done = 0, through = 0;
    while (done < 60) {
      Polyline loop = random_loop(s, rng, 1.0 + (rng() % 300) / 100.0);
      ShortenStats st;
      ClosedGeodesic g;
      try {
        g = shorten(s, loop, {}, &st);
      } catch (const Error& e) {
        ASSERT_EQ(e.code(), ErrorCode::NullHomotopic) << s.name();
        continue;
      }
      CertificateCheck c = check_certificate(s, g);
      EXPECT_TRUE(c.ok) << s.name() << " " << c.message;
      EXPECT_LE(g.period, loop.length() + 1e-12);
      for (size_t i = 1; i < st.lengths.size(); ++i) EXPECT_LE(st.lengths[i], st.lengths[i - 1] + 1e-12);
      // A closed curve is at least as long as the displacement of its development; only
      // a pure translation has a basepoint-free displacement.
      if (std::abs(g.holonomy.rotation()) < 1e-9) {
        EXPECT_GE(g.period, g.holonomy.translation().norm() - 1e-9) << s.name();
      }
      for (const ConePassage& p : g.passages) {
        EXPECT_GE(std::min(p.left, p.right), kPi - ConeSurface::eps_angle());
        EXPECT_NEAR(p.left + p.right, s.cone_angle(p.cls), ConeSurface::eps_angle());
      }
      // Reversal and a different basepoint describe the same class.
      ClosedGeodesic r = shorten(s, reversed(loop));
      EXPECT_NEAR(r.period, g.period, 1e-9) << s.name();
      EXPECT_EQ(is_unique_in_class(r).unique, is_unique_in_class(g).unique);
      RealizedPolyline R = realize(s, loop);
      auto [pre, suf] = split_at(s, R, 0.4 * R.length());
      ClosedGeodesic q = shorten(s, concat(s, suf, pre));
      EXPECT_NEAR(q.period, g.period, 1e-9) << s.name();
      through += g.through_cones;
      ++done;
    }
    EXPECT_GT(through, 5) << s.name();
  }
}

TEST(Shorten, TorusLoopHasNoCylinderWalls) {
  ConeSurface s = split_torus();
  // Once around horizontally, with a detour through the second face.
  Polyline P = concat(s, chart_segment(s, 0, {0.2, 0.1}, {0.9, 0.3}), connecting_path(s, 0, {0.9, 0.3}, 1, {0.3, 0.8}));
  P = concat(s, P, connecting_path(s, 1, {0.3, 0.8}, 0, {0.2, 0.1}));
  try {
    ClosedGeodesic g = shorten(s, P);
    EXPECT_FALSE(g.through_cones);
    EXPECT_NEAR(g.period, g.holonomy.translation().norm(), 1e-9);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NullHomotopic);
  }
}

TEST(Unique, PassageRule) {
  EXPECT_TRUE(is_unique_in_class({{0, 3 * kPi, 3 * kPi}}).unique);
  Uniqueness u = is_unique_in_class({{0, kPi, 5 * kPi}, {0, kPi, 5 * kPi}});
  EXPECT_FALSE(u.unique);
  EXPECT_TRUE(u.translatable_left);
  EXPECT_FALSE(u.translatable_right);
  EXPECT_EQ(u.right_witness, 0);
  Uniqueness none = is_unique_in_class(std::vector<ConePassage>{});
  EXPECT_FALSE(none.unique);
  EXPECT_TRUE(none.translatable_left && none.translatable_right);
  // Witnesses may sit at different passages.
  Uniqueness split = is_unique_in_class({{0, kPi, 5 * kPi}, {0, 5 * kPi, kPi}});
  EXPECT_TRUE(split.unique);
  EXPECT_EQ(split.left_witness, 1);
  EXPECT_EQ(split.right_witness, 0);
}

TEST(Unique, InvariantUnderRotationAndReversal) {
  std::vector<ConePassage> p{{0, kPi, 5 * kPi}, {0, 2 * kPi, 4 * kPi}, {0, kPi, 5 * kPi}};
  bool base = is_unique_in_class(p).unique;
  for (int k = 0; k < 3; ++k) {
    std::rotate(p.begin(), p.begin() + 1, p.end());
    EXPECT_EQ(is_unique_in_class(p).unique, base);
    auto r = p;
    std::reverse(r.begin(), r.end());
    for (auto& x : r) std::swap(x.left, x.right);
    EXPECT_EQ(is_unique_in_class(r).unique, base);
  }
}

TEST(Unique, MidLoopIsNotUnique) {
  ConeSurface s = builtin("octagon6pi");
  Uniqueness u = is_unique_in_class(shorten(s, kinked_mid_loop(s)));
  EXPECT_FALSE(u.unique);
  EXPECT_TRUE(u.translatable_left && u.translatable_right);
}

TEST(Unique, FoundOnOctagonWithCertificate) {
  ConeSurface s = builtin("octagon6pi");
  ClosedGeodesic g = find_unique_closed(s, 200);
  Uniqueness u = is_unique_in_class(g);
  ASSERT_TRUE(u.unique);
  EXPECT_GT(g.passages[u.left_witness].left, kPi);
  EXPECT_GT(g.passages[u.right_witness].right, kPi);
  EXPECT_TRUE(check_certificate(s, g).ok);
  // Every leg is a saddle connection: the sum of developed vertex-to-vertex distances.
  double sum = 0.0;
  for (const GeodesicPath& leg : g.legs) {
    ASSERT_TRUE(leg.hit_cone());
    auto dev = develop(leg);
    sum += dist(leg.start.point, dev.polyline.back());
  }
  EXPECT_NEAR(sum, g.period, 1e-9);
  std::string cert = certificate_text(s, g);
  EXPECT_NE(cert.find("unique yes"), std::string::npos);
  EXPECT_NE(cert.find("check ok"), std::string::npos);
}

TEST(Unique, BudgetAndPreconditions) {
  ConeSurface s = builtin("octagon6pi");
  try {
    find_unique_closed(s, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetExhausted);
  }
  try {
    find_unique_closed(split_torus(), 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConePoints);
  }
  // Deterministic per seed.
  EXPECT_EQ(find_unique_closed(s, 200, 3).period, find_unique_closed(s, 200, 3).period);
}

TEST(Certificate, RejectsTamperedGeodesics) {
  ConeSurface s = builtin("octagon6pi");
  ClosedGeodesic g = find_unique_closed(s, 200);
  ASSERT_TRUE(check_certificate(s, g).ok);
  ClosedGeodesic bent = g;
  bent.cycle.anchors[1].fwd += 1e-3;
  EXPECT_FALSE(check_certificate(s, bent).ok);
  ClosedGeodesic longer = g;
  longer.cycle.legs[0] += 1e-3;
  EXPECT_FALSE(check_certificate(s, longer).ok);
  ClosedGeodesic core = shorten(s, kinked_mid_loop(s));
  ClosedGeodesic tilted = core;
  tilted.cycle.anchors.front().fwd += 1e-4;
  EXPECT_FALSE(check_certificate(s, tilted).ok);
}

TEST(Cylinder, OctagonMidLoopWidths) {
  ConeSurface s = builtin("octagon6pi");
  ClosedGeodesic g = shorten(s, kinked_mid_loop(s));
  FlatCylinder c = flat_cylinder(s, g);
  EXPECT_NEAR(c.width_left, kHalfWidth, 1e-12);
  EXPECT_NEAR(c.width_right, kHalfWidth, 1e-12);
  EXPECT_NEAR(c.circumference, 2 * kApothem, 1e-12);
}

TEST(Cylinder, TranslatesStayClosedWithLinearWidths) {
  ConeSurface s = builtin("octagon6pi");
  ClosedGeodesic g = shorten(s, kinked_mid_loop(s));
  for (double off : {0.1, -0.25, 0.38}) {
    ClosedGeodesic t = translate(s, g, off);
    EXPECT_NEAR(t.period, g.period, 1e-12);
    CertificateCheck chk = check_certificate(s, t);
    EXPECT_TRUE(chk.ok) << chk.message;
    EXPECT_LE(chk.closure_error, 1e-8);
    FlatCylinder c = flat_cylinder(s, t);
    EXPECT_NEAR(c.width_left, kHalfWidth - off, 1e-12) << off;
    EXPECT_NEAR(c.width_right, kHalfWidth + off, 1e-12) << off;
  }
}

TEST(Cylinder, ConeLoopIsRejected) {
  ConeSurface s = builtin("octagon6pi");
  ClosedGeodesic u = find_unique_closed(s, 200);
  try {
    flat_cylinder(s, u);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotConeFree);
  }
  // A direction aimed at a vertex hits the cone before closing.
  EXPECT_THROW(closed_geodesic_from_state(s, {0, {0, 0}, kPi / 8}, 2.0), Error);
}

TEST(Cylinder, DecagonCylindersBoundedByCones) {
  // Cone-free results on another surface: parallel translates inside the widths close up.
  ConeSurface s = builtin("decagon4pi4pi");
  std::mt19937_64 rng(2);
  int done = 0;
  for (int i = 0; i < 200 && done < 5; ++i) {
    ClosedGeodesic g;
    try {
      g = shorten(s, random_loop(s, rng, 2.0));
    } catch (const Error&) {
      continue;
    }
    if (g.through_cones) continue;
    FlatCylinder c = flat_cylinder(s, g);
    EXPECT_NEAR(c.width_left, c.width_right, 1e-9);
    EXPECT_GT(c.width_left, 0.0);
    for (double f : {-0.9, 0.5}) EXPECT_TRUE(check_certificate(s, translate(s, g, f * c.width_left)).ok);
    ++done;
  }
  EXPECT_GE(done, 1);
}
