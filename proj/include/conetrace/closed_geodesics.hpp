#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "polyline.hpp"
#include "tracer.hpp"
#include "unfolding.hpp"

namespace conetrace {

struct ConePassage {
  int cls = -1;
  double left = 0.0;   // side angle on the left of the direction of travel
  double right = 0.0;
};

/// A closed geodesic.  `cycle` is a closed polyline whose last anchor is its first one
/// again (the first anchor's `back` closes the loop); through-cone cycles start at a cone
/// passage.  Cone-free cycles have a single leg with `closed_period` set.
struct ClosedGeodesic {
  Polyline cycle;
  std::vector<GeodesicPath> legs;
  double period = 0.0;
  std::vector<ConePassage> passages;
  bool through_cones = false;
  PlaneIsometry holonomy;
};

struct FlatCylinder {
  ClosedGeodesic core;
  double width_left = 0.0;
  double width_right = 0.0;
  double circumference = 0.0;
};

struct ShortenOptions {
  int max_rounds = 1000;
  double tol = -1.0;  // per-round length decrease; negative: 1e-12 * diam_hint
  TautOptions taut;
};

struct ShortenStats {
  int rounds = 0;
  std::vector<double> lengths;  // input length, then the length after every round
};

namespace detail {

inline bool same_point(const ConeSurface& s, const Anchor& a, const Anchor& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == Anchor::Vertex) return a.cls == b.cls;
  try {
    chart_rotation(s, a.face, a.point, b.face, b.point);
    return true;
  } catch (const Error&) {
    return false;
  }
}

/// The basepoint of a closed polyline with both its directions in the first anchor's terms.
inline Anchor closing_anchor(const ConeSurface& s, const Polyline& P) {
  Anchor j = P.anchors.front();
  const Anchor& last = P.anchors.back();
  j.back = last.kind == Anchor::Vertex ? last.back
                                       : wrap(last.back + chart_rotation(s, last.face, last.point, j.face, j.point));
  return j;
}

inline bool is_stationary(const ConeSurface& s, const Anchor& a) {
  const double eps = ConeSurface::eps_angle();
  double L = left_angle(s, a), R = right_angle(s, a);
  if (a.kind == Anchor::Free) return std::abs(L - kPi) <= eps;
  return std::min(L, R) >= kPi - eps;
}

/// Start the closed polyline at anchor k instead of anchor 0.
inline Polyline rotate_cycle(const ConeSurface& s, const Polyline& P, int k) {
  if (k == 0) return P;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Polyline pre, suf;
  pre.anchors.assign(P.anchors.begin(), P.anchors.begin() + k + 1);
  pre.legs.assign(P.legs.begin(), P.legs.begin() + k);
  suf.anchors.assign(P.anchors.begin() + k, P.anchors.end());
  suf.legs.assign(P.legs.begin() + k, P.legs.end());
  pre.anchors.back().fwd = nan;
  suf.anchors.front().back = nan;
  pre.anchors.front().back = nan;
  Polyline out = concat(s, suf, pre);
  out.anchors.front().back = out.anchors.back().back;
  return out;
}

/// Chart map from the corner chart a vertex anchor leaves through to the corner chart it
/// arrives in, unfolding around the apex on the right of the passage.
inline PlaneIsometry passage_map(const ConeSurface& s, const Anchor& a, const GeodesicPath& arriving) {
  const Segment& last = arriving.segments.back();
  int v_in = detail::vertex_at(s, last.face, last.exit, 1e3 * s.eps_vertex());
  Vec2 apex_in = v_in >= 0 ? s.vertex(last.face, v_in) : last.exit;
  auto out = s.direction_at(a.cls, a.fwd);
  Vec2 apex_out = s.vertex(out.corner.face, out.corner.vertex);
  double right = wrap(a.fwd - a.back, s.cone_angle(a.cls));
  double rho = last.dir + kPi + right - out.chart_dir;
  PlaneIsometry r(rho, {});
  return PlaneIsometry(rho, apex_in - r.rotate(apex_out));
}

inline ClosedGeodesic assemble(const ConeSurface& s, const Polyline& cycle) {
  ClosedGeodesic g;
  g.cycle = cycle;
  g.period = cycle.length();
  Polyline open = cycle;
  open.anchors.front().back = std::numeric_limits<double>::quiet_NaN();
  RealizedPolyline R = realize(s, open);
  g.legs = R.legs;
  g.cycle.anchors = R.poly.anchors;
  g.cycle.legs = R.poly.legs;
  g.cycle.anchors.front().back = cycle.anchors.front().back;
  g.cycle.anchors.back().fwd = cycle.anchors.front().fwd;
  g.through_cones = g.cycle.anchors.front().kind == Anchor::Vertex;
  PlaneIsometry D = PlaneIsometry::identity();
  const int n = static_cast<int>(g.legs.size());
  for (int i = 0; i < n; ++i) {
    const GeodesicPath& leg = g.legs[i];
    for (int k = 0; k < leg.junction_count(); ++k) D = D * leg.events[k].transition.inverse();
    const Anchor& a = g.cycle.anchors[i + 1 == n ? 0 : i + 1];
    if (a.kind == Anchor::Vertex) {
      g.passages.push_back({a.cls, left_angle(s, a), right_angle(s, a)});
      D = D * passage_map(s, a, leg);
    } else if (i + 1 < n) {
      const Segment& sg = leg.segments.back();
      const Anchor& b = g.cycle.anchors[i + 1];
      // Chart change at a free joint sitting on an edge.
      if (sg.face != b.face || dist(sg.exit, b.point) > 1e3 * s.eps_geom())
        for (int e = 0; e < s.edge_count(sg.face); ++e)
          if (s.partner(sg.face, e).face == b.face && dist(s.transition(sg.face, e)(sg.exit), b.point) <= 1e3 * s.eps_geom()) {
            D = D * s.transition(sg.face, e).inverse();
            break;
          }
    }
  }
  // Cone-free loops leave and return in the basepoint's chart: close the chain there.
  if (!g.through_cones) {
    const Segment& sg = g.legs.back().segments.back();
    const Anchor& b = g.cycle.anchors.front();
    if (sg.face != b.face || dist(sg.exit, b.point) > 1e3 * s.eps_geom())
      for (int e = 0; e < s.edge_count(sg.face); ++e)
        if (s.partner(sg.face, e).face == b.face && dist(s.transition(sg.face, e)(sg.exit), b.point) <= 1e3 * s.eps_geom()) {
          D = D * s.transition(sg.face, e).inverse();
          break;
        }
    if (n == 1) g.legs.front().closed_period = g.period;
  }
  g.holonomy = D;
  return g;
}

/// Cone passages compared by (class, outgoing coordinate); picks the canonical start.
inline int canonical_start(const ConeSurface& s, const Polyline& P) {
  int best = -1;
  for (int i = 0; i + 1 < static_cast<int>(P.anchors.size()); ++i) {
    const Anchor& a = P.anchors[i];
    if (a.kind != Anchor::Vertex) continue;
    if (best < 0) {
      best = i;
      continue;
    }
    const Anchor& b = P.anchors[best];
    double ca = std::round(wrap(a.fwd, s.cone_angle(a.cls)) * 1e9), cb = std::round(wrap(b.fwd, s.cone_angle(b.cls)) * 1e9);
    if (a.cls < b.cls || (a.cls == b.cls && ca < cb)) best = i;
  }
  return best;
}

}  // namespace detail

/// Distance from the core to the nearest cone point on its left (side = +1) or right
/// (side = -1), by sweeping perpendicular lines out of one period of the core.
inline double cylinder_half_width(const ConeSurface& s, const GeodesicPath& core, double period, int side,
                                  long budget = 1'000'000) {
  if (s.cone_classes().empty()) return std::numeric_limits<double>::infinity();
  auto D = segment_placements(core);
  const Segment& s0 = core.segments.front();
  // Chart of the first segment -> frame with the core on the x axis, `side` upward.
  PlaneIsometry align = PlaneIsometry(-s0.dir, {}) * PlaneIsometry::translation(-s0.entry);
  if (side < 0) align = PlaneIsometry(kPi, {}) * align;
  Unfolder U(s, budget);
  int w = U.add_sweep({Sweep::Parallel, {}, {1, 0}});
  for (size_t k = 0; k < core.segments.size(); ++k) {
    const Segment& sg = core.segments[k];
    double x0 = sg.arc_start, x1 = std::min(period, sg.arc_start + sg.length);
    if (x1 <= x0) continue;
    UnfoldingNode n;
    n.face = sg.face;
    n.place = align * D[k];
    n.sweep = w;
    n.lo = side > 0 ? -x1 : x0;
    n.hi = side > 0 ? -x0 : x1;
    U.push(n);
  }
  double best = std::numeric_limits<double>::infinity();
  U.run(
      [&](const UnfoldingNode& n) {
        for (const VisibleVertex& v : U.visible_vertices(n, 1e-12))
          if (s.is_cone(s.class_of(n.face, v.vertex))) best = std::min(best, v.value);
      },
      [&] { return best; }, [](const UnfoldingNode&, Vec2, Vec2) { return true; });
  if (U.budget_exhausted()) throw Error(ErrorCode::BudgetExhausted, "cylinder sweep exceeded its node budget");
  return best;
}

inline FlatCylinder flat_cylinder(const ConeSurface& s, const ClosedGeodesic& g) {
  if (g.through_cones || g.legs.size() != 1) throw Error(ErrorCode::NotConeFree, "closed geodesic passes through a cone point");
  FlatCylinder c;
  c.core = g;
  c.circumference = g.period;
  c.width_left = cylinder_half_width(s, g.legs.front(), g.period, +1);
  c.width_right = cylinder_half_width(s, g.legs.front(), g.period, -1);
  return c;
}

/// Closed geodesic from a cone-free state that closes up after `period`.
inline ClosedGeodesic closed_geodesic_from_state(const ConeSurface& s, TangentState st, double period) {
  st = normalize_state(s, st);
  GeodesicPath g = trace(s, st, period);
  if (g.hit_cone()) throw Error(ErrorCode::NotConeFree, "trace hits a cone point");
  TangentState e = normalize_state(s, g.end_state());
  if (e.face != st.face || dist(e.point, st.point) > 1e3 * s.eps_geom() ||
      std::abs(wrap_signed(e.direction - st.direction)) > 1e3 * ConeSurface::eps_angle())
    throw Error(ErrorCode::NotALoop, "trace does not close up after the period");
  Polyline P = from_path(s, g);
  P.anchors.front().back = wrap(P.anchors.back().back + chart_rotation(s, P.anchors.back().face, P.anchors.back().point,
                                                                        P.anchors.front().face, P.anchors.front().point));
  return detail::assemble(s, P);
}

/// Parallel translate of a cone-free closed geodesic by `offset` to its left.
inline ClosedGeodesic translate(const ConeSurface& s, const ClosedGeodesic& g, double offset) {
  if (g.through_cones) throw Error(ErrorCode::NotConeFree, "closed geodesic passes through a cone point");
  TangentState st = g.legs.front().start;
  if (std::abs(offset) > 0.0) {
    double n = st.direction + (offset > 0 ? kPi / 2 : -kPi / 2);
    GeodesicPath side = trace(s, normalize_state(s, {st.face, st.point, n}), std::abs(offset));
    if (side.hit_cone()) throw Error(ErrorCode::NotConeFree, "translate leaves the cylinder");
    TangentState e = side.end_state();
    st = {e.face, e.point, wrap(e.direction - (offset > 0 ? kPi / 2 : -kPi / 2))};
  }
  return closed_geodesic_from_state(s, st, g.period);
}

/// Curve shortening in the free homotopy class of a closed polyline.  Each round
/// tautens the loop with its basepoint fixed, then moves the basepoint half way round.
inline ClosedGeodesic shorten(const ConeSurface& s, const Polyline& loop, const ShortenOptions& opt = {},
                              ShortenStats* stats = nullptr) {
  if (loop.anchors.size() < 2 || !detail::same_point(s, loop.anchors.front(), loop.anchors.back()))
    throw Error(ErrorCode::NotALoop, "polyline does not close up");
  const double tol = opt.tol < 0 ? 1e-12 * s.diam_hint() : opt.tol;
  ShortenStats local;
  ShortenStats& st = stats ? *stats : local;
  st.lengths.assign(1, loop.length());
  Polyline P = loop;
  P.anchors.front().back = std::numeric_limits<double>::quiet_NaN();
  double prev = loop.length();
  bool cone_based = false;
  for (int round = 0; round < opt.max_rounds; ++round) {
    Polyline T = tauten(s, P, opt.taut);
    st.rounds = round + 1;
    st.lengths.push_back(T.length());
    if (T.length() <= s.eps_vertex()) throw Error(ErrorCode::NullHomotopic, "loop tautens to a point");
    Anchor j = detail::closing_anchor(s, T);
    bool settled = prev - T.length() <= tol && round > 0;
    prev = T.length();
    if (detail::is_stationary(s, j) || (settled && j.kind == Anchor::Free &&
                                        std::abs(left_angle(s, j) - kPi) <= 1e3 * ConeSurface::eps_angle())) {
      T.anchors.front().back = j.back;
      int k = detail::canonical_start(s, T);
      if (k >= 0) {
        // Re-taut from the canonical cone passage: leftover straight joints merge away.
        T = detail::rotate_cycle(s, T, k);
        T.anchors.front().back = std::numeric_limits<double>::quiet_NaN();
        T = tauten(s, T, opt.taut);
        T.anchors.front().back = T.anchors.back().back;
        return detail::assemble(s, T);
      }
      // Cone free: one straight leg from the basepoint.
      ClosedGeodesic g = closed_geodesic_from_state(s, leaving_state(s, T.anchors.front()), T.length());
      FlatCylinder c = flat_cylinder(s, g);
      if (!std::isfinite(c.width_left) || !std::isfinite(c.width_right)) return g;
      return translate(s, g, 0.5 * (c.width_left - c.width_right));
    }
    // A loop through a cone point is best based there: the geodesic loop at the apex is
    // exact, and closes up whenever the class's closed geodesic passes through it.
    int k = -1;
    if (!cone_based)
      for (int i = 1; i + 1 < static_cast<int>(T.anchors.size()); ++i)
        if (T.anchors[i].kind == Anchor::Vertex) {
          k = i;
          break;
        }
    if (k > 0) {
      T.anchors.front().back = j.back;
      P = detail::rotate_cycle(s, T, k);
      P.anchors.front().back = std::numeric_limits<double>::quiet_NaN();
      cone_based = true;
      continue;
    }
    cone_based = false;
    RealizedPolyline R = realize(s, T);
    auto [pre, suf] = split_at(s, R, 0.5 * R.length());
    P = concat(s, suf, pre);
  }
  throw Error(ErrorCode::NoConvergence, "shortening did not settle in " + std::to_string(opt.max_rounds) + " rounds");
}

struct Uniqueness {
  bool unique = false;
  int left_witness = -1;   // passage with left angle > pi
  int right_witness = -1;  // passage with right angle > pi
  bool translatable_left = false;
  bool translatable_right = false;
};

/// Unique in its class iff some passage opens more than pi on the left and some passage
/// more than pi on the right; otherwise the flat side allows parallel translation.
inline Uniqueness is_unique_in_class(const std::vector<ConePassage>& passages) {
  const double eps = ConeSurface::eps_angle();
  Uniqueness u;
  for (int i = 0; i < static_cast<int>(passages.size()); ++i) {
    if (u.left_witness < 0 && passages[i].left > kPi + eps) u.left_witness = i;
    if (u.right_witness < 0 && passages[i].right > kPi + eps) u.right_witness = i;
  }
  u.translatable_left = u.left_witness < 0;
  u.translatable_right = u.right_witness < 0;
  u.unique = !u.translatable_left && !u.translatable_right;
  return u;
}

inline Uniqueness is_unique_in_class(const ClosedGeodesic& g) { return is_unique_in_class(g.passages); }

struct CertificateCheck {
  bool ok = false;
  double max_mismatch = 0.0;   // leg end vs next anchor, after re-tracing
  double min_side_angle = 0.0;
  double closure_error = 0.0;  // cone-free: end state vs start state
  std::string message;
};

/// Re-traces every leg from its anchor and checks landing, side angles and closure,
/// using only the stored anchors (nothing from the optimizer's state).
inline CertificateCheck check_certificate(const ConeSurface& s, const ClosedGeodesic& g) {
  CertificateCheck c;
  const double eps = ConeSurface::eps_angle();
  const auto& A = g.cycle.anchors;
  if (A.size() < 2 || A.size() != g.cycle.legs.size() + 1) {
    c.message = "malformed cycle";
    return c;
  }
  Polyline open = g.cycle;
  open.anchors.front().back = std::numeric_limits<double>::quiet_NaN();
  c.max_mismatch = leg_mismatch(s, open);
  c.min_side_angle = std::numeric_limits<double>::infinity();
  double sum_err = 0.0;
  for (size_t i = 0; i + 1 < A.size(); ++i) {
    const Anchor& a = A[i];
    double L = left_angle(s, a), R = right_angle(s, a);
    if (a.kind == Anchor::Vertex) {
      c.min_side_angle = std::min({c.min_side_angle, L, R});
      sum_err = std::max(sum_err, std::abs(L + R - s.cone_angle(a.cls)));
    } else {
      c.min_side_angle = std::min(c.min_side_angle, kPi - std::abs(L - kPi));
    }
  }
  if (!g.through_cones) {
    TangentState st = leaving_state(s, A.front());
    GeodesicPath t = trace(s, normalize_state(s, st), g.period);
    if (t.hit_cone()) {
      c.message = "cone-free core hits a cone point";
      return c;
    }
    TangentState e = normalize_state(s, t.end_state());
    st = normalize_state(s, st);
    c.closure_error = e.face == st.face ? dist(e.point, st.point) + std::abs(wrap_signed(e.direction - st.direction))
                                        : std::numeric_limits<double>::infinity();
  }
  std::ostringstream msg;
  bool ok = true;
  if (!(c.max_mismatch <= 1e-6 * s.diam_hint())) ok = false, msg << "leg mismatch " << c.max_mismatch << "; ";
  if (!(c.min_side_angle >= kPi - eps)) ok = false, msg << "side angle " << c.min_side_angle << " below pi; ";
  if (sum_err > eps) ok = false, msg << "side angles do not add up to the cone angle; ";
  if (!(c.closure_error <= 1e-6 * s.diam_hint())) ok = false, msg << "core does not close; ";
  c.ok = ok;
  c.message = ok ? "ok" : msg.str();
  return c;
}

/// Text certificate: period, passages, verdict and the holonomy at full precision.
inline std::string certificate_text(const ConeSurface& s, const ClosedGeodesic& g) {
  Uniqueness u = is_unique_in_class(g);
  char buf[256];
  std::ostringstream os;
  std::snprintf(buf, sizeof buf, "period %.17g\n", g.period);
  os << buf;
  os << "through_cones " << (g.through_cones ? "yes" : "no") << "\n";
  os << "passages " << g.passages.size() << "\n";
  for (size_t i = 0; i < g.passages.size(); ++i) {
    const ConePassage& p = g.passages[i];
    std::snprintf(buf, sizeof buf, "passage %zu class %d theta_left %.17g theta_right %.17g cone_angle %.17g\n", i, p.cls,
                  p.left, p.right, s.cone_angle(p.cls));
    os << buf;
  }
  os << "unique " << (u.unique ? "yes" : "no");
  if (u.unique) os << " left_witness " << u.left_witness << " right_witness " << u.right_witness;
  else os << " translatable" << (u.translatable_left ? " left" : "") << (u.translatable_right ? " right" : "");
  os << "\n";
  const PlaneIsometry& H = g.holonomy;
  double c = std::cos(H.rotation()), sn = std::sin(H.rotation());
  std::snprintf(buf, sizeof buf, "holonomy %.17g %.17g %.17g %.17g %.17g %.17g\n", c, -sn, H.translation().x, sn, c,
                H.translation().y);
  os << buf;
  CertificateCheck chk = check_certificate(s, g);
  os << "check " << (chk.ok ? "ok" : chk.message) << "\n";
  return os.str();
}

/// Path inside the surface from (fa, a) to (fb, b) through edge midpoints of a shortest
/// chain of adjacent faces.
inline Polyline connecting_path(const ConeSurface& s, int fa, Vec2 a, int fb, Vec2 b) {
  std::vector<int> from(s.face_count(), -2), via(s.face_count(), -1);
  std::vector<int> queue{fa};
  from[fa] = -1;
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    int f = queue[qi];
    for (int e = 0; e < s.edge_count(f); ++e) {
      int o = s.partner(f, e).face;
      if (from[o] != -2) continue;
      from[o] = f;
      via[o] = e;
      queue.push_back(o);
    }
  }
  std::vector<int> chain{fb};
  while (chain.back() != fa) chain.push_back(from[chain.back()]);
  std::reverse(chain.begin(), chain.end());
  Polyline P;
  int f = fa;
  Vec2 p = a;
  for (size_t i = 1; i < chain.size(); ++i) {
    int e = via[chain[i]];
    Vec2 m = (s.edge_start(f, e) + s.edge_end(f, e)) * 0.5;
    Polyline seg = chart_segment(s, f, p, m);
    P = P.anchors.empty() ? seg : concat(s, P, seg);
    Vec2 m2 = s.transition(f, e)(m);
    f = chain[i];
    p = m2;
  }
  Polyline last = chart_segment(s, f, p, b);
  return P.anchors.empty() ? last : concat(s, P, last);
}

struct UniqueSearch {
  std::optional<ClosedGeodesic> found;
  int loops_tried = 0;
  int null_homotopic = 0;
  int repeated_classes = 0;
};

/// Random loops (a traced geodesic closed up inside a face chain), shortened until one
/// is unique in its class.
inline UniqueSearch search_unique_closed(const ConeSurface& s, int budget, std::uint64_t seed = 0,
                                         double max_loop_diams = 3.0) {
  if (s.cone_classes().empty()) throw Error(ErrorCode::NoConePoints, "surface has no cone points");
  UniqueSearch out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::pair<double, PlaneIsometry>> seen;
  const double D = s.diam_hint();
  for (int i = 0; i < budget; ++i) {
    ++out.loops_tried;
    int f = static_cast<int>(rng() % s.face_count());
    // Random interior point: barycentric mix of the centroid and two adjacent vertices.
    int v = static_cast<int>(rng() % s.edge_count(f));
    double a = u01(rng), b = u01(rng);
    if (a + b > 1) a = 1 - a, b = 1 - b;
    Vec2 c = s.centroid(f);
    Vec2 p = c + (s.vertex(f, v) - c) * (0.9 * a) + (s.vertex(f, v + 1) - c) * (0.9 * b);
    double len = (0.5 + u01(rng) * (max_loop_diams - 0.5)) * D;
    GeodesicPath g = trace(s, normalize_state(s, {f, p, u01(rng) * kTwoPi}), len);
    if (g.hit_cone()) continue;
    TangentState e = g.end_state();
    Polyline loop = concat(s, from_path(s, g), connecting_path(s, e.face, e.point, f, p));
    ClosedGeodesic cg;
    try {
      cg = shorten(s, loop);
    } catch (const Error& err) {
      if (err.code() == ErrorCode::NullHomotopic) {
        ++out.null_homotopic;
        continue;
      }
      throw;
    }
    bool repeat = false;
    for (auto& [L, H] : seen)
      if (std::abs(L - cg.period) <= 1e-9 * D && dist(H.translation(), cg.holonomy.translation()) <= 1e-6 * D) repeat = true;
    if (repeat) {
      ++out.repeated_classes;
      continue;
    }
    seen.push_back({cg.period, cg.holonomy});
    if (is_unique_in_class(cg).unique && check_certificate(s, cg).ok) {
      out.found = cg;
      return out;
    }
  }
  return out;
}

inline ClosedGeodesic find_unique_closed(const ConeSurface& s, int budget, std::uint64_t seed = 0) {
  UniqueSearch r = search_unique_closed(s, budget, seed);
  if (!r.found) throw Error(ErrorCode::BudgetExhausted, "no unique closed geodesic in " + std::to_string(budget) + " loops");
  return *r.found;
}

}  // namespace conetrace
