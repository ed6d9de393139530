#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <limits>
#include <vector>

#include "tracer.hpp"
#include "unfolding.hpp"

namespace conetrace {

/// A breakpoint of a piecewise geodesic.  Free anchors live in a face chart and carry
/// chart directions toward their neighbors; vertex anchors carry cone coordinates.
struct Anchor {
  enum Kind { Free, Vertex } kind = Free;
  int face = -1;
  Vec2 point;
  int cls = -1;
  double back = std::numeric_limits<double>::quiet_NaN();
  double fwd = std::numeric_limits<double>::quiet_NaN();

  static Anchor free_point(int face, Vec2 p) {
    Anchor a;
    a.face = face;
    a.point = p;
    return a;
  }
  static Anchor vertex(int cls) {
    Anchor a;
    a.kind = Vertex;
    a.cls = cls;
    return a;
  }
};

/// Total angle around an anchor: 2pi for free points, the cone angle for vertices.
inline double total_angle(const ConeSurface& s, const Anchor& a) {
  return a.kind == Anchor::Vertex ? s.cone_angle(a.cls) : kTwoPi;
}

/// Angle swept counterclockwise from the forward direction to the backward one.
inline double left_angle(const ConeSurface& s, const Anchor& a) { return wrap(a.back - a.fwd, total_angle(s, a)); }
inline double right_angle(const ConeSurface& s, const Anchor& a) { return total_angle(s, a) - left_angle(s, a); }

/// Anchors joined by straight cone-free legs; legs[i] joins anchors i and i+1.
struct Polyline {
  std::vector<Anchor> anchors;
  std::vector<double> legs;

  double length() const {
    double L = 0.0;
    for (double l : legs) L += l;
    return L;
  }
  int cone_anchor_count() const {
    int n = 0;
    for (const Anchor& a : anchors) n += a.kind == Anchor::Vertex;
    return n;
  }
};

/// Rotation taking chart directions at (f1, p1) to chart directions at (f2, p2), for two
/// chart descriptions of the same surface point.
inline double chart_rotation(const ConeSurface& s, int f1, Vec2 p1, int f2, Vec2 p2) {
  const double tol = 1e3 * s.eps_geom();
  if (f1 == f2 && dist(p1, p2) <= tol) return 0.0;
  for (int e = 0; e < s.edge_count(f1); ++e) {
    if (s.partner(f1, e).face != f2) continue;
    if (point_segment_distance(p1, s.edge_start(f1, e), s.edge_end(f1, e)) > tol) continue;
    const PlaneIsometry& T = s.transition(f1, e);
    if (dist(T(p1), p2) <= tol) return T.rotation();
  }
  throw Error(ErrorCode::InvalidArgument, "chart points do not describe the same surface point");
}

/// Anchor at a chart point, promoted to a vertex anchor when it sits on a vertex.
/// `dir` is a chart direction leaving the point into the face (used to pick the corner).
inline Anchor anchor_at(const ConeSurface& s, int face, Vec2 p, double dir, bool dir_is_fwd) {
  for (int v = 0; v < s.edge_count(face); ++v)
    if (dist(s.vertex(face, v), p) <= s.eps_vertex()) {
      Anchor a = Anchor::vertex(s.class_of(face, v));
      (dir_is_fwd ? a.fwd : a.back) = s.cone_coordinate(face, v, dir);
      return a;
    }
  Anchor a = Anchor::free_point(face, p);
  (dir_is_fwd ? a.fwd : a.back) = wrap(dir);
  return a;
}

/// Straight segment between two points of one convex face chart.
inline Polyline chart_segment(const ConeSurface& s, int face, Vec2 a, Vec2 b) {
  Polyline P;
  double d = (b - a).arg();
  P.anchors.push_back(anchor_at(s, face, a, d, true));
  P.anchors.push_back(anchor_at(s, face, b, d + kPi, false));
  P.legs.push_back(dist(a, b));
  return P;
}

/// A traced geodesic as a single leg (it may end at a cone point).
inline Polyline from_path(const ConeSurface& s, const GeodesicPath& g) {
  Polyline P;
  P.anchors.push_back(anchor_at(s, g.start.face, g.start.point, g.start.direction, true));
  if (g.hit_cone()) {
    Anchor e = Anchor::vertex(g.cone_hit().cls);
    e.back = g.cone_hit().coord_in;
    P.anchors.push_back(e);
  } else {
    TangentState e = g.end_state();
    P.anchors.push_back(anchor_at(s, e.face, e.point, e.direction + kPi, false));
  }
  P.legs.push_back(g.length);
  return P;
}

inline Polyline reversed(Polyline P) {
  std::reverse(P.anchors.begin(), P.anchors.end());
  std::reverse(P.legs.begin(), P.legs.end());
  for (Anchor& a : P.anchors) std::swap(a.back, a.fwd);
  return P;
}

/// Join P's last anchor to Q's first anchor; both must describe the same point.
inline Polyline concat(const ConeSurface& s, Polyline P, const Polyline& Q) {
  Anchor x = P.anchors.back();
  const Anchor& y = Q.anchors.front();
  Anchor m = y;
  if (x.kind == Anchor::Vertex && y.kind == Anchor::Vertex) {
    if (x.cls != y.cls) throw Error(ErrorCode::InvalidArgument, "joined vertex anchors differ");
    m.back = x.back;
  } else if (x.kind == Anchor::Free && y.kind == Anchor::Free) {
    m.back = wrap(x.back + chart_rotation(s, x.face, x.point, y.face, y.point));
  } else {
    throw Error(ErrorCode::InvalidArgument, "cannot join a vertex anchor to a free anchor");
  }
  P.anchors.back() = m;
  P.anchors.insert(P.anchors.end(), Q.anchors.begin() + 1, Q.anchors.end());
  P.legs.insert(P.legs.end(), Q.legs.begin(), Q.legs.end());
  return P;
}

/// State leaving anchor a along its forward direction.
inline TangentState leaving_state(const ConeSurface& s, const Anchor& a) {
  if (a.kind == Anchor::Free) return {a.face, a.point, wrap(a.fwd)};
  auto d = s.direction_at(a.cls, a.fwd);
  return {d.corner.face, s.vertex(d.corner.face, d.corner.vertex), wrap(d.chart_dir)};
}

struct TautOptions {
  long max_iters = 1'000'000;
  long node_budget = 1'000'000;
  double max_leg_diams = 2.0;  // legs are subdivided to at most this many diam_hint
  std::function<void(const Polyline&)> on_step;  // called after every cut or merge
};

struct TautStats {
  long iterations = 0;
  long nodes = 0;
  std::vector<double> lengths;  // length after each iteration
};

/// Each leg traced from its anchor.  Legs that graze an unexpected cone point are split
/// there with a straight passage (side angle pi on the left).
struct RealizedPolyline {
  Polyline poly;
  std::vector<GeodesicPath> legs;
  std::vector<double> arc_start;
  double length() const { return poly.length(); }
};

inline RealizedPolyline realize(const ConeSurface& s, Polyline P) {
  RealizedPolyline R;
  const double tol = 1e-7 * s.diam_hint();
  for (size_t i = 0; i + 1 < P.anchors.size(); ++i) {
    double len = P.legs[i];
    // Overshoot slightly into a cone anchor so the trace records the hit.
    bool to_cone = P.anchors[i + 1].kind == Anchor::Vertex && s.is_cone(P.anchors[i + 1].cls);
    GeodesicPath g = trace(s, leaving_state(s, P.anchors[i]), to_cone ? len + tol : len);
    if (to_cone && !g.hit_cone()) g = trace(s, leaving_state(s, P.anchors[i]), len);
    if (g.hit_cone() && g.length < len - tol) {
      Anchor v = Anchor::vertex(g.cone_hit().cls);
      v.back = g.cone_hit().coord_in;
      v.fwd = wrap(v.back - kPi, s.cone_angle(v.cls));
      P.anchors.insert(P.anchors.begin() + i + 1, v);
      P.legs[i] = g.length;
      P.legs.insert(P.legs.begin() + i + 1, len - g.length);
    }
    R.legs.push_back(g);
  }
  double arc = 0.0;
  for (double l : P.legs) {
    R.arc_start.push_back(arc);
    arc += l;
  }
  R.poly = std::move(P);
  return R;
}

/// Largest disagreement between traced legs and the anchors they should reach: position
/// error, plus the direction error scaled by diam_hint.  Zero for a consistent polyline.
inline double leg_mismatch(const ConeSurface& s, const Polyline& P) {
  double worst = 0.0;
  for (size_t i = 0; i + 1 < P.anchors.size(); ++i) {
    const Anchor& nx = P.anchors[i + 1];
    bool to_cone = nx.kind == Anchor::Vertex && s.is_cone(nx.cls);
    double len = P.legs[i];
    GeodesicPath g = trace(s, leaving_state(s, P.anchors[i]), to_cone ? len + 1e-7 * s.diam_hint() : len);
    double e;
    if (to_cone) {
      if (!g.hit_cone() || g.cone_hit().cls != nx.cls) {
        e = std::numeric_limits<double>::infinity();
      } else {
        double th = s.cone_angle(nx.cls);
        double da = wrap(g.cone_hit().coord_in - nx.back, th);
        e = std::abs(g.length - len) + s.diam_hint() * std::min(da, th - da);
      }
    } else if (g.hit_cone()) {
      e = std::numeric_limits<double>::infinity();
    } else {
      TangentState st = g.end_state();
      Anchor here = anchor_at(s, st.face, st.point, st.direction + kPi, false);
      if (here.kind != nx.kind) {
        e = std::numeric_limits<double>::infinity();
      } else if (nx.kind == Anchor::Vertex) {
        double th = s.cone_angle(nx.cls);
        double da = wrap(here.back - nx.back, th);
        e = here.cls == nx.cls ? s.diam_hint() * std::min(da, th - da) : std::numeric_limits<double>::infinity();
      } else {
        try {
          double rot = chart_rotation(s, st.face, st.point, nx.face, nx.point);
          double da = wrap(here.back + rot - nx.back);
          e = s.diam_hint() * std::min(da, kTwoPi - da);
        } catch (const Error&) {
          e = std::numeric_limits<double>::infinity();
        }
      }
    }
    worst = std::max(worst, e);
  }
  return worst;
}

/// Insert straight free anchors so that no leg is longer than max_leg.  Long legs make
/// single wedge cuts expensive; short ones let tautening sweep along the path.
inline Polyline subdivide(const ConeSurface& s, const Polyline& P, double max_leg) {
  if (P.legs.empty()) return P;
  bool needed = false;
  for (double l : P.legs) needed |= l > max_leg;
  if (!needed) return P;
  RealizedPolyline R = realize(s, P);
  Polyline Q;
  for (size_t i = 0; i < R.poly.legs.size(); ++i) {
    Q.anchors.push_back(R.poly.anchors[i]);
    double len = R.poly.legs[i];
    int pieces = static_cast<int>(std::ceil(len / max_leg));
    for (int j = 1; j < pieces; ++j) {
      TangentState st = state_at(R.legs[i], len * j / pieces);
      Anchor a = anchor_at(s, st.face, st.point, st.direction, true);
      a.back = a.kind == Anchor::Free ? wrap(st.direction + kPi) : wrap(a.fwd + kPi, s.cone_angle(a.cls));
      Q.anchors.push_back(a);
      Q.legs.push_back(len / pieces);
    }
    Q.legs.push_back(len - (pieces - 1) * (len / pieces));
  }
  Q.anchors.push_back(R.poly.anchors.back());
  return Q;
}

namespace detail {

struct HullPoint {
  Vec2 p;
  int cls = -1;       // -1 for the chord endpoints
  double c_to_b = 0;  // cone coordinate of the direction toward the cut apex
};

/// Chain of the convex hull of pts from pts[0] to pts[1] on the side of `apex`.
inline std::vector<int> apex_side_chain(const std::vector<HullPoint>& pts, Vec2 apex) {
  Vec2 A = pts[0].p, C = pts[1].p;
  Vec2 ex = (C - A) / (C - A).norm();
  double sgn = cross(ex, apex - A) >= 0 ? 1.0 : -1.0;
  std::vector<int> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto X = [&](int i) { return dot(pts[i].p - A, ex); };
  auto Y = [&](int i) { return sgn * cross(ex, pts[i].p - A); };
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return X(a) < X(b) || (X(a) == X(b) && Y(a) < Y(b)); });
  // Upper hull in (X, Y) with strict turns.
  std::vector<int> up;
  for (int i : idx) {
    while (up.size() >= 2) {
      int o = up[up.size() - 2], a = up.back();
      double cr = (X(a) - X(o)) * (Y(i) - Y(o)) - (Y(a) - Y(o)) * (X(i) - X(o));
      if (cr >= 0) up.pop_back();
      else break;
    }
    up.push_back(i);
  }
  // The upper hull runs left to right; the chain we need is its part from A to C,
  // together with the hull pieces beyond A or C when the apex side overhangs them.
  // Points outside [A, C] along the chord would make A or C non-extreme; keep the
  // portion between the positions of 0 and 1.
  auto ia = std::find(up.begin(), up.end(), 0), ic = std::find(up.begin(), up.end(), 1);
  if (ia != up.end() && ic != up.end() && ia < ic) return std::vector<int>(ia, ic + 1);
  // Fall back to the full hull walk from A to C through the apex side.
  std::vector<int> lo;
  for (int i : idx) {
    while (lo.size() >= 2) {
      int o = lo[lo.size() - 2], a = lo.back();
      double cr = (X(a) - X(o)) * (Y(i) - Y(o)) - (Y(a) - Y(o)) * (X(i) - X(o));
      if (cr <= 0) lo.pop_back();
      else break;
    }
    lo.push_back(i);
  }
  // Full ccw hull: lower left->right, then upper right->left.
  std::vector<int> hull(lo.begin(), lo.end());
  for (auto it = up.rbegin() + 1; it + 1 != up.rend(); ++it) hull.push_back(*it);
  int n = static_cast<int>(hull.size());
  int pa = -1, pc = -1;
  for (int i = 0; i < n; ++i) {
    if (hull[i] == 0) pa = i;
    if (hull[i] == 1) pc = i;
  }
  std::vector<int> chain;
  // Walking clockwise from A (decreasing index) keeps the apex side (Y > 0) on the way to C.
  for (int i = pa;; i = (i - 1 + n) % n) {
    chain.push_back(hull[i]);
    if (i == pc) break;
  }
  return chain;
}

}  // namespace detail

/// Shorten a piecewise geodesic with fixed endpoints to the geodesic of its homotopy
/// class: every interior free point straightened, every cone passage with both side
/// angles >= pi.
inline Polyline tauten(const ConeSurface& s, Polyline P, const TautOptions& opt = {}, TautStats* stats = nullptr) {
  const double eps_a = ConeSurface::eps_angle();
  const double eps_g = s.eps_geom();
  if (opt.max_leg_diams > 0) P = subdivide(s, P, opt.max_leg_diams * s.diam_hint());
  long iter = 0;
  for (;; ++iter) {
    if (iter >= opt.max_iters) throw Error(ErrorCode::NoConvergence, "tautening iteration limit");
    int n = static_cast<int>(P.anchors.size());
    // Cut bent anchors first, left to right; straight free anchors stay as subdivision
    // points until the end.
    int i = -1;
    for (int k = 1; k + 1 < n; ++k) {
      const Anchor& a = P.anchors[k];
      double L = left_angle(s, a), R = total_angle(s, a) - L;
      bool bent = a.kind == Anchor::Free ? std::abs(L - kPi) > eps_a : std::min(L, R) < kPi - eps_a;
      if (bent) {
        i = k;
        break;
      }
    }
    if (i < 0) {
      for (int k = 1; k + 1 < n; ++k)
        if (P.anchors[k].kind == Anchor::Free) {
          i = k;
          break;
        }
    }
    if (i < 0) break;
    Anchor& A = P.anchors[i - 1];
    Anchor& B = P.anchors[i];
    Anchor& C = P.anchors[i + 1];
    const double a_len = P.legs[i - 1], c_len = P.legs[i];
    const double th = total_angle(s, B);
    const double L = left_angle(s, B), R = th - L;
    const bool left = L <= R;
    const double W = std::min(L, R);
    if (B.kind == Anchor::Free && std::abs(L - kPi) <= eps_a) {
      P.legs[i - 1] = a_len + c_len;
      P.anchors.erase(P.anchors.begin() + i);
      P.legs.erase(P.legs.begin() + i);
      if (stats) stats->lengths.push_back(P.length());
    if (opt.on_step) opt.on_step(P);
      continue;
    }
    const double start = left ? B.fwd : B.back;  // wedge runs ccw from start for W
    auto frame_angle = [&](double c) { return wrap(c - start, th) - 0.5 * W; };
    Vec2 Af = unit(frame_angle(B.back)) * a_len;
    Vec2 Cf = unit(frame_angle(B.fwd)) * c_len;
    const Vec2 O{0, 0};

    std::vector<detail::HullPoint> pts{{Af, -1, 0}, {Cf, -1, 0}};
    std::vector<detail::HullPoint> grazing;  // cones within eps_vertex of the chord
    double chord = dist(Af, Cf);
    if (chord > s.eps_vertex() && W > eps_a) {
      double sB = cross(Cf - Af, O - Af);
      double far = std::max(a_len, c_len);
      Unfolder U(s, opt.node_budget);
      auto push_root = [&](int face, const PlaneIsometry& place, int skip, double lo, double hi) {
        UnfoldingNode nd;
        nd.face = face;
        nd.place = place;
        nd.skip_vertex = skip;
        nd.sweep = U.add_sweep({Sweep::Central, O, {1, 0}});
        nd.lo = lo;
        nd.hi = hi;
        U.push(nd);
      };
      if (B.kind == Anchor::Free) {
        double rot = -(start + 0.5 * W);
        PlaneIsometry r(rot, {});
        PlaneIsometry place(rot, -r.rotate(B.point));
        push_root(B.face, place, -1, -0.5 * W, 0.5 * W);
        for (int e = 0; e < s.edge_count(B.face); ++e)
          if (point_segment_distance(B.point, s.edge_start(B.face, e), s.edge_end(B.face, e)) <= eps_g)
            push_root(s.partner(B.face, e).face, place * s.transition(B.face, e).inverse(), -1, -0.5 * W, 0.5 * W);
      } else {
        for (CornerRef k : s.corners_of(B.cls)) {
          double off = s.slot(k.face, k.vertex).offset;
          double ang = s.corner_angle(k.face, k.vertex);
          for (int m = -1; m <= 1; ++m) {
            double c0 = off + m * th;
            double lo = std::max(c0, start), hi = std::min(c0 + ang, start + W);
            if (hi < lo - 1e-12) continue;
            double rot = c0 - start - 0.5 * W - s.corner_start_dir(k.face, k.vertex);
            PlaneIsometry r(rot, {});
            PlaneIsometry place(rot, -r.rotate(s.vertex(k.face, k.vertex)));
            push_root(k.face, place, k.vertex, lo - start - 0.5 * W, hi - start - 0.5 * W);
          }
        }
      }
      auto bside = [&](Vec2 p) { return cross(Cf - Af, p - Af) * (sB >= 0 ? 1.0 : -1.0); };
      const double side_tol = eps_g * std::max(1.0, chord / s.diam_hint());
      auto visit = [&](const UnfoldingNode& nd) {
        for (const VisibleVertex& v : U.visible_vertices(nd)) {
          int cls = s.class_of(nd.face, v.vertex);
          if (!s.is_cone(cls)) continue;
          if (dist(v.pos, Af) <= s.eps_vertex() || dist(v.pos, Cf) <= s.eps_vertex()) continue;
          double h = bside(v.pos) / chord;
          if (h < -s.eps_vertex()) continue;
          double chart_dir = (O - v.pos).arg() - nd.place.rotation();
          // The same cone may be sighted through several faces; only the corner that
          // contains the direction back toward the apex gives the right coordinate.
          double local = wrap(chart_dir - s.corner_start_dir(nd.face, v.vertex));
          double ang = s.corner_angle(nd.face, v.vertex);
          if (local > ang + 1e-9 && local < kTwoPi - 1e-9) continue;
          detail::HullPoint hp{v.pos, cls, s.cone_coordinate(nd.face, v.vertex, chart_dir)};
          (h > side_tol ? pts : grazing).push_back(hp);
        }
      };
      auto keep = [&](const UnfoldingNode& nd, Vec2 ca, Vec2 cb) {
        return nd.bound <= far && (bside(ca) > 0 || bside(cb) > 0);
      };
      U.run(visit, [] { return std::numeric_limits<double>::infinity(); }, keep);
      if (U.budget_exhausted()) throw Error(ErrorCode::NoConvergence, "unfolding budget exhausted while tautening");
      if (stats) stats->nodes += U.nodes_expanded();
    }

    // Turn the frame picture back into anchors.
    std::vector<int> chain;
    if (pts.size() > 2) chain = detail::apex_side_chain(pts, O);
    else chain = {0, 1};
    // Cones lying on a chain segment (collinear within the capture radius) become explicit
    // anchors: a trace along the segment would stop at them.
    {
      std::vector<int> on_chain(pts.size(), 0);
      for (int c : chain) on_chain[c] = 1;
      std::vector<int> full{chain[0]};
      for (size_t k = 1; k < chain.size(); ++k) {
        Vec2 p = pts[chain[k - 1]].p, q = pts[chain[k]].p;
        double len = dist(p, q);
        std::vector<std::pair<double, int>> mids;
        auto consider = [&](const detail::HullPoint& h, int idx) {
          if (point_segment_distance(h.p, p, q) > s.eps_vertex()) return;
          double t = dot(h.p - p, q - p) / len;
          if (t > s.eps_vertex() && t < len - s.eps_vertex()) mids.push_back({t, idx});
        };
        for (size_t j = 2; j < pts.size(); ++j)
          if (!on_chain[j]) consider(pts[j], static_cast<int>(j));
        for (size_t j = 0; j < grazing.size(); ++j) consider(grazing[j], -1 - static_cast<int>(j));
        std::sort(mids.begin(), mids.end());
        for (auto [t, idx] : mids) {
          if (idx < 0) {
            pts.push_back(grazing[-1 - idx]);
            idx = static_cast<int>(pts.size()) - 1;
            on_chain.push_back(0);
          }
          // Duplicate sightings of one cone collapse to the first.
          if (dist(pts[idx].p, pts[full.back()].p) <= s.eps_vertex()) continue;
          full.push_back(idx);
        }
        full.push_back(chain[k]);
      }
      chain = std::move(full);
    }
    // Rotation of A's and C's leg directions in their own angular coordinates.
    Vec2 a_next = pts[chain[1]].p, c_prev = pts[chain[chain.size() - 2]].p;
    double da = signed_angle(O - Af, a_next - Af);
    double dc = signed_angle(O - Cf, c_prev - Cf);
    bool spike = chord <= s.eps_vertex() || W <= eps_a;
    if (spike) {
      // Collinear legs: the shorter one lies along the longer one.
      if (std::abs(a_len - c_len) <= s.eps_vertex()) {
        // A and C coincide; keep whichever is an endpoint, else A.
        if (i + 1 == n - 1) {
          double rot = C.back - A.fwd;
          C.back = wrap(A.back + rot, total_angle(s, C));
          P.anchors.erase(P.anchors.begin() + i - 1, P.anchors.begin() + i + 1);
          P.legs.erase(P.legs.begin() + i - 1, P.legs.begin() + i + 1);
        } else {
          double rot = A.fwd - C.back;
          A.fwd = wrap(C.fwd + rot, total_angle(s, A));
          P.anchors.erase(P.anchors.begin() + i, P.anchors.begin() + i + 2);
          P.legs.erase(P.legs.begin() + i - 1, P.legs.begin() + i + 1);
        }
      } else if (a_len > c_len) {
        C.back = wrap(C.back + kPi, total_angle(s, C));
        P.legs[i - 1] = a_len - c_len;
        P.anchors.erase(P.anchors.begin() + i);
        P.legs.erase(P.legs.begin() + i);
      } else {
        A.fwd = wrap(A.fwd + kPi, total_angle(s, A));
        P.legs[i - 1] = c_len - a_len;
        P.anchors.erase(P.anchors.begin() + i);
        P.legs.erase(P.legs.begin() + i);
      }
      if (stats) stats->lengths.push_back(P.length());
    if (opt.on_step) opt.on_step(P);
      continue;
    }
    A.fwd = wrap(A.fwd + da, total_angle(s, A));
    C.back = wrap(C.back + dc, total_angle(s, C));
    std::vector<Anchor> mid;
    std::vector<double> legs;
    for (size_t k = 1; k < chain.size(); ++k) legs.push_back(dist(pts[chain[k - 1]].p, pts[chain[k]].p));
    for (size_t k = 1; k + 1 < chain.size(); ++k) {
      const detail::HullPoint& h = pts[chain[k]];
      Anchor v = Anchor::vertex(h.cls);
      double t = s.cone_angle(h.cls);
      v.back = wrap(h.c_to_b + signed_angle(O - h.p, pts[chain[k - 1]].p - h.p), t);
      v.fwd = wrap(h.c_to_b + signed_angle(O - h.p, pts[chain[k + 1]].p - h.p), t);
      mid.push_back(v);
    }
    P.anchors.erase(P.anchors.begin() + i);
    P.anchors.insert(P.anchors.begin() + i, mid.begin(), mid.end());
    P.legs.erase(P.legs.begin() + i - 1, P.legs.begin() + i + 1);
    P.legs.insert(P.legs.begin() + i - 1, legs.begin(), legs.end());
    if (stats) stats->lengths.push_back(P.length());
    if (opt.on_step) opt.on_step(P);
  }
  if (stats) stats->iterations = iter;
  return P;
}

/// Length of the geodesic in the homotopy class of P (a distance in the universal cover).
inline double cover_distance(const ConeSurface& s, const Polyline& P, const TautOptions& opt = {}) {
  return tauten(s, P, opt).length();
}

/// Split a realized polyline at arc length t; returns the prefix [0, t] and suffix [t, end].
inline std::pair<Polyline, Polyline> split_at(const ConeSurface& s, const RealizedPolyline& R, double t) {
  const Polyline& P = R.poly;
  int k = 0;
  while (k + 1 < static_cast<int>(P.legs.size()) && R.arc_start[k + 1] <= t) ++k;
  double local = std::clamp(t - R.arc_start[k], 0.0, P.legs[k]);
  Polyline pre, suf;
  pre.anchors.assign(P.anchors.begin(), P.anchors.begin() + k + 1);
  pre.legs.assign(P.legs.begin(), P.legs.begin() + k);
  suf.anchors.push_back({});
  suf.anchors.insert(suf.anchors.end(), P.anchors.begin() + k + 1, P.anchors.end());
  suf.legs.assign(P.legs.begin() + k, P.legs.end());
  Anchor cut_pre, cut_suf;
  if (local <= 0.0) {
    cut_pre = cut_suf = P.anchors[k];
    pre.anchors.pop_back();
    cut_pre.fwd = std::numeric_limits<double>::quiet_NaN();
    cut_suf.back = std::numeric_limits<double>::quiet_NaN();
    pre.anchors.push_back(cut_pre);
    suf.anchors.front() = cut_suf;
    return {pre, suf};
  }
  TangentState st = state_at(R.legs[k], local);
  if (local >= P.legs[k] && P.anchors[k + 1].kind == Anchor::Vertex) {
    cut_pre = cut_suf = P.anchors[k + 1];
    cut_pre.fwd = std::numeric_limits<double>::quiet_NaN();
    cut_suf.back = std::numeric_limits<double>::quiet_NaN();
  } else {
    cut_pre = anchor_at(s, st.face, st.point, st.direction + kPi, false);
    cut_suf = anchor_at(s, st.face, st.point, st.direction, true);
    if (cut_pre.kind == Anchor::Vertex) {
      cut_suf = cut_pre;
      cut_suf.back = std::numeric_limits<double>::quiet_NaN();
      cut_suf.fwd = wrap(cut_pre.back + kPi, s.cone_angle(cut_pre.cls));
    }
  }
  pre.anchors.push_back(cut_pre);
  pre.legs.push_back(local);
  suf.anchors.front() = cut_suf;
  suf.legs.front() = P.legs[k] - local;
  if (local >= P.legs[k]) {
    // Cut exactly at anchor k+1: drop the zero-length leg.
    suf.anchors.erase(suf.anchors.begin());
    suf.legs.erase(suf.legs.begin());
    suf.anchors.front().back = std::numeric_limits<double>::quiet_NaN();
  }
  return {pre, suf};
}

}  // namespace conetrace
