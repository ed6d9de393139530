#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "polyline.hpp"
#include "tracer.hpp"
#include "unfolding.hpp"

namespace conetrace {

inline constexpr long kDefaultNodeBudget = 1'000'000;

/// Vertex index of face f at point p, or -1.
inline int vertex_index_at(const ConeSurface& s, SurfacePoint p) {
  for (int v = 0; v < s.edge_count(p.face); ++v)
    if (dist(s.vertex(p.face, v), p.point) <= s.eps_vertex()) return v;
  return -1;
}

/// Geodesic distance on the surface by best-first unfolding from x, re-seeding at
/// cone apices.  Throws ExceedsRadius when d(x, y) > radius or the node budget runs out.
inline double local_distance(const ConeSurface& s, SurfacePoint x, SurfacePoint y, double radius,
                             long budget = kDefaultNodeBudget) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "radius must be positive");
  const int xv = vertex_index_at(s, x);
  const int yv = vertex_index_at(s, y);
  const int ycls = yv >= 0 ? s.class_of(y.face, yv) : -1;
  if (x.face == y.face && dist(x.point, y.point) <= s.eps_geom()) return 0.0;

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best_cls(s.class_count(), inf);
  std::vector<char> expanded(s.class_count(), 0);
  double best = inf;
  Unfolder U(s, budget);
  if (xv >= 0) {
    int c = s.class_of(x.face, xv);
    if (c == ycls) return 0.0;
    best_cls[c] = 0.0;
    U.push_seed(c, 0.0);
  } else {
    U.push_point_source(x.face, x.point, 0.0);
  }
  const double tiny = 1e-12 * s.diam_hint();
  auto visit = [&](const UnfoldingNode& n) {
    if (n.face < 0) {
      int c = n.seed_class;
      if (expanded[c] || n.base > best_cls[c] + tiny) return;
      expanded[c] = 1;
      U.push_apex_source(c, n.base);
      return;
    }
    for (const VisibleVertex& v : U.visible_vertices(n)) {
      int c = s.class_of(n.face, v.vertex);
      double d = n.base + v.value;
      if (c == ycls) best = std::min(best, d);
      if (s.is_cone(c) && d < best_cls[c] - tiny) {
        best_cls[c] = d;
        U.push_seed(c, d);
      }
    }
    if (ycls < 0 && n.face == y.face) {
      Vec2 q = n.place(y.point);
      if (U.sees(n, q)) best = std::min(best, n.base + U.sweep(n.sweep).value(q));
    }
  };
  auto cutoff = [&] { return std::min(best, radius * (1 + 1e-12) + tiny); };
  U.run(visit, cutoff, [](const UnfoldingNode&, Vec2, Vec2) { return true; });
  if (best > radius * (1 + 1e-12) + tiny) throw Error(ErrorCode::ExceedsRadius, "distance beyond radius");
  if (U.budget_exhausted()) throw Error(ErrorCode::ExceedsRadius, "unfolding node budget exhausted");
  return best;
}

/// Shortest saddle connection over all cone points (a cone point to itself around a
/// nontrivial loop included).
inline double min_cone_separation(const ConeSurface& s, long budget = kDefaultNodeBudget) {
  auto cones = s.cone_classes();
  if (cones.empty()) throw Error(ErrorCode::NoConePoints, s.name());
  double best = std::numeric_limits<double>::infinity();
  for (int c : cones) {
    Unfolder U(s, budget);
    U.push_apex_source(c, 0.0);
    auto visit = [&](const UnfoldingNode& n) {
      for (const VisibleVertex& v : U.visible_vertices(n))
        if (s.is_cone(s.class_of(n.face, v.vertex))) best = std::min(best, v.value);
    };
    U.run(visit, [&] { return best; }, [](const UnfoldingNode&, Vec2, Vec2) { return true; });
  }
  return best;
}

/// Busemann limit estimate along a ray with its history of (t, alpha_t).
struct BusemannEstimate {
  double value = 0.0;
  double t_used = 0.0;
  bool converged = false;
  std::vector<std::pair<double, double>> history;
};

inline std::vector<double> default_schedule(const ConeSurface& s) {
  std::vector<double> t;
  for (int k = 0; k <= 7; ++k) t.push_back(std::ldexp(s.diam_hint(), k));
  return t;
}
inline double default_busemann_tol(const ConeSurface& s) { return 1e-4 * s.diam_hint(); }

/// Concatenation where an empty polyline acts as the constant path.
inline Polyline join(const ConeSurface& s, const Polyline& P, const Polyline& Q) {
  if (P.anchors.empty()) return Q;
  if (Q.anchors.empty()) return P;
  return concat(s, P, Q);
}

inline Polyline prefix(const ConeSurface& s, const RealizedPolyline& R, double t) { return split_at(s, R, t).first; }

/// Cone-free ray of the given length; ConeOnRay when it meets a cone point first.
inline RealizedPolyline geodesic_ray(const ConeSurface& s, const TangentState& start, double length) {
  GeodesicPath g = trace(s, normalize_state(s, start), length);
  if (g.hit_cone()) throw Error(ErrorCode::ConeOnRay, "ray meets a cone point at arc " + std::to_string(g.length));
  return realize(s, from_path(s, g));
}

/// alpha_t = d(x', ray(t)) - d(x, ray(t)), distances measured in the universal cover
/// along the classes tether -> ray.  Tethers end at the ray's start; an empty tether
/// means the point is the ray's start.
inline BusemannEstimate busemann(const ConeSurface& s, const RealizedPolyline& ray, const Polyline& tether_x,
                                 const Polyline& tether_xp, const std::vector<double>& schedule, double tol,
                                 const TautOptions& opt = {}) {
  BusemannEstimate est;
  for (double t : schedule) {
    if (t > ray.length() + s.eps_geom()) break;
    Polyline head = prefix(s, ray, t);
    double dx = tether_x.anchors.empty() ? t : cover_distance(s, join(s, tether_x, head), opt);
    double dxp = tether_xp.anchors.empty() ? t : cover_distance(s, join(s, tether_xp, head), opt);
    double a = dxp - dx;
    if (!est.history.empty() && std::abs(a - est.history.back().second) < tol) {
      est.history.push_back({t, a});
      est.value = a;
      est.t_used = t;
      est.converged = true;
      return est;
    }
    est.history.push_back({t, a});
  }
  if (est.history.empty()) throw Error(ErrorCode::InvalidArgument, "ray shorter than the first schedule time");
  est.value = est.history.back().second;
  est.t_used = est.history.back().first;
  return est;
}

/// Convenience form: x and x' are points of the face holding the ray's start, joined to
/// it by straight chart segments.
inline BusemannEstimate busemann(const ConeSurface& s, const TangentState& ray_start, SurfacePoint x,
                                 SurfacePoint x_prime, std::vector<double> schedule = {}, double tol = -1.0) {
  if (schedule.empty()) schedule = default_schedule(s);
  if (tol < 0) tol = default_busemann_tol(s);
  TangentState st = normalize_state(s, ray_start);
  if (x.face != ray_start.face || x_prime.face != ray_start.face)
    throw Error(ErrorCode::ChartMismatch, "points must share the ray's start face");
  RealizedPolyline ray = geodesic_ray(s, st, *std::max_element(schedule.begin(), schedule.end()));
  auto tether = [&](SurfacePoint p) {
    if (dist(p.point, ray_start.point) <= s.eps_geom()) return Polyline{};
    return chart_segment(s, p.face, p.point, ray_start.point);
  };
  return busemann(s, ray, tether(x), tether(x_prime), schedule, tol);
}

/// Distance in the universal cover between g1(a) and g2(b), in the class running back
/// along g1, across the tether g1(0) -> g2(0) and out along g2.
inline double pair_distance(const ConeSurface& s, const RealizedPolyline& g1, const RealizedPolyline& g2,
                            const Polyline& tether, double a, double b, const TautOptions& opt = {}) {
  Polyline P = join(s, join(s, reversed(prefix(s, g1, a)), tether), prefix(s, g2, b));
  return cover_distance(s, P, opt);
}

struct Reparam {
  double c = 0.0;           // g2(t) is paired with g1(c + t)
  BusemannEstimate alpha;   // along g1 at x' = g2(0)
  double t0 = 0.0;          // first time both parametrizations are defined
  double d_start = 0.0;     // distance at t0
  double d_horizon = 0.0;   // distance at the horizon
  double horizon = 0.0;
};

/// Time shift making g2(0) equidistant with g1(c) from the common endpoint, followed
/// by one check that the pair does not separate.  Throws NoBracket when it does.
inline Reparam equidistant_reparam(const ConeSurface& s, const RealizedPolyline& g1, const RealizedPolyline& g2,
                                   const Polyline& tether, std::vector<double> schedule = {}, double tol = -1.0,
                                   const TautOptions& opt = {}) {
  if (schedule.empty()) schedule = default_schedule(s);
  if (tol < 0) tol = default_busemann_tol(s);
  Reparam r;
  r.alpha = busemann(s, g1, Polyline{}, tether.anchors.empty() ? Polyline{} : reversed(tether), schedule, tol, opt);
  r.c = -r.alpha.value;
  r.t0 = std::max(0.0, -r.c);
  r.horizon = std::min(g1.length() - r.c, g2.length());
  if (r.horizon <= r.t0) throw Error(ErrorCode::NoBracket, "paths too short for the time shift");
  r.d_start = pair_distance(s, g1, g2, tether, r.c + r.t0, r.t0, opt);
  r.d_horizon = pair_distance(s, g1, g2, tether, r.c + r.horizon, r.horizon, opt);
  if (r.d_horizon > r.d_start + tol)
    throw Error(ErrorCode::NoBracket, "pair separates: " + std::to_string(r.d_start) + " -> " + std::to_string(r.d_horizon));
  return r;
}

/// Two geodesics aimed at a common developed target: g1 is a ray of the given length,
/// g2 starts at `p2` (same face as g1's start) and is the tautened path to g1's endpoint
/// across the tether g1(0) -> p2.
struct ConvergingPair {
  RealizedPolyline g1, g2;
  Polyline tether;
};

inline ConvergingPair converging_pair(const ConeSurface& s, const TangentState& start, Vec2 p2, double length,
                                      const TautOptions& opt = {}) {
  ConvergingPair cp;
  cp.g1 = geodesic_ray(s, start, length);
  cp.tether = chart_segment(s, start.face, start.point, p2);
  cp.g2 = realize(s, tauten(s, concat(s, reversed(cp.tether), cp.g1.poly), opt));
  return cp;
}

struct DistanceSample {
  double t = 0.0;
  double dist = 0.0;
};

/// d(g1(c + t), g2(t)) on `samples` evenly spaced times in [r.t0, horizon].
inline std::vector<DistanceSample> convergence_profile(const ConeSurface& s, const RealizedPolyline& g1,
                                                       const RealizedPolyline& g2, const Polyline& tether,
                                                       const Reparam& r, double horizon, int samples,
                                                       const TautOptions& opt = {}) {
  horizon = std::min(horizon, r.horizon);
  std::vector<DistanceSample> out;
  for (int j = 0; j < samples; ++j) {
    double t = samples == 1 ? r.t0 : r.t0 + (horizon - r.t0) * j / (samples - 1);
    out.push_back({t, pair_distance(s, g1, g2, tether, r.c + t, t, opt)});
  }
  return out;
}

}  // namespace conetrace
