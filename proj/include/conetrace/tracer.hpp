#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "surface.hpp"

namespace conetrace {

struct TangentState {
  int face = 0;
  Vec2 point;
  double direction = 0.0;  // chart angle in [0, 2pi)
};

enum class EventKind { EdgeCross, VertexPass, ConeHit };

/// A junction between two consecutive segments, or the terminal cone hit.
struct PathEvent {
  EventKind kind = EventKind::EdgeCross;
  double arc = 0.0;
  // EdgeCross: the edge left, its gluing and the crossing sign (+1 from side a to side b).
  EdgeRef edge;
  int gluing = -1;
  int sign = 0;
  // Maps the chart of the segment before the event to the chart of the segment after it.
  PlaneIsometry transition;
  // VertexPass / ConeHit: vertex class, arrival corner and cone coordinate of the ray
  // pointing back along the arrival.
  int cls = -1;
  CornerRef corner;
  double coord_in = 0.0;
  double incoming_dir = 0.0;
};

struct Segment {
  int face = 0;
  Vec2 entry;
  Vec2 exit;
  double dir = 0.0;
  double length = 0.0;
  double arc_start = 0.0;
};

struct GeodesicPath {
  TangentState start;
  std::vector<Segment> segments;
  // events[k] for k < segments.size()-1 is the junction between segments k and k+1;
  // an optional ConeHit comes last.
  std::vector<PathEvent> events;
  double length = 0.0;
  std::optional<double> closed_period;

  bool hit_cone() const { return !events.empty() && events.back().kind == EventKind::ConeHit; }
  const PathEvent& cone_hit() const { return events.back(); }
  int junction_count() const { return static_cast<int>(segments.size()) - 1; }
  TangentState end_state() const {
    const Segment& s = segments.back();
    return {s.face, s.exit, s.dir};
  }
};

enum class ConePolicy { Stop, Error };

struct TraceOptions {
  double eps_vertex = -1.0;  // negative: surface default
  long max_events = 10'000'000;
  ConePolicy cone_policy = ConePolicy::Stop;
};

namespace detail {

inline Vec2 snap_to_edge(const ConeSurface& s, int f, int e, Vec2 q) {
  Vec2 a = s.edge_start(f, e), b = s.edge_end(f, e);
  double t = std::clamp(dot(q - a, b - a) / (b - a).norm2(), 0.0, 1.0);
  return a + (b - a) * t;
}

inline int vertex_at(const ConeSurface& s, int f, Vec2 p, double tol) {
  for (int v = 0; v < s.edge_count(f); ++v)
    if (dist(s.vertex(f, v), p) <= tol) return v;
  return -1;
}

}  // namespace detail

/// Re-express a state at a vertex through the corner whose wedge contains its direction.
/// Regular vertices accept any direction; cone vertices require one inside the corner.
inline TangentState recorner(const ConeSurface& s, int f, int v, double dir) {
  int cls = s.class_of(f, v);
  double local = wrap(dir - s.corner_start_dir(f, v));
  double ang = s.corner_angle(f, v);
  if (local <= ang) return {f, s.vertex(f, v), wrap(dir)};
  if (s.is_cone(cls)) {
    if (local > kTwoPi - 1e-12) return {f, s.vertex(f, v), wrap(s.corner_start_dir(f, v))};
    throw Error(ErrorCode::InvalidArgument, "direction leaves the corner at a cone point");
  }
  double c = s.slot(f, v).offset + local;
  auto d = s.direction_at(cls, c);
  return {d.corner.face, s.vertex(d.corner.face, d.corner.vertex), wrap(d.chart_dir)};
}

/// Move a state sitting on an edge and pointing outward into the neighboring chart.
inline TangentState normalize_state(const ConeSurface& s, TangentState st) {
  st.direction = wrap(st.direction);
  double tol = s.eps_geom();
  int v = detail::vertex_at(s, st.face, st.point, s.eps_vertex());
  if (v >= 0) return recorner(s, st.face, v, st.direction);
  for (int guard = 0; guard < 8; ++guard) {
    Vec2 u = unit(st.direction);
    bool moved = false;
    for (int e = 0; e < s.edge_count(st.face); ++e) {
      Vec2 n = s.outward_normal(st.face, e);
      if (dot(st.point - s.edge_start(st.face, e), n) > -tol && dot(u, n) > 1e-12) {
        const PlaneIsometry& T = s.transition(st.face, e);
        EdgeRef o = s.partner(st.face, e);
        Vec2 q = detail::snap_to_edge(s, st.face, e, st.point);
        st = {o.face, T(q), wrap(st.direction + T.rotation())};
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return st;
}

/// Straight-line propagation across face charts until `length` or a cone hit.
inline GeodesicPath trace(const ConeSurface& s, const TangentState& start_in, double length,
                          const TraceOptions& opts = {}) {
  const double eps_v = opts.eps_vertex > 0 ? opts.eps_vertex : s.eps_vertex();
  const double eps_g = s.eps_geom();
  TangentState st = normalize_state(s, start_in);
  GeodesicPath path;
  path.start = st;
  double arc = 0.0;
  long events = 0;
  for (;;) {
    const int f = st.face;
    const Vec2 p = st.point;
    const Vec2 u = unit(st.direction);
    double best = std::numeric_limits<double>::infinity();
    int exit_edge = -1;
    for (int e = 0; e < s.edge_count(f); ++e) {
      Vec2 n = s.outward_normal(f, e);
      double nu = dot(n, u);
      if (nu <= 1e-14) continue;
      double gap = dot(s.edge_start(f, e) - p, n);
      // Grazing an edge we are sitting on: not an exit.
      if (std::abs(gap) <= eps_g && nu < 1e-9) continue;
      double sd = std::max(gap, 0.0) / nu;
      if (sd < best) {
        best = sd;
        exit_edge = e;
      }
    }
    if (exit_edge < 0) throw Error(ErrorCode::InvalidArgument, "ray has no exit from face");
    const double remaining = length - arc;
    Vec2 q = detail::snap_to_edge(s, f, exit_edge, p + u * best);
    int vtx = -1;
    for (int v : {exit_edge, exit_edge + 1})
      if (dist(q, s.vertex(f, v)) <= eps_v) vtx = v % s.edge_count(f);
    double seg_len = best;
    if (vtx >= 0) {
      seg_len = std::max(0.0, dot(s.vertex(f, vtx) - p, u));
      q = s.vertex(f, vtx);
    }
    if (remaining <= seg_len) {
      path.segments.push_back({f, p, p + u * remaining, st.direction, remaining, arc});
      arc = length;
      break;
    }
    path.segments.push_back({f, p, q, st.direction, seg_len, arc});
    arc += seg_len;
    if (++events > opts.max_events) throw Error(ErrorCode::EventBudgetExceeded, "trace");
    PathEvent ev;
    ev.arc = arc;
    if (vtx >= 0) {
      int cls = s.class_of(f, vtx);
      double back = wrap(st.direction + kPi);
      ev.cls = cls;
      ev.corner = {f, vtx};
      ev.coord_in = s.cone_coordinate(f, vtx, back);
      ev.incoming_dir = st.direction;
      if (s.is_cone(cls)) {
        ev.kind = EventKind::ConeHit;
        path.events.push_back(ev);
        if (opts.cone_policy == ConePolicy::Error)
          throw Error(ErrorCode::ConeHit, "class " + std::to_string(cls) + " at arc " + std::to_string(arc));
        break;
      }
      ev.kind = EventKind::VertexPass;
      auto d = s.direction_at(cls, ev.coord_in + kPi);
      Vec2 to = s.vertex(d.corner.face, d.corner.vertex);
      double rot = wrap_signed(d.chart_dir - st.direction);
      ev.transition = PlaneIsometry(rot, to - PlaneIsometry(rot, {}).rotate(q));
      st = {d.corner.face, to, wrap(d.chart_dir)};
    } else {
      const PlaneIsometry& T = s.transition(f, exit_edge);
      EdgeRef o = s.partner(f, exit_edge);
      ev.kind = EventKind::EdgeCross;
      ev.edge = {f, exit_edge};
      ev.gluing = s.gluing_id(f, exit_edge);
      ev.sign = s.gluing_sign(f, exit_edge);
      ev.transition = T;
      st = {o.face, detail::snap_to_edge(s, o.face, o.edge, T(q)), wrap(st.direction + T.rotation())};
    }
    path.events.push_back(ev);
  }
  path.length = arc;
  return path;
}

struct ScatterResult {
  TangentState state;
  double side_left = 0.0;
  double side_right = 0.0;
};

/// Continue through a cone point along the ray at `coord_out`; both side angles must be >= pi.
inline ScatterResult cone_scatter(const ConeSurface& s, int cls, double coord_in, double coord_out) {
  const double th = s.cone_angle(cls);
  double right = wrap(coord_out - coord_in, th);
  double left = th - right;
  if (std::min(left, right) < kPi - ConeSurface::eps_angle())
    throw Error(ErrorCode::InvalidScatter,
                "side angles " + std::to_string(left) + ", " + std::to_string(right));
  auto d = s.direction_at(cls, coord_out);
  return {{d.corner.face, s.vertex(d.corner.face, d.corner.vertex), wrap(d.chart_dir)}, left, right};
}

inline ScatterResult cone_scatter(const ConeSurface& s, const PathEvent& hit, double coord_out) {
  return cone_scatter(s, hit.cls, hit.coord_in, coord_out);
}

struct Development {
  std::vector<PlaneIsometry> isometries;  // chart of segment i+1 -> chart of segment 0
  std::vector<Vec2> polyline;
};

/// Charts of every segment mapped into the chart of the first one.
inline std::vector<PlaneIsometry> segment_placements(const GeodesicPath& path) {
  std::vector<PlaneIsometry> D{PlaneIsometry::identity()};
  for (int k = 0; k < path.junction_count(); ++k) D.push_back(D.back() * path.events[k].transition.inverse());
  return D;
}

inline Development develop(const GeodesicPath& path) {
  auto D = segment_placements(path);
  Development dev;
  dev.isometries.assign(D.begin() + 1, D.end());
  dev.polyline.push_back(path.segments.front().entry);
  for (size_t k = 0; k < path.segments.size(); ++k) dev.polyline.push_back(D[k](path.segments[k].exit));
  return dev;
}

/// Index of the segment holding arc length t; a junction belongs to the later segment.
inline int segment_index(const GeodesicPath& path, double t) {
  int n = static_cast<int>(path.segments.size());
  int k = 0;
  while (k + 1 < n && path.segments[k + 1].arc_start <= t) ++k;
  return k;
}

inline TangentState state_at(const GeodesicPath& path, double t) {
  const Segment& sg = path.segments[segment_index(path, t)];
  double local = std::clamp(t - sg.arc_start, 0.0, sg.length);
  return {sg.face, sg.entry + unit(sg.dir) * local, sg.dir};
}

/// Product of transitions along a chart chain: maps the final chart into the first.
inline PlaneIsometry chain_holonomy(const std::vector<PlaneIsometry>& transitions) {
  PlaneIsometry T = PlaneIsometry::identity();
  for (const PlaneIsometry& t : transitions) T = t * T;
  return T.inverse();
}

/// Development of the end chart into the start chart of a closed path.
inline PlaneIsometry holonomy(const ConeSurface& s, const GeodesicPath& loop) {
  if (loop.segments.empty()) return PlaneIsometry::identity();
  TangentState a = loop.start, b = loop.end_state();
  double tol = 1e3 * s.eps_geom();
  if (a.face != b.face || dist(a.point, b.point) > tol ||
      std::abs(wrap_signed(a.direction - b.direction)) > 1e3 * ConeSurface::eps_angle())
    throw Error(ErrorCode::NotALoop, "end state differs from start state");
  std::vector<PlaneIsometry> ts;
  for (int k = 0; k < loop.junction_count(); ++k) ts.push_back(loop.events[k].transition);
  return chain_holonomy(ts);
}

struct Letter {
  int gluing = -1;
  int sign = 0;
  bool operator==(const Letter&) const = default;
};

inline std::vector<Letter> itinerary(const GeodesicPath& path) {
  std::vector<Letter> w;
  for (const PathEvent& e : path.events)
    if (e.kind == EventKind::EdgeCross) w.push_back({e.gluing, e.sign});
  return w;
}

/// The same geodesic traversed backwards from its end state.
inline GeodesicPath reverse_path(const ConeSurface& s, const GeodesicPath& path, const TraceOptions& opts = {}) {
  TangentState e = path.end_state();
  e.direction = wrap(e.direction + kPi);
  return trace(s, e, path.length, opts);
}

inline GeodesicPath time_shift(const GeodesicPath& path, double t) {
  if (t < 0.0 || t > path.length) throw Error(ErrorCode::OutOfWindow, "shift " + std::to_string(t));
  int k = segment_index(path, t);
  GeodesicPath out;
  for (size_t i = k; i < path.segments.size(); ++i) {
    Segment sg = path.segments[i];
    if (static_cast<int>(i) == k) {
      double local = std::clamp(t - sg.arc_start, 0.0, sg.length);
      sg.entry = sg.entry + unit(sg.dir) * local;
      sg.length -= local;
      sg.arc_start = 0.0;
    } else {
      sg.arc_start -= t;
    }
    out.segments.push_back(sg);
  }
  for (size_t i = k; i < path.events.size(); ++i) {
    PathEvent ev = path.events[i];
    ev.arc -= t;
    out.events.push_back(ev);
  }
  const Segment& first = out.segments.front();
  out.start = {first.face, first.entry, first.dir};
  out.length = path.length - t;
  return out;
}

/// Point at arc length t developed into the chart of the path's first segment.
inline Vec2 developed_at(const GeodesicPath& path, const std::vector<PlaneIsometry>& placements, double t) {
  int k = segment_index(path, t);
  const Segment& sg = path.segments[k];
  return placements[k](sg.entry + unit(sg.dir) * std::clamp(t - sg.arc_start, 0.0, sg.length));
}

/// Truncated compact-open distance between two developed paths, each centered at
/// `center` (default: its midpoint), integrated over [-horizon, horizon].
inline double compare_paths(const GeodesicPath& g1, const GeodesicPath& g2, double horizon,
                            std::optional<double> center1 = {}, std::optional<double> center2 = {}) {
  if (g1.start.face != g2.start.face) throw Error(ErrorCode::ChartMismatch, "paths start in different faces");
  double c1 = center1.value_or(0.5 * g1.length);
  double c2 = center2.value_or(0.5 * g2.length);
  double slack = 1e-9 * std::max(1.0, horizon);
  if (c1 - horizon < -slack || c1 + horizon > g1.length + slack || c2 - horizon < -slack ||
      c2 + horizon > g2.length + slack)
    throw Error(ErrorCode::OutOfWindow, "paths do not cover the comparison window");
  auto D1 = segment_placements(g1), D2 = segment_placements(g2);
  const int n = 4096;
  const double h = 2.0 * horizon / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double t = -horizon + (i + 0.5) * h;
    Vec2 a = developed_at(g1, D1, std::clamp(c1 + t, 0.0, g1.length));
    Vec2 b = developed_at(g2, D2, std::clamp(c2 + t, 0.0, g2.length));
    sum += dist(a, b) * std::exp(-std::abs(t));
  }
  return sum * h;
}

/// Cone vertices near face f expressed in f's chart: its own and its neighbors' (placed).
inline std::vector<Vec2> nearby_cone_vertices(const ConeSurface& s, int f) {
  std::vector<Vec2> out;
  for (int v = 0; v < s.edge_count(f); ++v)
    if (s.is_cone(s.class_of(f, v))) out.push_back(s.vertex(f, v));
  for (int e = 0; e < s.edge_count(f); ++e) {
    EdgeRef o = s.partner(f, e);
    PlaneIsometry back = s.transition(f, e).inverse();
    for (int v = 0; v < s.edge_count(o.face); ++v)
      if (s.is_cone(s.class_of(o.face, v))) out.push_back(back(s.vertex(o.face, v)));
  }
  return out;
}

struct ProfilePoint {
  double arc = 0.0;
  double min_distance = 0.0;
};

/// Running minimum of the distance to the cone set, sampled at segment ends.
inline std::vector<ProfilePoint> min_cone_distance_profile(const ConeSurface& s, const GeodesicPath& path) {
  std::vector<std::vector<Vec2>> cache(s.face_count());
  std::vector<char> have(s.face_count(), 0);
  std::vector<ProfilePoint> out;
  double running = std::numeric_limits<double>::infinity();
  for (const Segment& sg : path.segments) {
    if (!have[sg.face]) {
      cache[sg.face] = nearby_cone_vertices(s, sg.face);
      have[sg.face] = 1;
    }
    for (Vec2 c : cache[sg.face]) running = std::min(running, point_segment_distance(c, sg.entry, sg.exit));
    out.push_back({sg.arc_start + sg.length, running});
  }
  if (path.hit_cone()) out.back().min_distance = 0.0;
  return out;
}

}  // namespace conetrace
