#pragma once

#include <cstdio>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace conetrace {

struct EdgeRef {
  int face = -1;
  int edge = -1;
  bool operator==(const EdgeRef&) const = default;
};

struct Gluing {
  EdgeRef a;
  EdgeRef b;
};

struct CornerRef {
  int face = -1;
  int vertex = -1;
  bool operator==(const CornerRef&) const = default;
};

/// A point of the surface given in one face chart.
struct SurfacePoint {
  int face = 0;
  Vec2 point;
};

/// A corner inside its vertex class: the class, position in the ccw cycle, and
/// the cone coordinate at which the corner's wedge starts.
struct CornerSlot {
  int cls = -1;
  int index = -1;
  double offset = 0.0;
};

struct Finding {
  std::string code;
  std::string message;
};

struct ValidationReport {
  bool ok = false;
  int euler_characteristic = 0;
  int genus = 0;
  std::vector<std::pair<int, double>> cone_points;
  std::vector<Finding> violations;
  std::vector<Finding> warnings;
};

class ConeSurface {
 public:
  ConeSurface() = default;

  /// Faces must be counterclockwise and convex; throws NonConvexFace / DanglingEdge.
  static ConeSurface build(std::string name, std::vector<std::vector<Vec2>> faces,
                           std::vector<Gluing> gluings) {
    ConeSurface s;
    s.name_ = std::move(name);
    s.faces_ = std::move(faces);
    s.gluings_ = std::move(gluings);
    s.init();
    return s;
  }

  const std::string& name() const { return name_; }
  int face_count() const { return static_cast<int>(faces_.size()); }
  int edge_count(int f) const { return static_cast<int>(faces_[f].size()); }
  const std::vector<Vec2>& face(int f) const { return faces_[f]; }
  Vec2 vertex(int f, int v) const { return faces_[f][mod(v, edge_count(f))]; }
  const std::vector<Gluing>& gluings() const { return gluings_; }
  int gluing_count() const { return static_cast<int>(gluings_.size()); }
  int class_count() const { return static_cast<int>(class_corners_.size()); }
  double cone_angle(int cls) const { return cone_angles_[cls]; }
  const std::vector<double>& cone_angles() const { return cone_angles_; }
  double diam_hint() const { return diam_hint_; }
  const std::vector<Finding>& warnings() const { return warnings_; }
  void set_warnings(std::vector<Finding> w) { warnings_ = std::move(w); }

  double eps_glue() const { return 1e-9 * diam_hint_; }
  static constexpr double eps_angle() { return 1e-9; }
  double eps_geom() const { return 1e-9 * diam_hint_; }
  double eps_vertex() const { return 1e-7 * diam_hint_; }

  bool is_cone(int cls) const { return cone_angles_[cls] > kTwoPi + eps_angle(); }
  std::vector<int> cone_classes() const {
    std::vector<int> out;
    for (int c = 0; c < class_count(); ++c)
      if (is_cone(c)) out.push_back(c);
    return out;
  }

  /// Edge e runs from vertex e to vertex e+1.
  Vec2 edge_start(int f, int e) const { return vertex(f, e); }
  Vec2 edge_end(int f, int e) const { return vertex(f, e + 1); }
  double edge_length(int f, int e) const { return dist(edge_start(f, e), edge_end(f, e)); }
  /// Outward unit normal of edge e (faces are ccw).
  Vec2 outward_normal(int f, int e) const {
    Vec2 d = edge_end(f, e) - edge_start(f, e);
    return Vec2{d.y, -d.x} / d.norm();
  }

  int gluing_id(int f, int e) const { return edge_gluing_[f][e]; }
  EdgeRef partner(int f, int e) const { return partner_[f][e]; }
  /// +1 when the edge is side `a` of its gluing, -1 when side `b`.
  int gluing_sign(int f, int e) const {
    const Gluing& g = gluings_[gluing_id(f, e)];
    return (g.a == EdgeRef{f, e}) ? +1 : -1;
  }
  /// Isometry taking chart f to the chart of the face across edge e.
  const PlaneIsometry& transition(int f, int e) const { return transitions_[f][e]; }

  double corner_angle(int f, int v) const {
    Vec2 p = vertex(f, v);
    Vec2 a = vertex(f, v + 1) - p;
    Vec2 b = vertex(f, v - 1) - p;
    return wrap(b.arg() - a.arg());
  }
  /// Direction angle of the corner's first edge (toward vertex v+1).
  double corner_start_dir(int f, int v) const { return (vertex(f, v + 1) - vertex(f, v)).arg(); }

  const CornerSlot& slot(int f, int v) const { return slots_[f][mod(v, edge_count(f))]; }
  int class_of(int f, int v) const { return slot(f, v).cls; }
  const std::vector<CornerRef>& corners_of(int cls) const { return class_corners_[cls]; }

  /// Cone coordinate of a chart direction emanating from corner (f, v).
  double cone_coordinate(int f, int v, double chart_dir) const {
    const CornerSlot& s = slot(f, v);
    double local = wrap(chart_dir - corner_start_dir(f, v));
    // Directions at the closing edge may wrap to almost 2pi; clamp to the wedge.
    double ang = corner_angle(f, v);
    if (local > ang + 0.5 * (kTwoPi - ang)) local = 0.0;
    return wrap(s.offset + std::min(local, ang), cone_angles_[s.cls]);
  }

  struct ConeDirection {
    CornerRef corner;
    double chart_dir = 0.0;
  };
  /// Inverse of cone_coordinate: the corner containing coordinate c and the chart direction there.
  ConeDirection direction_at(int cls, double c) const {
    const auto& cs = class_corners_[cls];
    c = wrap(c, cone_angles_[cls]);
    int best = static_cast<int>(cs.size()) - 1;
    for (int i = 0; i < static_cast<int>(cs.size()); ++i) {
      const CornerSlot& s = slot(cs[i].face, cs[i].vertex);
      if (s.offset <= c) best = i;
      else break;
    }
    CornerRef k = cs[best];
    double local = c - slot(k.face, k.vertex).offset;
    return {k, corner_start_dir(k.face, k.vertex) + local};
  }

  /// Vertex average of the face.
  Vec2 centroid(int f) const {
    Vec2 c;
    for (Vec2 p : faces_[f]) c += p;
    return c / static_cast<double>(faces_[f].size());
  }

  bool contains(int f, Vec2 p, double tol) const {
    for (int e = 0; e < edge_count(f); ++e)
      if (dot(p - edge_start(f, e), outward_normal(f, e)) > tol) return false;
    return true;
  }

  double area() const {
    double a = 0.0;
    for (int f = 0; f < face_count(); ++f)
      for (int v = 0; v < edge_count(f); ++v) a += 0.5 * cross(vertex(f, v), vertex(f, v + 1));
    return a;
  }

 private:
  static int mod(int a, int n) { return ((a % n) + n) % n; }

  void init() {
    const int F = face_count();
    diam_hint_ = 0.0;
    for (int f = 0; f < F; ++f) {
      if (faces_[f].size() < 3) throw Error(ErrorCode::NonConvexFace, "face " + std::to_string(f));
      Vec2 c = centroid(f);
      for (Vec2 p : faces_[f]) diam_hint_ = std::max(diam_hint_, dist(c, p));
    }
    if (!(diam_hint_ > 0.0)) throw Error(ErrorCode::NonConvexFace, "degenerate faces");
    for (int f = 0; f < F; ++f) {
      const int k = edge_count(f);
      for (int v = 0; v < k; ++v) {
        Vec2 a = vertex(f, v) - vertex(f, v - 1);
        Vec2 b = vertex(f, v + 1) - vertex(f, v);
        if (cross(a, b) < -1e-12 * diam_hint_ * diam_hint_ || b.norm() <= eps_glue())
          throw Error(ErrorCode::NonConvexFace, "face " + std::to_string(f));
      }
    }
    edge_gluing_.assign(F, {});
    partner_.assign(F, {});
    transitions_.assign(F, {});
    for (int f = 0; f < F; ++f) {
      edge_gluing_[f].assign(edge_count(f), -1);
      partner_[f].assign(edge_count(f), EdgeRef{});
      transitions_[f].assign(edge_count(f), PlaneIsometry{});
    }
    auto check_ref = [&](EdgeRef r) {
      if (r.face < 0 || r.face >= F || r.edge < 0 || r.edge >= edge_count(r.face))
        throw Error(ErrorCode::InvalidArgument,
                    "gluing references missing edge " + std::to_string(r.face) + "." + std::to_string(r.edge));
    };
    for (int g = 0; g < gluing_count(); ++g) {
      EdgeRef a = gluings_[g].a, b = gluings_[g].b;
      check_ref(a);
      check_ref(b);
      if (a == b || edge_gluing_[a.face][a.edge] >= 0 || edge_gluing_[b.face][b.edge] >= 0)
        throw Error(ErrorCode::InvalidArgument,
                    "edge glued more than once in gluing " + std::to_string(g));
      edge_gluing_[a.face][a.edge] = g;
      edge_gluing_[b.face][b.edge] = g;
      partner_[a.face][a.edge] = b;
      partner_[b.face][b.edge] = a;
    }
    for (int f = 0; f < F; ++f)
      for (int e = 0; e < edge_count(f); ++e) {
        if (edge_gluing_[f][e] < 0)
          throw Error(ErrorCode::DanglingEdge, "face " + std::to_string(f) + " edge " + std::to_string(e));
        EdgeRef o = partner_[f][e];
        transitions_[f][e] = PlaneIsometry::matching(edge_start(f, e), edge_end(f, e),
                                                     edge_end(o.face, o.edge), edge_start(o.face, o.edge));
      }
    build_classes();
  }

  // The corner after (f, v) in ccw order is reached by crossing edge v-1.
  CornerRef next_corner(CornerRef c) const {
    EdgeRef o = partner_[c.face][mod(c.vertex - 1, edge_count(c.face))];
    return {o.face, o.edge};
  }

  void build_classes() {
    const int F = face_count();
    slots_.assign(F, {});
    for (int f = 0; f < F; ++f) slots_[f].assign(edge_count(f), CornerSlot{});
    class_corners_.clear();
    cone_angles_.clear();
    for (int f = 0; f < F; ++f)
      for (int v = 0; v < edge_count(f); ++v) {
        if (slots_[f][v].cls >= 0) continue;
        const int cls = class_count();
        class_corners_.emplace_back();
        double offset = 0.0;
        CornerRef c{f, v};
        while (slots_[c.face][c.vertex].cls < 0) {
          slots_[c.face][c.vertex] = {cls, static_cast<int>(class_corners_[cls].size()), offset};
          class_corners_[cls].push_back(c);
          offset += corner_angle(c.face, c.vertex);
          c = next_corner(c);
        }
        cone_angles_.push_back(offset);
      }
  }

  std::string name_;
  std::vector<std::vector<Vec2>> faces_;
  std::vector<Gluing> gluings_;
  std::vector<std::vector<int>> edge_gluing_;
  std::vector<std::vector<EdgeRef>> partner_;
  std::vector<std::vector<PlaneIsometry>> transitions_;
  std::vector<std::vector<CornerSlot>> slots_;
  std::vector<std::vector<CornerRef>> class_corners_;
  std::vector<double> cone_angles_;
  double diam_hint_ = 1.0;
  std::vector<Finding> warnings_;
};

/// 2*pi minus the interior defects minus the boundary turning; zero exactly when the
/// angle data bound a simply connected flat disc with cone points.
inline double gb_residual(const std::vector<double>& interior_angles,
                          const std::vector<double>& boundary_angles) {
  double r = kTwoPi;
  for (double t : interior_angles) r -= kTwoPi - t;
  for (double t : boundary_angles) r -= kPi - t;
  return r;
}

inline ValidationReport validate(const ConeSurface& s) {
  ValidationReport rep;
  rep.warnings = s.warnings();
  auto violation = [&](std::string code, std::string msg) {
    rep.violations.push_back({std::move(code), std::move(msg)});
  };
  const int F = s.face_count();
  const int E = s.gluing_count();
  const int V = s.class_count();
  rep.euler_characteristic = V - E + F;
  rep.genus = (2 - rep.euler_characteristic) / 2;

  for (int g = 0; g < E; ++g) {
    const Gluing& gl = s.gluings()[g];
    double la = s.edge_length(gl.a.face, gl.a.edge);
    double lb = s.edge_length(gl.b.face, gl.b.edge);
    if (std::abs(la - lb) > s.eps_glue())
      violation("EdgeLengthMismatch", "gluing " + std::to_string(g) + " lengths " + std::to_string(la) +
                                          " vs " + std::to_string(lb));
    // The partner face must land on the far side of the shared edge.
    const PlaneIsometry& T = s.transition(gl.a.face, gl.a.edge);
    Vec2 c = T(s.centroid(gl.a.face));
    if (dot(c - s.edge_start(gl.b.face, gl.b.edge), s.outward_normal(gl.b.face, gl.b.edge)) <= 0.0)
      violation("OrientationMismatch", "gluing " + std::to_string(g));
  }

  std::vector<int> seen(F, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    int f = stack.back();
    stack.pop_back();
    for (int e = 0; e < s.edge_count(f); ++e) {
      int g = s.partner(f, e).face;
      if (!seen[g]) {
        seen[g] = 1;
        stack.push_back(g);
      }
    }
  }
  if (std::accumulate(seen.begin(), seen.end(), 0) != F) violation("Disconnected", "faces not all reachable");

  double defect = 0.0;
  for (int c = 0; c < V; ++c) {
    double th = s.cone_angle(c);
    defect += kTwoPi - th;
    if (s.is_cone(c)) rep.cone_points.emplace_back(c, th);
    else if (th < kTwoPi - ConeSurface::eps_angle())
      violation("AngleBelowTwoPi", "class " + std::to_string(c) + " angle " + std::to_string(th));
  }
  if (rep.cone_points.empty()) violation("NoConePoint", "no vertex class with angle above 2pi");
  if (rep.euler_characteristic > -2)
    violation("EulerCharacteristic", "chi = " + std::to_string(rep.euler_characteristic) + " (need genus >= 2)");
  if (std::abs(defect - kTwoPi * rep.euler_characteristic) > ConeSurface::eps_angle() * V)
    violation("DefectIdentity", "sum of defects " + std::to_string(defect));
  rep.ok = rep.violations.empty();
  return rep;
}

namespace detail {

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline double parse_double(const std::string& tok, int line) {
  try {
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw SyntaxError(line, "bad number '" + tok + "'");
  }
}

inline int parse_int(const std::string& tok, int line) {
  try {
    size_t pos = 0;
    int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw SyntaxError(line, "bad integer '" + tok + "'");
  }
}

inline EdgeRef parse_edge_ref(const std::string& tok, int line) {
  auto dot_pos = tok.find('.');
  if (dot_pos == std::string::npos) throw SyntaxError(line, "expected face.edge, got '" + tok + "'");
  return {parse_int(tok.substr(0, dot_pos), line), parse_int(tok.substr(dot_pos + 1), line)};
}

}  // namespace detail

inline ConeSurface parse_surface(std::string_view text) {
  std::string name;
  std::vector<std::pair<int, std::vector<Vec2>>> faces;
  std::vector<std::pair<int, std::pair<EdgeRef, EdgeRef>>> glues;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    auto tok = detail::split_ws(raw);
    if (tok.empty()) continue;
    if (tok[0] == "surface") {
      if (tok.size() != 2 || !name.empty()) throw SyntaxError(lineno, "bad surface header");
      name = tok[1];
    } else if (tok[0] == "face") {
      if (tok.size() < 3) throw SyntaxError(lineno, "face needs id and vertex count");
      int id = detail::parse_int(tok[1], lineno);
      int k = detail::parse_int(tok[2], lineno);
      if (k < 3 || static_cast<int>(tok.size()) != 3 + 2 * k)
        throw SyntaxError(lineno, "face " + std::to_string(id) + " coordinate count mismatch");
      std::vector<Vec2> pts;
      for (int i = 0; i < k; ++i)
        pts.push_back({detail::parse_double(tok[3 + 2 * i], lineno), detail::parse_double(tok[4 + 2 * i], lineno)});
      faces.emplace_back(id, std::move(pts));
    } else if (tok[0] == "glue") {
      if (tok.size() != 3) throw SyntaxError(lineno, "glue needs two edge references");
      glues.push_back({lineno, {detail::parse_edge_ref(tok[1], lineno), detail::parse_edge_ref(tok[2], lineno)}});
    } else {
      throw SyntaxError(lineno, "unknown directive '" + tok[0] + "'");
    }
  }
  if (faces.empty()) throw SyntaxError(lineno, "no faces");
  for (size_t i = 0; i < faces.size(); ++i)
    if (faces[i].first != static_cast<int>(i))
      throw SyntaxError(lineno, "face ids must be 0..F-1 in order");

  std::vector<Finding> warnings;
  std::vector<std::vector<Vec2>> polys;
  // remap[f][e] gives the edge index after a possible reorientation.
  std::vector<std::vector<int>> remap;
  for (auto& [id, pts] : faces) {
    const int k = static_cast<int>(pts.size());
    double area2 = 0.0;
    for (int i = 0; i < k; ++i) area2 += cross(pts[i], pts[(i + 1) % k]);
    std::vector<int> m(k);
    std::iota(m.begin(), m.end(), 0);
    if (area2 < 0.0) {
      std::reverse(pts.begin(), pts.end());
      for (int i = 0; i < k; ++i) m[i] = ((k - 2 - i) % k + k) % k;
      warnings.push_back({"Reoriented", "face " + std::to_string(id) + " was clockwise"});
    }
    polys.push_back(pts);
    remap.push_back(m);
  }
  std::vector<Gluing> gl;
  for (auto& [line, pr] : glues) {
    for (EdgeRef r : {pr.first, pr.second})
      if (r.face < 0 || r.face >= static_cast<int>(polys.size()) || r.edge < 0 ||
          r.edge >= static_cast<int>(polys[r.face].size()))
        throw SyntaxError(line, "edge reference out of range");
    EdgeRef a{pr.first.face, remap[pr.first.face][pr.first.edge]};
    EdgeRef b{pr.second.face, remap[pr.second.face][pr.second.edge]};
    gl.push_back({a, b});
  }
  ConeSurface s;
  try {
    s = ConeSurface::build(name.empty() ? "unnamed" : name, std::move(polys), std::move(gl));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw SyntaxError(lineno, e.what());
    throw;
  }
  s.set_warnings(std::move(warnings));
  return s;
}

inline std::string serialize(const ConeSurface& s) {
  std::string out = "surface " + s.name() + "\n";
  char buf[64];
  for (int f = 0; f < s.face_count(); ++f) {
    out += "face " + std::to_string(f) + " " + std::to_string(s.edge_count(f));
    for (Vec2 p : s.face(f)) {
      std::snprintf(buf, sizeof buf, " %.17g %.17g", p.x, p.y);
      out += buf;
    }
    out += "\n";
  }
  for (const Gluing& g : s.gluings())
    out += "glue " + std::to_string(g.a.face) + "." + std::to_string(g.a.edge) + " " +
           std::to_string(g.b.face) + "." + std::to_string(g.b.edge) + "\n";
  return out;
}

/// Regular n-gon of circumradius r with opposite sides glued by translation.
inline ConeSurface regular_polygon_surface(std::string name, int n, double r = 1.0) {
  std::vector<Vec2> pts;
  for (int k = 0; k < n; ++k) pts.push_back(unit(kPi / n + kTwoPi * k / n) * r);
  std::vector<Gluing> gl;
  for (int k = 0; k < n / 2; ++k) gl.push_back({{0, k}, {0, k + n / 2}});
  return ConeSurface::build(std::move(name), {pts}, gl);
}

inline ConeSurface builtin(std::string_view name) {
  if (name == "octagon6pi") return regular_polygon_surface("octagon6pi", 8);
  if (name == "decagon4pi4pi") return regular_polygon_surface("decagon4pi4pi", 10);
  throw Error(ErrorCode::UnknownBuiltin, std::string(name));
}

}  // namespace conetrace
