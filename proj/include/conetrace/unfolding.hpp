#pragma once

#include <functional>
#include <limits>
#include <queue>
#include <vector>

#include "surface.hpp"

namespace conetrace {

/// How points of an unfolded chart are swept.  Central: rays from `src`, keyed by
/// signed angle from `ref`.  Parallel: upward vertical lines, keyed by -x.
struct Sweep {
  enum Kind { Central, Parallel } kind = Central;
  Vec2 src;
  Vec2 ref{1, 0};

  double key(Vec2 p) const { return kind == Central ? signed_angle(ref, p - src) : -p.x; }
  /// Distance-like value of a point: Euclidean distance from src, or height.
  double value(Vec2 p) const { return kind == Central ? dist(p, src) : p.y; }
  /// Point on segment [a, b] whose key is k (clamped to the segment).
  Vec2 at_key(Vec2 a, Vec2 b, double k) const {
    double t;
    if (kind == Central) {
      Vec2 d = PlaneIsometry(k, {}).rotate(ref);
      double den = cross(d, b - a);
      t = std::abs(den) < 1e-300 ? 0.0 : -cross(d, a - src) / den;
    } else {
      double den = b.x - a.x;
      t = std::abs(den) < 1e-300 ? 0.0 : (-k - a.x) / den;
    }
    return a + (b - a) * std::clamp(t, 0.0, 1.0);
  }
  /// Keys of an exit edge [a, b]; false when the edge does not face the sweep.
  bool edge_keys(Vec2 a, Vec2 b, double& ka, double& kb) const {
    if (kind == Central) {
      double span = signed_angle(a - src, b - src);
      if (!(span > 0.0)) return false;
      ka = key(a);
      if (ka > 0.5 * kPi) ka -= kTwoPi;
      kb = ka + span;
      return true;
    }
    ka = -a.x;
    kb = -b.x;
    return ka < kb;
  }
};

struct UnfoldingNode {
  int face = -1;
  PlaneIsometry place;  // face chart -> frame
  int entry = -1;       // entry edge index in `face`, -1 for roots
  int skip_vertex = -1; // vertex of a root face sitting at the sweep source
  double lo = 0.0, hi = 0.0;
  bool full = false;    // root around an interior source: every direction
  int sweep = 0;
  double base = 0.0;    // accumulated length before the sweep source
  double bound = 0.0;   // lower bound of value over the node
  int depth = 0;
  int tag = 0;          // caller data carried to children
  int seed_class = -1;  // marker node (face -1): expand the apex of this class at `base`
};

struct VisibleVertex {
  int vertex = -1;
  Vec2 pos;
  double value = 0.0;
  double key = 0.0;
};

/// Best-first unfolding of face charts along sweep windows.
class Unfolder {
 public:
  explicit Unfolder(const ConeSurface& s, long budget = 1'000'000) : s_(s), budget_(budget) {}

  const ConeSurface& surface() const { return s_; }
  const Sweep& sweep(int i) const { return sweeps_[i]; }
  int add_sweep(Sweep w) {
    sweeps_.push_back(w);
    return static_cast<int>(sweeps_.size()) - 1;
  }
  long nodes_expanded() const { return expanded_; }
  bool budget_exhausted() const { return exhausted_; }

  void push(const UnfoldingNode& n) { queue_.push(n); }

  /// Deferred apex source, popped in order with the other nodes.
  void push_seed(int cls, double base) {
    UnfoldingNode n;
    n.seed_class = cls;
    n.base = base;
    push(n);
  }

  /// Free source strictly inside or on the boundary of face f (chart coordinates).
  void push_point_source(int f, Vec2 p, double base, int tag = 0) {
    UnfoldingNode n;
    n.face = f;
    n.full = true;
    n.sweep = add_sweep({Sweep::Central, p, {1, 0}});
    n.base = base;
    n.tag = tag;
    push(n);
    // A source on an edge also sees straight into the neighboring face.
    for (int e = 0; e < s_.edge_count(f); ++e) {
      if (point_segment_distance(p, s_.edge_start(f, e), s_.edge_end(f, e)) > s_.eps_geom()) continue;
      UnfoldingNode m = n;
      m.face = s_.partner(f, e).face;
      m.entry = -1;
      m.place = s_.transition(f, e).inverse();
      push(m);
    }
  }

  /// One root per corner of a vertex class, each corner swept in its own chart.
  void push_apex_source(int cls, double base, int tag = 0) {
    for (CornerRef c : s_.corners_of(cls)) {
      double a0 = s_.corner_start_dir(c.face, c.vertex);
      double ang = s_.corner_angle(c.face, c.vertex);
      UnfoldingNode n;
      n.face = c.face;
      n.skip_vertex = c.vertex;
      n.sweep = add_sweep({Sweep::Central, s_.vertex(c.face, c.vertex), unit(a0 + 0.5 * ang)});
      n.lo = -0.5 * ang;
      n.hi = 0.5 * ang;
      n.base = base;
      n.tag = tag;
      push(n);
    }
  }

  /// Vertices of the node's face inside its window (the sweep source excluded).
  std::vector<VisibleVertex> visible_vertices(const UnfoldingNode& n, double key_tol = 1e-12) const {
    std::vector<VisibleVertex> out;
    const Sweep& w = sweeps_[n.sweep];
    for (int v = 0; v < s_.edge_count(n.face); ++v) {
      if (v == n.skip_vertex) continue;
      Vec2 p = n.place(s_.vertex(n.face, v));
      double val = w.value(p);
      if (w.kind == Sweep::Central && val <= s_.eps_vertex()) continue;
      if (w.kind == Sweep::Parallel && val <= 0.0) continue;
      double k = w.key(p);
      if (!n.full && (k < n.lo - key_tol || k > n.hi + key_tol)) continue;
      out.push_back({v, p, val, k});
    }
    return out;
  }

  /// True when chart point p of the node's face lies inside its window.
  bool sees(const UnfoldingNode& n, Vec2 frame_point, double key_tol = 1e-12) const {
    if (n.full) return true;
    double k = sweeps_[n.sweep].key(frame_point);
    return k >= n.lo - key_tol && k <= n.hi + key_tol;
  }

  /// Expand nodes in order of base + bound.  The visitor decides what a node means;
  /// `cutoff` stops the search, `keep` may veto a child given its clipped entry segment.
  template <class Visit, class Cutoff, class Keep>
  void run(Visit&& visit, Cutoff&& cutoff, Keep&& keep) {
    while (!queue_.empty()) {
      UnfoldingNode n = queue_.top();
      queue_.pop();
      if (n.base + n.bound >= cutoff()) break;
      if (++expanded_ > budget_) {
        exhausted_ = true;
        break;
      }
      visit(n);
      if (n.face >= 0) expand(n, keep);
    }
  }

 private:
  struct Later {
    bool operator()(const UnfoldingNode& a, const UnfoldingNode& b) const {
      return a.base + a.bound > b.base + b.bound;
    }
  };

  template <class Keep>
  void expand(const UnfoldingNode& n, Keep& keep) {
    const int f = n.face;
    const double eps = s_.eps_geom();
    for (int e = 0; e < s_.edge_count(f); ++e) {
      if (e == n.entry) continue;
      if (n.skip_vertex >= 0 && (e == n.skip_vertex || (e + 1) % s_.edge_count(f) == n.skip_vertex)) continue;
      Vec2 a = n.place(s_.edge_start(f, e)), b = n.place(s_.edge_end(f, e));
      UnfoldingNode c;
      c.sweep = n.sweep;
      if (n.full) {
        const Sweep& w = sweeps_[n.sweep];
        if (point_segment_distance(w.src, a, b) <= eps) continue;
        Vec2 da = a - w.src, db = b - w.src;
        if (!(cross(da, db) > 0.0)) continue;
        Vec2 bis = (da / da.norm() + db / db.norm());
        Sweep child{Sweep::Central, w.src, bis / bis.norm()};
        c.sweep = add_sweep(child);
        c.lo = child.key(a);
        c.hi = child.key(b);
      } else {
        const Sweep& w = sweeps_[n.sweep];
        if (n.entry < 0 && w.kind == Sweep::Central && point_segment_distance(w.src, a, b) <= eps) continue;
        double ka, kb;
        if (!w.edge_keys(a, b, ka, kb)) continue;
        c.lo = std::max(n.lo, ka);
        c.hi = std::min(n.hi, kb);
        if (c.lo > c.hi + 1e-12) continue;
        if (c.lo > c.hi) c.lo = c.hi = 0.5 * (c.lo + c.hi);
      }
      const Sweep& w = sweeps_[c.sweep];
      Vec2 ca = w.at_key(a, b, c.lo), cb = w.at_key(a, b, c.hi);
      c.bound = w.kind == Sweep::Central ? point_segment_distance(w.src, ca, cb)
                                         : std::max(0.0, std::min(ca.y, cb.y));
      c.bound = std::max(c.bound, n.bound);
      EdgeRef o = s_.partner(f, e);
      c.face = o.face;
      c.entry = o.edge;
      c.place = n.place * s_.transition(f, e).inverse();
      c.base = n.base;
      c.depth = n.depth + 1;
      c.tag = n.tag;
      if (!keep(c, ca, cb)) continue;
      queue_.push(c);
    }
  }

  const ConeSurface& s_;
  long budget_;
  long expanded_ = 0;
  bool exhausted_ = false;
  std::vector<Sweep> sweeps_;
  std::priority_queue<UnfoldingNode, std::vector<UnfoldingNode>, Later> queue_;
};

}  // namespace conetrace
