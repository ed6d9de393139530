#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "metric.hpp"
#include "tracer.hpp"

namespace conetrace {

/// Position bin of a face's bounding box times a direction sector.
struct PhaseCell {
  int face = 0;
  int ix = 0, iy = 0;
  int sector = 0;
  int nx = 16, ny = 16, sectors = 64;

  bool operator==(const PhaseCell&) const = default;
};

struct Box {
  Vec2 lo, hi;
};

inline Box face_bbox(const ConeSurface& s, int f) {
  Box b{s.vertex(f, 0), s.vertex(f, 0)};
  for (Vec2 p : s.face(f)) {
    b.lo = {std::min(b.lo.x, p.x), std::min(b.lo.y, p.y)};
    b.hi = {std::max(b.hi.x, p.x), std::max(b.hi.y, p.y)};
  }
  return b;
}

inline Box cell_box(const ConeSurface& s, const PhaseCell& c) {
  Box b = face_bbox(s, c.face);
  double wx = (b.hi.x - b.lo.x) / c.nx, wy = (b.hi.y - b.lo.y) / c.ny;
  return {{b.lo.x + c.ix * wx, b.lo.y + c.iy * wy}, {b.lo.x + (c.ix + 1) * wx, b.lo.y + (c.iy + 1) * wy}};
}

inline double sector_width(const PhaseCell& c) { return kTwoPi / c.sectors; }

/// The cell of a state at the given resolution.
inline PhaseCell cell_of(const ConeSurface& s, const TangentState& st, int nx = 16, int ny = 16, int sectors = 64) {
  Box b = face_bbox(s, st.face);
  PhaseCell c{st.face, 0, 0, 0, nx, ny, sectors};
  c.ix = std::clamp(static_cast<int>(std::floor((st.point.x - b.lo.x) / (b.hi.x - b.lo.x) * nx)), 0, nx - 1);
  c.iy = std::clamp(static_cast<int>(std::floor((st.point.y - b.lo.y) / (b.hi.y - b.lo.y) * ny)), 0, ny - 1);
  c.sector = std::clamp(static_cast<int>(std::floor(wrap(st.direction) / kTwoPi * sectors)), 0, sectors - 1);
  return c;
}

inline bool in_cell(const ConeSurface& s, const PhaseCell& c, const TangentState& st) {
  return st.face == c.face && cell_of(s, st, c.nx, c.ny, c.sectors) == c;
}

/// Face polygon clipped to the cell's box (convex, counterclockwise).
inline std::vector<Vec2> cell_polygon(const ConeSurface& s, const PhaseCell& c) {
  Box b = cell_box(s, c);
  std::vector<Vec2> poly = s.face(c.face);
  auto clip = [&](auto inside, auto cut) {
    std::vector<Vec2> out;
    for (size_t i = 0; i < poly.size(); ++i) {
      Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
      bool ip = inside(p), iq = inside(q);
      if (ip) out.push_back(p);
      if (ip != iq) out.push_back(cut(p, q));
    }
    poly = std::move(out);
  };
  auto at_x = [](double x) { return [x](Vec2 p, Vec2 q) { return p + (q - p) * ((x - p.x) / (q.x - p.x)); }; };
  auto at_y = [](double y) { return [y](Vec2 p, Vec2 q) { return p + (q - p) * ((y - p.y) / (q.y - p.y)); }; };
  clip([&](Vec2 p) { return p.x >= b.lo.x; }, at_x(b.lo.x));
  clip([&](Vec2 p) { return p.x <= b.hi.x; }, at_x(b.hi.x));
  clip([&](Vec2 p) { return p.y >= b.lo.y; }, at_y(b.lo.y));
  clip([&](Vec2 p) { return p.y <= b.hi.y; }, at_y(b.hi.y));
  return poly;
}

inline double polygon_area(const std::vector<Vec2>& P) {
  double a = 0.0;
  for (size_t i = 0; i < P.size(); ++i) a += 0.5 * cross(P[i], P[(i + 1) % P.size()]);
  return a;
}

/// Position area times sector width.
inline double cell_measure(const ConeSurface& s, const PhaseCell& c) {
  auto P = cell_polygon(s, c);
  return P.size() < 3 ? 0.0 : polygon_area(P) * sector_width(c);
}

inline TangentState sample_cell(const ConeSurface& s, const PhaseCell& c, std::mt19937_64& rng) {
  auto P = cell_polygon(s, c);
  Box b = cell_box(s, c);
  double box_area = (b.hi.x - b.lo.x) * (b.hi.y - b.lo.y);
  if (P.size() < 3 || polygon_area(P) <= 1e-12 * box_area) throw Error(ErrorCode::EmptyCell, "cell misses its face");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Fan triangulation, triangle picked by area.
  std::vector<double> acc;
  double total = 0.0;
  for (size_t i = 1; i + 1 < P.size(); ++i) acc.push_back(total += 0.5 * cross(P[i] - P[0], P[i + 1] - P[0]));
  double r = u(rng) * total;
  size_t t = std::min(acc.size() - 1, static_cast<size_t>(std::lower_bound(acc.begin(), acc.end(), r) - acc.begin()));
  double a = u(rng), bb = u(rng);
  if (a + bb > 1.0) a = 1.0 - a, bb = 1.0 - bb;
  Vec2 p = P[0] + (P[t + 1] - P[0]) * a + (P[t + 2] - P[0]) * bb;
  double dir = (c.sector + u(rng)) * sector_width(c);
  return {c.face, p, dir};
}

inline TangentState sample_cell(const ConeSurface& s, const PhaseCell& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_cell(s, c, rng);
}

/// Uniformly random cell whose face part covers at least `min_fill` of its box.
inline PhaseCell random_cell(const ConeSurface& s, std::mt19937_64& rng, double min_fill = 0.5, int nx = 16, int ny = 16,
                             int sectors = 64) {
  for (;;) {
    PhaseCell c{static_cast<int>(rng() % s.face_count()), static_cast<int>(rng() % nx), static_cast<int>(rng() % ny),
                static_cast<int>(rng() % sectors), nx, ny, sectors};
    Box b = cell_box(s, c);
    auto P = cell_polygon(s, c);
    if (P.size() >= 3 && polygon_area(P) >= min_fill * (b.hi.x - b.lo.x) * (b.hi.y - b.lo.y)) return c;
  }
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream for work item `index` of a run seeded with `seed`.
inline std::mt19937_64 item_rng(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (index + 1)));
}

/// CONETRACE_THREADS caps the worker count; default is the hardware concurrency.
inline int worker_count() {
  int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("CONETRACE_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return std::min(n, hw * 4);
  }
  return hw;
}

/// Runs body(i) for i in [0, n) on the worker pool.  Items must not share mutable state.
template <class Body>
void parallel_for(int n, Body&& body, int workers = 0) {
  if (workers <= 0) workers = worker_count();
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) body(i);
    });
  for (auto& t : pool) t.join();
}

/// Straight: the geodesic flow on unit tangent vectors, samples hitting a cone point are
/// redrawn.  ConeBranching: witnesses are geodesics that pass exactly through cone
/// points they come near and leave in a random direction with both side angles >= pi.
enum class FlowModel { Straight, ConeBranching };

struct HitOptions {
  FlowModel model = FlowModel::Straight;
  double capture_radius = -1.0;  // ConeBranching; negative: 0.05 * diam_hint
  double threshold = 0.9;
  int workers = 0;
  int max_redraws = 1000;
};

struct MixingReport {
  PhaseCell from, to;
  double horizon = 0.0;
  double dt = 0.0;
  double threshold = 0.9;
  std::vector<char> hits;
  std::optional<double> first_hit;
  std::optional<double> t0_estimate;
  double fraction_after_t0 = 0.0;
  int samples = 0;
  long redraws = 0;   // cone hits drawn again
  long captures = 0;  // cone passages of branching witnesses

  int bins() const { return static_cast<int>(hits.size()); }
  double hit_fraction(int from_bin) const {
    if (from_bin >= bins()) return 0.0;
    int h = 0;
    for (int k = from_bin; k < bins(); ++k) h += hits[k];
    return static_cast<double>(h) / (bins() - from_bin);
  }
};

struct WitnessSegment {
  double t = 0.0;  // flow time at the segment entry
  Segment seg;
};

struct WitnessPassage {
  int cls = -1;
  double t = 0.0;
  double coord_in = 0.0;
  double coord_out = 0.0;
};

/// A geodesic of the branching flow: straight legs joined at cone points.
struct Witness {
  TangentState start;
  std::vector<WitnessSegment> segments;
  std::vector<WitnessPassage> passages;
  bool failed = false;  // ended on a cone point it could not pass
};

namespace detail {

/// Time interval where a segment's position lies in a closed box, or false.
inline bool box_interval(const Segment& sg, const Box& b, double& t0, double& t1) {
  t0 = 0.0;
  t1 = sg.length;
  Vec2 u = unit(sg.dir);
  const double p[2] = {sg.entry.x, sg.entry.y}, d[2] = {u.x, u.y}, lo[2] = {b.lo.x, b.lo.y}, hi[2] = {b.hi.x, b.hi.y};
  for (int i = 0; i < 2; ++i) {
    if (std::abs(d[i]) < 1e-300) {
      if (p[i] < lo[i] || p[i] > hi[i]) return false;
      continue;
    }
    double a = (lo[i] - p[i]) / d[i], c = (hi[i] - p[i]) / d[i];
    if (a > c) std::swap(a, c);
    t0 = std::max(t0, a);
    t1 = std::min(t1, c);
  }
  return t0 <= t1;
}

inline bool sector_contains(const PhaseCell& c, double dir) {
  return std::clamp(static_cast<int>(std::floor(wrap(dir) / kTwoPi * c.sectors)), 0, c.sectors - 1) == c.sector;
}

struct NearPass {
  double arc = 0.0;
  double offset = 0.0;  // signed, positive on the left
  int seg = 0;
  Vec2 chart_pos;       // cone in the segment's chart
};

/// Cone points passing beside a leg, in arc order, with their perpendicular offsets.
inline std::vector<NearPass> near_passes(const ConeSurface& s, const GeodesicPath& leg, double radius) {
  std::vector<NearPass> out;
  for (size_t k = 0; k < leg.segments.size(); ++k) {
    const Segment& sg = leg.segments[k];
    Vec2 u = unit(sg.dir);
    for (Vec2 c : nearby_cone_vertices(s, sg.face)) {
      double along = dot(c - sg.entry, u);
      if (along < 0.0 || along > sg.length) continue;
      // The apex a leg leaves from is not passed.
      if (sg.arc_start + along <= s.eps_vertex()) continue;
      double off = cross(u, c - sg.entry);
      if (std::abs(off) > radius) continue;
      out.push_back({sg.arc_start + along, off, static_cast<int>(k), c});
    }
  }
  std::sort(out.begin(), out.end(), [](const NearPass& a, const NearPass& b) { return a.arc < b.arc; });
  return out;
}

}  // namespace detail

/// One branching witness from `x0`.  Near passes (offset below `radius`, no other cone
/// point closer to the leg before them) are made exact: the first by shifting the start
/// sideways inside `O`, later ones by turning at the previous cone point.  Every leg is
/// re-traced and must hit its cone point.
inline Witness branching_witness(const ConeSurface& s, const PhaseCell& O, TangentState x0, double horizon,
                                 double radius, std::mt19937_64& rng) {
  Witness w;
  w.start = x0;
  std::vector<WitnessSegment>& out = w.segments;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double T = 0.0;
  TangentState st = x0;
  bool from_cone = false;
  int cone_cls = -1;
  double cone_in = 0.0, cone_out = 0.0;
  const double slack = 1e-6 * s.diam_hint();
  while (T < horizon) {
    GeodesicPath leg = trace(s, st, horizon - T);
    std::vector<detail::NearPass> cand = detail::near_passes(s, leg, radius);
    if (leg.hit_cone()) {
      const Segment& last = leg.segments.back();
      cand.push_back({leg.length, 0.0, static_cast<int>(leg.segments.size()) - 1, last.exit});
    }
    auto D = segment_placements(leg);
    bool captured = false;
    double clear = std::numeric_limits<double>::infinity();  // smallest offset passed so far
    for (const detail::NearPass& c : cand) {
      double off = std::abs(c.offset);
      bool ok = off < clear;
      clear = std::min(clear, off);
      if (!ok) continue;
      Vec2 q = D[c.seg](c.chart_pos);
      TangentState aim = st;
      double cout = cone_out;
      if (!from_cone) {
        aim.point = st.point + unit(st.direction + kPi / 2) * c.offset;
        if (!s.contains(st.face, aim.point, 0.0) || !in_cell(s, O, aim)) continue;
      } else {
        double nd = (q - st.point).arg();
        cout = cone_out + wrap_signed(nd - st.direction);
        double right = wrap(cout - cone_in, s.cone_angle(cone_cls));
        if (right < kPi || right > s.cone_angle(cone_cls) - kPi) continue;
        auto d = s.direction_at(cone_cls, cout);
        aim = {d.corner.face, s.vertex(d.corner.face, d.corner.vertex), wrap(d.chart_dir)};
      }
      GeodesicPath exact = trace(s, aim, c.arc + slack);
      if (!exact.hit_cone() || std::abs(exact.length - c.arc) > slack) continue;
      if (!from_cone) w.start = aim;
      else w.passages.back().coord_out = cout;
      for (const Segment& sg : exact.segments) out.push_back({T + sg.arc_start, sg});
      T += exact.length;
      const PathEvent& hit = exact.cone_hit();
      cone_cls = hit.cls;
      cone_in = hit.coord_in;
      double th = s.cone_angle(cone_cls);
      cone_out = cone_in + kPi + u01(rng) * (th - kTwoPi);
      w.passages.push_back({cone_cls, T, cone_in, cone_out});
      auto d = s.direction_at(cone_cls, cone_out);
      st = {d.corner.face, s.vertex(d.corner.face, d.corner.vertex), wrap(d.chart_dir)};
      from_cone = true;
      captured = true;
      break;
    }
    if (captured) continue;
    if (leg.hit_cone()) {
      w.failed = true;
      return w;
    }
    for (const Segment& sg : leg.segments) out.push_back({T + sg.arc_start, sg});
    break;
  }
  return w;
}

/// Trajectories from O: time bin k is hit when some sample is in U at a time in
/// [k dt, (k+1) dt).
inline MixingReport hit_times(const ConeSurface& s, const PhaseCell& O, const PhaseCell& U, double horizon, double dt,
                              int n_samples, std::uint64_t seed, const HitOptions& opt = {}) {
  if (!(horizon > 0.0) || !(dt > 0.0) || n_samples <= 0)
    throw Error(ErrorCode::InvalidArgument, "horizon, dt and sample count must be positive");
  MixingReport r;
  r.from = O;
  r.to = U;
  r.horizon = horizon;
  r.dt = dt;
  r.threshold = opt.threshold;
  r.samples = n_samples;
  const int nb = static_cast<int>(std::ceil(horizon / dt - 1e-12));
  const Box ub = cell_box(s, U);
  const double radius = opt.capture_radius < 0 ? 0.05 * s.diam_hint() : opt.capture_radius;
  cell_polygon(s, O);
  sample_cell(s, O, seed);  // EmptyCell check up front

  struct Item {
    std::vector<int> bins;
    double first = std::numeric_limits<double>::infinity();
    long redraws = 0, captures = 0;
  };
  std::vector<Item> items(n_samples);
  parallel_for(
      n_samples,
      [&](int i) {
        Item& it = items[i];
        std::mt19937_64 rng = item_rng(seed, static_cast<std::uint64_t>(i));
        std::vector<WitnessSegment> segs;
        for (int attempt = 0; attempt <= opt.max_redraws; ++attempt) {
          TangentState x = normalize_state(s, sample_cell(s, O, rng));
          if (opt.model == FlowModel::Straight) {
            GeodesicPath g = trace(s, x, horizon);
            if (g.hit_cone()) {
              ++it.redraws;
              continue;
            }
            segs.clear();
            for (const Segment& sg : g.segments) segs.push_back({sg.arc_start, sg});
            break;
          }
          Witness w = branching_witness(s, O, x, horizon, radius, rng);
          if (w.failed) {
            ++it.redraws;
            continue;
          }
          it.captures += static_cast<long>(w.passages.size());
          segs = std::move(w.segments);
          break;
        }
        for (const WitnessSegment& w : segs) {
          if (w.seg.face != U.face || !detail::sector_contains(U, w.seg.dir)) continue;
          double a, b;
          if (!detail::box_interval(w.seg, ub, a, b)) continue;
          a += w.t;
          b += w.t;
          if (a > horizon) continue;
          it.first = std::min(it.first, a);
          int k0 = std::clamp(static_cast<int>(std::floor(a / dt)), 0, nb - 1);
          int k1 = std::clamp(static_cast<int>(std::floor(std::min(b, horizon) / dt)), 0, nb - 1);
          for (int k = k0; k <= k1; ++k) it.bins.push_back(k);
        }
      },
      opt.workers);

  r.hits.assign(nb, 0);
  double first = std::numeric_limits<double>::infinity();
  for (const Item& it : items) {
    for (int k : it.bins) r.hits[k] = 1;
    first = std::min(first, it.first);
    r.redraws += it.redraws;
    r.captures += it.captures;
  }
  if (std::isfinite(first)) r.first_hit = first;
  // Smallest bin start t0 with hit fraction >= threshold on [t0, horizon].
  int h = 0;
  std::optional<int> k0;
  for (int k = nb - 1; k >= 0; --k) {
    h += r.hits[k];
    if (static_cast<double>(h) / (nb - k) >= r.threshold) k0 = k;
  }
  if (k0) {
    r.t0_estimate = *k0 * dt;
    r.fraction_after_t0 = r.hit_fraction(*k0);
  }
  return r;
}

struct TransitivityResult {
  bool success = false;
  std::vector<double> times;  // start of each hit bin, increasing
  std::string reason;         // "Distance", "NoLateHits" or empty on success
  MixingReport report;
};

/// Increasing sequence of hit times; succeeds when hits reach the last quarter of the horizon.
inline TransitivityResult transitivity_scan(const ConeSurface& s, const PhaseCell& O, const PhaseCell& U,
                                            double horizon, double dt, int n_samples, std::uint64_t seed,
                                            const HitOptions& opt = {}) {
  TransitivityResult t;
  // Cells farther apart than the horizon (beyond both cell radii) cannot meet.
  auto center = [&](const PhaseCell& c, double& rad) {
    auto P = cell_polygon(s, c);
    Vec2 m;
    for (Vec2 p : P) m += p;
    m = m / static_cast<double>(P.size());
    rad = 0.0;
    for (Vec2 p : P) rad = std::max(rad, dist(p, m));
    return m;
  };
  double ro = 0, ru = 0;
  Vec2 co = center(O, ro), cu = center(U, ru);
  try {
    local_distance(s, {O.face, co}, {U.face, cu}, horizon + ro + ru);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ExceedsRadius) throw;
    t.reason = "Distance";
    t.report.from = O;
    t.report.to = U;
    t.report.horizon = horizon;
    t.report.dt = dt;
    return t;
  }
  t.report = hit_times(s, O, U, horizon, dt, n_samples, seed, opt);
  for (int k = 0; k < t.report.bins(); ++k)
    if (t.report.hits[k]) t.times.push_back(k * dt);
  t.success = !t.times.empty() && t.times.back() + dt >= 0.75 * horizon;
  if (!t.success) t.reason = "NoLateHits";
  return t;
}

struct ConeApproachRow {
  int id = 0;
  TangentState start;
  double final_min = 0.0;
  bool hit_cone = false;
};

struct ConeApproachSummary {
  std::vector<ConeApproachRow> rows;
  std::vector<std::pair<double, double>> quantiles;  // (q, value)
};

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  double pos = q * (v.size() - 1);
  size_t i = static_cast<size_t>(std::floor(pos));
  size_t j = std::min(v.size() - 1, i + 1);
  return v[i] + (v[j] - v[i]) * (pos - i);
}

/// Uniform tangent state: face by area, point uniform in the face, direction uniform.
inline TangentState random_state(const ConeSurface& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double total = s.area(), r = u(rng) * total, acc = 0.0;
  int f = 0;
  for (; f + 1 < s.face_count(); ++f) {
    acc += polygon_area(s.face(f));
    if (r <= acc) break;
  }
  const auto& P = s.face(f);
  std::vector<double> tri;
  double t = 0.0;
  for (size_t i = 1; i + 1 < P.size(); ++i) tri.push_back(t += 0.5 * cross(P[i] - P[0], P[i + 1] - P[0]));
  double x = u(rng) * t;
  size_t k = std::min(tri.size() - 1, static_cast<size_t>(std::lower_bound(tri.begin(), tri.end(), x) - tri.begin()));
  double a = u(rng), b = u(rng);
  if (a + b > 1.0) a = 1.0 - a, b = 1.0 - b;
  return {f, P[0] + (P[k + 1] - P[0]) * a + (P[k + 2] - P[0]) * b, u(rng) * kTwoPi};
}

inline double final_min_cone_distance(const ConeSurface& s, const TangentState& start, double length, bool* hit = nullptr) {
  GeodesicPath g = trace(s, normalize_state(s, start), length);
  if (hit) *hit = g.hit_cone();
  auto prof = min_cone_distance_profile(s, g);
  return prof.back().min_distance;
}

/// Running-minimum cone distance at the end of random trajectories.
inline ConeApproachSummary cone_approach_experiment(const ConeSurface& s, int n_trajectories, double length,
                                                    std::uint64_t seed, int workers = 0) {
  ConeApproachSummary out;
  out.rows.resize(n_trajectories);
  parallel_for(
      n_trajectories,
      [&](int i) {
        std::mt19937_64 rng = item_rng(seed, static_cast<std::uint64_t>(i));
        ConeApproachRow& r = out.rows[i];
        r.id = i;
        r.start = random_state(s, rng);
        r.final_min = final_min_cone_distance(s, r.start, length, &r.hit_cone);
      },
      workers);
  std::vector<double> v;
  for (const auto& r : out.rows) v.push_back(r.final_min);
  for (double q : {0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0}) out.quantiles.push_back({q, quantile(v, q)});
  return out;
}

}  // namespace conetrace
