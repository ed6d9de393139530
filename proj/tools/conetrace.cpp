#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "conetrace/closed_geodesics.hpp"
#include "conetrace/dynamics.hpp"
#include "conetrace/metric.hpp"

using namespace conetrace;

namespace {

constexpr const char* kVersion = "0.1.0";

// Exit codes.
constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_list(const std::string& text, size_t want, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad number in ") + what + ": '" + tok + "'");
    }
  }
  if (want && out.size() != want)
    throw UsageError(std::string(what) + " expects " + std::to_string(want) + " comma-separated values");
  return out;
}

Vec2 parse_point(const std::string& text, const char* what) {
  auto v = parse_list(text, 2, what);
  return {v[0], v[1]};
}

/// Options shared by every subcommand.
struct Common {
  std::string surface_path;
  std::string builtin_name;
  std::uint64_t seed = 0;
  std::string out = "-";
  std::string header;

  void add_to(CLI::App* sub) {
    sub->add_option("surface", surface_path, "Surface file");
    sub->add_option("--builtin", builtin_name, "Builtin surface: octagon6pi | decagon4pi4pi");
    sub->add_option("--seed", seed, "Random seed")->capture_default_str();
    sub->add_option("-o,--out", out, "Output file ('-' for stdout)")->capture_default_str();
  }

  ConeSurface load() const {
    if (surface_path.empty() == builtin_name.empty())
      throw UsageError("give exactly one of a surface file or --builtin");
    if (!builtin_name.empty()) {
      try {
        return builtin(builtin_name);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
    }
    std::ifstream in(surface_path);
    if (!in) throw UsageError("cannot open surface file '" + surface_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_surface(ss.str());
  }
};

/// Output sink: the artifact starts with the provenance comment.
class Sink {
 public:
  Sink(const Common& c) {
    if (c.out != "-") {
      file_.open(c.out);
      if (!file_) throw UsageError("cannot write '" + c.out + "'");
    }
    os() << c.header << "\n";
  }
  std::ostream& os() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

template <class T>
Sink& operator<<(Sink& s, const T& v) {
  s.os() << v;
  return s;
}

/// Geodesic start given on the command line.
struct StartArgs {
  int face = 0;
  std::string start = "0,0";
  double dir = 0.0;

  void add_to(CLI::App* sub) {
    sub->add_option("--face", face, "Start face")->capture_default_str();
    sub->add_option("--start", start, "Start point x,y in the face chart")->capture_default_str();
    sub->add_option("--dir", dir, "Start direction (radians, chart angle)")->capture_default_str();
  }
  TangentState state(const ConeSurface& s) const {
    if (face < 0 || face >= s.face_count()) throw UsageError("face out of range");
    Vec2 p = parse_point(start, "--start");
    if (!s.contains(face, p, s.eps_geom())) throw UsageError("start point outside its face");
    return normalize_state(s, {face, p, wrap(dir)});
  }
};

const char* event_name(EventKind k) {
  switch (k) {
    case EventKind::EdgeCross: return "EdgeCross";
    case EventKind::VertexPass: return "VertexPass";
    case EventKind::ConeHit: return "ConeHit";
  }
  return "?";
}

// ---- validate / serialize / gb-audit ----

int cmd_validate(const Common& c) {
  ConeSurface s = c.load();
  ValidationReport r = validate(s);
  Sink out(c);
  out << "ok " << (r.ok ? "yes" : "no") << "\n";
  out << "faces " << s.face_count() << "\n";
  out << "euler_characteristic " << r.euler_characteristic << "\n";
  out << "genus " << r.genus << "\n";
  out << "cone_points " << r.cone_points.size() << "\n";
  for (auto [cls, angle] : r.cone_points)
    out << "cone class " << cls << " angle " << fmt(angle) << " pi_multiple " << fmt(angle / kPi) << "\n";
  for (const auto& f : r.violations) out << "violation " << f.code << " " << f.message << "\n";
  for (const auto& f : r.warnings) out << "warning " << f.code << " " << f.message << "\n";
  return r.ok ? kOk : kFailed;
}

int cmd_serialize(const Common& c) {
  ConeSurface s = c.load();
  Sink out(c);
  out << serialize(s);
  return kOk;
}

int cmd_gb_audit(const Common& c, const std::string& interior, const std::string& boundary) {
  Sink out(c);
  if (!interior.empty() || !boundary.empty()) {
    auto in = interior.empty() ? std::vector<double>{} : parse_list(interior, 0, "--interior");
    auto bd = boundary.empty() ? std::vector<double>{} : parse_list(boundary, 0, "--boundary");
    out << "residual\n" << fmt(gb_residual(in, bd)) << "\n";
    return kOk;
  }
  ConeSurface s = c.load();
  ValidationReport r = validate(s);
  out << "class,angle,defect\n";
  double sum = 0.0;
  for (int k = 0; k < s.class_count(); ++k) {
    double d = kTwoPi - s.cone_angle(k);
    sum += d;
    out << k << "," << fmt(s.cone_angle(k)) << "," << fmt(d) << "\n";
  }
  double residual = sum - kTwoPi * r.euler_characteristic;
  out << "# chi " << r.euler_characteristic << " defect_sum " << fmt(sum) << " residual " << fmt(residual) << "\n";
  return std::abs(residual) <= ConeSurface::eps_angle() * s.class_count() ? kOk : kFailed;
}

// ---- trace / develop ----

int cmd_trace(const Common& c, const StartArgs& a, double len) {
  ConeSurface s = c.load();
  if (!(len > 0)) throw UsageError("--len must be positive");
  GeodesicPath g = trace(s, a.state(s), len);
  Sink out(c);
  out << "arc_length,face,x,y,dir,event\n";
  auto row = [&](double arc, int f, Vec2 p, double dir, const char* ev) {
    out << fmt(arc) << "," << f << "," << fmt(p.x) << "," << fmt(p.y) << "," << fmt(dir) << "," << ev << "\n";
  };
  row(0.0, g.start.face, g.start.point, g.start.direction, "Start");
  for (size_t k = 0; k < g.segments.size(); ++k) {
    const Segment& sg = g.segments[k];
    if (k < g.events.size()) {
      row(g.events[k].arc, sg.face, sg.exit, sg.dir, event_name(g.events[k].kind));
    } else {
      row(g.length, sg.face, sg.exit, sg.dir, "End");
    }
  }
  return kOk;
}

int cmd_develop(const Common& c, const StartArgs& a, double len) {
  ConeSurface s = c.load();
  if (!(len > 0)) throw UsageError("--len must be positive");
  GeodesicPath g = trace(s, a.state(s), len);
  Development d = develop(g);
  Sink out(c);
  out << "t,X,Y\n";
  out << fmt(0.0) << "," << fmt(d.polyline.front().x) << "," << fmt(d.polyline.front().y) << "\n";
  for (size_t k = 1; k < d.polyline.size(); ++k) {
    const Segment& sg = g.segments[k - 1];
    double t = sg.arc_start + sg.length;
    out << fmt(t) << "," << fmt(d.polyline[k].x) << "," << fmt(d.polyline[k].y) << "\n";
  }
  return kOk;
}

// ---- shorten / cylinder / unique-search ----

/// Trace from the start and close the path back to it through face-adjacent midpoints.
Polyline closed_loop(const ConeSurface& s, const StartArgs& a, double len) {
  TangentState st = a.state(s);
  GeodesicPath g = trace(s, st, len, {.cone_policy = ConePolicy::Error});
  TangentState e = g.end_state();
  return concat(s, from_path(s, g), connecting_path(s, e.face, e.point, st.face, st.point));
}

int cmd_shorten(const Common& c, const StartArgs& a, double len) {
  ConeSurface s = c.load();
  ShortenStats stats;
  ClosedGeodesic g = shorten(s, closed_loop(s, a, len), {}, &stats);
  CertificateCheck chk = check_certificate(s, g);
  Sink out(c);
  out << "# rounds " << stats.rounds << " input_length " << fmt(stats.lengths.front()) << "\n";
  out << certificate_text(s, g);
  return chk.ok ? kOk : kFailed;
}

int cmd_cylinder(const Common& c, const StartArgs& a, double len, double offset) {
  ConeSurface s = c.load();
  ClosedGeodesic g = shorten(s, closed_loop(s, a, len));
  FlatCylinder cyl = flat_cylinder(s, g);
  Sink out(c);
  out << "circumference " << fmt(cyl.circumference) << "\n";
  out << "width_left " << fmt(cyl.width_left) << "\n";
  out << "width_right " << fmt(cyl.width_right) << "\n";
  TangentState st = cyl.core.legs.front().start;
  out << "core face " << st.face << " point " << fmt(st.point.x) << " " << fmt(st.point.y) << " dir "
      << fmt(st.direction) << "\n";
  if (offset != 0.0) {
    ClosedGeodesic t = translate(s, cyl.core, offset);
    out << "translate " << fmt(offset) << " period " << fmt(t.period) << "\n";
  }
  return kOk;
}

int cmd_unique_search(const Common& c, int budget) {
  ConeSurface s = c.load();
  UniqueSearch r = search_unique_closed(s, budget, c.seed);
  Sink out(c);
  out << "# loops_tried " << r.loops_tried << " null_homotopic " << r.null_homotopic << " repeated "
      << r.repeated_classes << "\n";
  if (!r.found) {
    out << "found no\n";
    return kFailed;
  }
  out << certificate_text(s, *r.found);
  return check_certificate(s, *r.found).ok ? kOk : kFailed;
}

// ---- busemann / converge ----

int cmd_busemann(const Common& c, const StartArgs& a, const std::string& x, const std::string& xp) {
  ConeSurface s = c.load();
  TangentState st = a.state(s);
  Vec2 px = x.empty() ? st.point : parse_point(x, "--x");
  Vec2 pxp = parse_point(xp, "--xp");
  BusemannEstimate b = busemann(s, st, {st.face, px}, {st.face, pxp});
  Sink out(c);
  out << "# value " << fmt(b.value) << " t_used " << fmt(b.t_used) << " converged " << (b.converged ? "yes" : "no")
      << "\n";
  out << "t,alpha_t\n";
  for (auto [t, v] : b.history) out << fmt(t) << "," << fmt(v) << "\n";
  return kOk;
}

int cmd_converge(const Common& c, const StartArgs& a, const std::string& p2, double len, int samples) {
  ConeSurface s = c.load();
  if (samples < 2) throw UsageError("--samples must be at least 2");
  TangentState st = a.state(s);
  Vec2 q = parse_point(p2, "--other");
  if (!s.contains(st.face, q, s.eps_geom())) throw UsageError("--other must lie in the start face");
  ConvergingPair cp = converging_pair(s, st, q, len);
  Reparam r = equidistant_reparam(s, cp.g1, cp.g2, cp.tether);
  auto prof = convergence_profile(s, cp.g1, cp.g2, cp.tether, r, r.horizon, samples);
  Sink out(c);
  out << "# c " << fmt(r.c) << " horizon " << fmt(r.horizon) << "\n";
  out << "t,dist\n";
  for (const auto& p : prof) out << fmt(p.t) << "," << fmt(p.dist) << "\n";
  return kOk;
}

// ---- mix / transit / cone-approach ----

struct FlowArgs {
  std::string from, to;
  double horizon = -1.0;
  double dt = 0.5;
  int samples = 4000;
  std::string model = "straight";

  void add_to(CLI::App* sub) {
    sub->add_option("--from", from, "Cell O as face,ix,iy,sector (random when omitted)");
    sub->add_option("--to", to, "Cell U as face,ix,iy,sector (random when omitted)");
    sub->add_option("--horizon", horizon, "Horizon (default 100 diam)");
    sub->add_option("--dt", dt, "Bin width")->capture_default_str();
    sub->add_option("--samples", samples, "Samples per run")->capture_default_str();
    sub->add_option("--model", model, "Flow through cone points: straight | branching")
        ->check(CLI::IsMember({"straight", "branching"}))
        ->capture_default_str();
  }
  PhaseCell cell(const ConeSurface& s, const std::string& text, std::mt19937_64& rng) const {
    if (text.empty()) return random_cell(s, rng);
    auto v = parse_list(text, 4, "cell");
    PhaseCell pc{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]), static_cast<int>(v[3])};
    if (pc.face < 0 || pc.face >= s.face_count() || pc.ix < 0 || pc.ix >= pc.nx || pc.iy < 0 || pc.iy >= pc.ny ||
        pc.sector < 0 || pc.sector >= pc.sectors)
      throw UsageError("cell out of range");
    return pc;
  }
  HitOptions options() const {
    HitOptions o;
    o.model = model == "branching" ? FlowModel::ConeBranching : FlowModel::Straight;
    return o;
  }
};

std::string cell_text(const PhaseCell& c) {
  return std::to_string(c.face) + "," + std::to_string(c.ix) + "," + std::to_string(c.iy) + "," +
         std::to_string(c.sector);
}

int cmd_mix(const Common& c, const FlowArgs& f) {
  ConeSurface s = c.load();
  std::mt19937_64 rng(c.seed);
  PhaseCell O = f.cell(s, f.from, rng), U = f.cell(s, f.to, rng);
  double horizon = f.horizon > 0 ? f.horizon : 100 * s.diam_hint();
  MixingReport r = hit_times(s, O, U, horizon, f.dt, f.samples, c.seed, f.options());
  Sink out(c);
  out << "# from " << cell_text(O) << " to " << cell_text(U) << " samples " << r.samples << " first_hit "
      << (r.first_hit ? fmt(*r.first_hit) : "none") << " t0_estimate "
      << (r.t0_estimate ? fmt(*r.t0_estimate) : "none") << " fraction_after_t0 " << fmt(r.fraction_after_t0)
      << "\n";
  out << "bin_index,t_lo,t_hi,hit\n";
  for (int k = 0; k < r.bins(); ++k)
    out << k << "," << fmt(k * f.dt) << "," << fmt(std::min(horizon, (k + 1) * f.dt)) << "," << int(r.hits[k]) << "\n";
  return kOk;
}

int cmd_transit(const Common& c, const FlowArgs& f) {
  ConeSurface s = c.load();
  std::mt19937_64 rng(c.seed);
  PhaseCell O = f.cell(s, f.from, rng), U = f.cell(s, f.to, rng);
  double horizon = f.horizon > 0 ? f.horizon : 100 * s.diam_hint();
  TransitivityResult t = transitivity_scan(s, O, U, horizon, f.dt, f.samples, c.seed, f.options());
  Sink out(c);
  out << "# from " << cell_text(O) << " to " << cell_text(U) << " success " << (t.success ? "yes" : "no")
      << (t.reason.empty() ? "" : " reason " + t.reason) << "\n";
  out << "index,t\n";
  for (size_t k = 0; k < t.times.size(); ++k) out << k << "," << fmt(t.times[k]) << "\n";
  return kOk;
}

int cmd_cone_approach(const Common& c, int n, double len, const std::string& summary) {
  ConeSurface s = c.load();
  if (n <= 0) throw UsageError("--n must be positive");
  if (len <= 0) len = 100 * s.diam_hint();
  ConeApproachSummary r = cone_approach_experiment(s, n, len, c.seed);
  Sink out(c);
  out << "id,face,x,y,dir,final_min,hit_cone\n";
  for (const auto& row : r.rows)
    out << row.id << "," << row.start.face << "," << fmt(row.start.point.x) << "," << fmt(row.start.point.y) << ","
        << fmt(row.start.direction) << "," << fmt(row.final_min) << "," << int(row.hit_cone) << "\n";
  if (!summary.empty()) {
    Common sc = c;
    sc.out = summary;
    Sink so(sc);
    so << "quantile,final_min\n";
    for (auto [q, v] : r.quantiles) so << fmt(q) << "," << fmt(v) << "\n";
  }
  return kOk;
}

std::string joined_argv(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geodesics on flat surfaces with cone points"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  StartArgs start;
  FlowArgs flow;
  double len = 2.5, offset = 0.0;
  int budget = 200, samples = 11, n = 100;
  std::string interior, boundary, x, xp, other = "0.5,0", summary;

  auto sub = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    common.add_to(s);
    return s;
  };
  CLI::App* validate_cmd = sub("validate", "Check a surface and print its report");
  CLI::App* serialize_cmd = sub("serialize", "Print the surface in file format");
  CLI::App* gb_cmd = sub("gb-audit", "Angle-defect accounting, or a residual for given angles");
  gb_cmd->add_option("--interior", interior, "Interior cone angles, comma-separated");
  gb_cmd->add_option("--boundary", boundary, "Boundary corner angles, comma-separated");

  CLI::App* trace_cmd = sub("trace", "Trace a geodesic; CSV of segment endpoints and events");
  CLI::App* develop_cmd = sub("develop", "Developed image of a traced geodesic");
  CLI::App* shorten_cmd = sub("shorten", "Shorten a closed loop; prints the certificate");
  CLI::App* cyl_cmd = sub("cylinder", "Shorten a loop and measure its flat cylinder");
  for (CLI::App* s : {trace_cmd, develop_cmd, shorten_cmd, cyl_cmd}) {
    start.add_to(s);
    s->add_option("--len", len, "Trace length (loops are closed back to the start)")->capture_default_str();
  }
  cyl_cmd->add_option("--translate", offset, "Also re-trace the core shifted by this offset (left positive)");

  CLI::App* unique_cmd = sub("unique-search", "Search random loops for a closed geodesic unique in its class");
  unique_cmd->add_option("--budget", budget, "Loops to try")->capture_default_str();

  CLI::App* busemann_cmd = sub("busemann", "Busemann history along a ray");
  start.add_to(busemann_cmd);
  busemann_cmd->add_option("--x", x, "Point x (default: the ray start)");
  busemann_cmd->add_option("--xp", xp, "Point x'")->required();

  CLI::App* converge_cmd = sub("converge", "Distance profile of two geodesics with a common target");
  start.add_to(converge_cmd);
  converge_cmd->add_option("--other", other, "Start of the second geodesic, same face")->capture_default_str();
  converge_cmd->add_option("--len", len, "Length of the first geodesic");
  converge_cmd->add_option("--samples", samples, "Profile samples")->capture_default_str();

  CLI::App* mix_cmd = sub("mix", "Hit-time bins of O flowed into U");
  CLI::App* transit_cmd = sub("transit", "Transitivity scan of O into U");
  flow.add_to(mix_cmd);
  flow.add_to(transit_cmd);

  CLI::App* cone_cmd = sub("cone-approach", "Final running-min cone distance of random trajectories");
  cone_cmd->add_option("--n", n, "Trajectories")->capture_default_str();
  cone_cmd->add_option("--len", len, "Trajectory length (default 100 diam)");
  cone_cmd->add_option("--summary", summary, "Write the quantile summary CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  common.header = "# conetrace " + std::string(kVersion) + " argv: " + joined_argv(argc, argv) +
                  " seed: " + std::to_string(common.seed);
  // Defaults that depend on the subcommand.
  bool len_given = false;
  for (CLI::App* s : {trace_cmd, develop_cmd, shorten_cmd, cyl_cmd, converge_cmd, cone_cmd})
    if (s->parsed() && s->count("--len")) len_given = true;
  try {
    if (validate_cmd->parsed()) return cmd_validate(common);
    if (serialize_cmd->parsed()) return cmd_serialize(common);
    if (gb_cmd->parsed()) return cmd_gb_audit(common, interior, boundary);
    if (trace_cmd->parsed()) return cmd_trace(common, start, len);
    if (develop_cmd->parsed()) return cmd_develop(common, start, len);
    if (shorten_cmd->parsed()) return cmd_shorten(common, start, len);
    if (cyl_cmd->parsed()) return cmd_cylinder(common, start, len, offset);
    if (unique_cmd->parsed()) return cmd_unique_search(common, budget);
    if (busemann_cmd->parsed()) return cmd_busemann(common, start, x, xp);
    if (converge_cmd->parsed()) return cmd_converge(common, start, other, len_given ? len : 1000.0, samples);
    if (mix_cmd->parsed()) return cmd_mix(common, flow);
    if (transit_cmd->parsed()) return cmd_transit(common, flow);
    if (cone_cmd->parsed()) return cmd_cone_approach(common, n, len_given ? len : -1.0, summary);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
