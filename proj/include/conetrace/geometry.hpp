#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace conetrace {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
  constexpr double norm2() const { return x * x + y * y; }
  double arg() const { return std::atan2(y, x); }
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
constexpr Vec2 perp(Vec2 a) { return {-a.y, a.x}; }  // ccw quarter turn
inline double dist(Vec2 a, Vec2 b) { return (a - b).norm(); }
inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

inline std::ostream& operator<<(std::ostream& os, Vec2 v) {
  return os << '(' << v.x << ", " << v.y << ')';
}

/// Reduce an angle to [0, period).
inline double wrap(double a, double period = kTwoPi) {
  double r = std::fmod(a, period);
  if (r < 0) r += period;
  if (r >= period) r -= period;
  return r;
}

/// Reduce an angle to (-pi, pi].
inline double wrap_signed(double a) {
  double r = wrap(a + kPi) - kPi;
  if (r <= -kPi) r += kTwoPi;
  return r;
}

/// Signed ccw angle turning `from` onto `to`, in (-pi, pi].
inline double signed_angle(Vec2 from, Vec2 to) {
  return std::atan2(cross(from, to), dot(from, to));
}

/// Distance from point p to the closed segment [a, b].
inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = ab.norm2();
  if (len2 == 0.0) return dist(p, a);
  double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return dist(p, a + ab * t);
}

/// Orientation-preserving rigid motion x -> R(rotation) x + translation.
class PlaneIsometry {
 public:
  PlaneIsometry() = default;
  PlaneIsometry(double rotation, Vec2 translation)
      : rotation_(rotation), c_(std::cos(rotation)), s_(std::sin(rotation)), t_(translation) {}

  static PlaneIsometry identity() { return {}; }
  static PlaneIsometry translation(Vec2 t) { return {0.0, t}; }
  static PlaneIsometry rotation_about(Vec2 center, double angle) {
    PlaneIsometry r(angle, {});
    return PlaneIsometry(angle, center - r.rotate(center));
  }
  /// The unique isometry taking segment (a0, a1) onto (b0, b1); lengths must agree.
  static PlaneIsometry matching(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
    double rot = (b1 - b0).arg() - (a1 - a0).arg();
    PlaneIsometry r(rot, {});
    // Align midpoints so that a small length mismatch splits evenly.
    Vec2 am = (a0 + a1) * 0.5;
    Vec2 bm = (b0 + b1) * 0.5;
    return PlaneIsometry(rot, bm - r.rotate(am));
  }

  double rotation() const { return rotation_; }
  Vec2 translation() const { return t_; }

  Vec2 rotate(Vec2 v) const { return {c_ * v.x - s_ * v.y, s_ * v.x + c_ * v.y}; }
  Vec2 operator()(Vec2 p) const { return rotate(p) + t_; }

  /// (*this ∘ other)(p) = (*this)(other(p)).
  PlaneIsometry operator*(const PlaneIsometry& o) const {
    return PlaneIsometry(wrap_signed(rotation_ + o.rotation_), rotate(o.t_) + t_);
  }

  PlaneIsometry inverse() const {
    PlaneIsometry r(-rotation_, {});
    return PlaneIsometry(-rotation_, -r.rotate(t_));
  }

  /// Max deviation between the two maps over the unit-scale probe set.
  double distance_to(const PlaneIsometry& o, double scale = 1.0) const {
    double d = 0.0;
    for (Vec2 p : {Vec2{0, 0}, Vec2{scale, 0}, Vec2{0, scale}}) d = std::max(d, dist((*this)(p), o(p)));
    return d;
  }

  bool is_identity(double tol) const { return distance_to(identity()) <= tol; }

 private:
  double rotation_ = 0.0;
  double c_ = 1.0;
  double s_ = 0.0;
  Vec2 t_{};
};

}  // namespace conetrace
