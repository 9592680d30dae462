#pragma once

#include <cmath>

namespace socnav {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  double norm_sq() const { return x * x + y * y; }
};

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r = kPi;
  return r;
}

// 2D rigid pose; theta is always kept in (-pi, pi].
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

  Vec2 position() const { return {x, y}; }

  // World coordinates of a point given in this pose's frame.
  Vec2 transform(const Vec2& local) const {
    double c = std::cos(theta), s = std::sin(theta);
    return {x + c * local.x - s * local.y, y + s * local.x + c * local.y};
  }

  // This pose's frame coordinates of a world point.
  Vec2 inverse_transform(const Vec2& world) const {
    double c = std::cos(theta), s = std::sin(theta);
    double dx = world.x - x, dy = world.y - y;
    return {c * dx + s * dy, -s * dx + c * dy};
  }

  // Composition: the pose of (this ∘ rel), i.e. rel expressed through this frame.
  Pose2 compose(const Pose2& rel) const {
    Vec2 p = transform({rel.x, rel.y});
    return {p.x, p.y, theta + rel.theta};
  }

  // relative_to(ref) = ref^-1 ∘ this: this pose expressed in ref's frame.
  Pose2 relative_to(const Pose2& ref) const {
    Vec2 p = ref.inverse_transform({x, y});
    return {p.x, p.y, theta - ref.theta};
  }
};

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double len_sq = ab.norm_sq();
  if (len_sq <= 0.0) return (p - a).norm();
  double t = (p - a).dot(ab) / len_sq;
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  return (p - (a + ab * t)).norm();
}

}  // namespace socnav
