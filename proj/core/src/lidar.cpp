#include "socnav/lidar.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace socnav {

std::optional<double> intersect_ray_circle(const Vec2& origin, const Vec2& dir,
                                           const Vec2& center, double radius) {
  // |origin + t*dir - center|^2 = r^2, dir unit-norm.
  Vec2 oc = origin - center;
  double b = oc.dot(dir);
  double c = oc.norm_sq() - radius * radius;
  double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  double s = std::sqrt(disc);
  double t1 = -b - s;
  if (t1 >= 0.0) return t1;
  double t2 = -b + s;
  if (t2 >= 0.0) return t2;
  return std::nullopt;
}

std::optional<double> intersect_ray_segment(const Vec2& origin, const Vec2& dir,
                                            const Vec2& a, const Vec2& b) {
  // origin + t*dir = a + u*(b-a), t >= 0, u in [0,1].
  Vec2 ab = b - a;
  double denom = dir.x * ab.y - dir.y * ab.x;
  if (std::abs(denom) < 1e-15) return std::nullopt;  // parallel
  Vec2 ao = a - origin;
  double t = (ao.x * ab.y - ao.y * ab.x) / denom;
  double u = (ao.x * dir.y - ao.y * dir.x) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

namespace {

std::optional<double> intersect_ray_rect(const Vec2& origin, const Vec2& dir,
                                         const RectShape& r) {
  // Slab test in the rect's frame.
  double c = std::cos(r.rotation), s = std::sin(r.rotation);
  Vec2 o{c * (origin.x - r.center.x) + s * (origin.y - r.center.y),
         -s * (origin.x - r.center.x) + c * (origin.y - r.center.y)};
  Vec2 d{c * dir.x + s * dir.y, -s * dir.x + c * dir.y};

  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  const double ox[2] = {o.x, o.y}, dx[2] = {d.x, d.y};
  const double ext[2] = {r.extents.x, r.extents.y};
  for (int i = 0; i < 2; ++i) {
    if (std::abs(dx[i]) < 1e-15) {
      if (std::abs(ox[i]) > ext[i]) return std::nullopt;
      continue;
    }
    double inv = 1.0 / dx[i];
    double t1 = (-ext[i] - ox[i]) * inv;
    double t2 = (ext[i] - ox[i]) * inv;
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmin >= 0.0) return tmin;   // entering the boundary
  if (tmax >= 0.0) return tmax;   // origin inside: exit point
  return std::nullopt;
}

}  // namespace

std::optional<double> intersect_ray(const Vec2& origin, const Vec2& direction,
                                    const Obstacle& shape) {
  return std::visit(
      [&](const auto& sh) -> std::optional<double> {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, CircleShape>) {
          return intersect_ray_circle(origin, direction, sh.center, sh.radius);
        } else if constexpr (std::is_same_v<T, SegmentShape>) {
          return intersect_ray_segment(origin, direction, sh.a, sh.b);
        } else {
          return intersect_ray_rect(origin, direction, sh);
        }
      },
      shape.shape);
}

LaserScan scan(const WorldState& world, int agent_index, const LidarConfig& cfg,
               Rng* noise_rng) {
  const AgentState& agent = world.agents[agent_index];
  LaserScan out;
  out.config = cfg;
  out.pose_at_scan = agent.pose;
  out.ranges.resize(cfg.n_beams);

  const Vec2 origin = agent.pose.position();
  for (int i = 0; i < cfg.n_beams; ++i) {
    double ang = agent.pose.theta + out.beam_angle(i);
    Vec2 dir{std::cos(ang), std::sin(ang)};
    double best = cfg.max_range;
    for (const auto& obs : world.obstacles) {
      auto t = intersect_ray(origin, dir, obs);
      if (t && *t < best) best = *t;
    }
    for (size_t j = 0; j < world.agents.size(); ++j) {
      if (static_cast<int>(j) == agent_index) continue;
      auto t = intersect_ray_circle(origin, dir, world.agents[j].pose.position(),
                                    world.agents[j].radius);
      if (t && *t < best) best = *t;
    }
    if (cfg.noise_sigma > 0.0 && noise_rng && best < cfg.max_range)
      best += noise_rng->normal(0.0, cfg.noise_sigma);
    out.ranges[i] = static_cast<float>(std::clamp(best, cfg.min_range, cfg.max_range));
  }
  return out;
}

std::string scan_to_csv_row(const LaserScan& s, int64_t tick) {
  std::ostringstream os;
  os << tick << ',' << s.pose_at_scan.x << ',' << s.pose_at_scan.y << ','
     << s.pose_at_scan.theta;
  for (float r : s.ranges) os << ',' << r;
  return os.str();
}

}  // namespace socnav
