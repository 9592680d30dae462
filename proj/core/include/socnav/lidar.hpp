#pragma once

#include <optional>
#include <string>
#include <vector>

#include "socnav/sim.hpp"

namespace socnav {

struct LidarConfig {
  int n_beams = 180;
  double fov = kPi;          // forward-facing 180 degrees
  double max_range = 6.0;
  double min_range = 0.05;
  double noise_sigma = 0.0;  // optional additive Gaussian range noise
};

struct LaserScan {
  std::vector<float> ranges;  // length n_beams, each in [min_range, max_range]
  LidarConfig config;
  Pose2 pose_at_scan;

  // Beam angle relative to the sensor heading.
  double beam_angle(int i) const {
    return -config.fov * 0.5 + config.fov * i / (config.n_beams - 1);
  }
};

// Smallest non-negative ray parameter hitting the shape boundary, if any.
// `direction` must be unit-norm.
std::optional<double> intersect_ray(const Vec2& origin, const Vec2& direction,
                                    const Obstacle& shape);

std::optional<double> intersect_ray_circle(const Vec2& origin, const Vec2& dir,
                                           const Vec2& center, double radius);
std::optional<double> intersect_ray_segment(const Vec2& origin, const Vec2& dir,
                                            const Vec2& a, const Vec2& b);

// Simulates one scan for the given agent against all obstacles and every
// other agent body (self excluded). Pass an Rng when noise_sigma > 0.
LaserScan scan(const WorldState& world, int agent_index, const LidarConfig& cfg,
               Rng* noise_rng = nullptr);

// One CSV row: tick,x,y,theta,r0,...,rN-1
std::string scan_to_csv_row(const LaserScan& s, int64_t tick);

}  // namespace socnav
