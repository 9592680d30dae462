#include "socnav/obsmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace socnav {

bool point_to_cell(const Vec2& p, const GridConfig& cfg, int* row, int* col) {
  // p is (forward, left) in the anchor robot frame.
  long long r = cfg.anchor_row() - std::llround(p.x / cfg.resolution);
  long long c = cfg.anchor_col() - std::llround(p.y / cfg.resolution);
  if (r < 0 || r >= cfg.height || c < 0 || c >= cfg.width) return false;
  *row = static_cast<int>(r);
  *col = static_cast<int>(c);
  return true;
}

OccupancyGrid rasterize_scan(const LaserScan& scan, const Pose2& relative_pose,
                             const GridConfig& cfg) {
  OccupancyGrid grid(cfg);
  const int n = static_cast<int>(scan.ranges.size());
  for (int i = 0; i < n; ++i) {
    const double range = scan.ranges[i];
    if (range >= scan.config.max_range) continue;  // no hit
    const double a = scan.beam_angle(i);
    Vec2 hit_scan{range * std::cos(a), range * std::sin(a)};
    Vec2 hit = relative_pose.transform(hit_scan);
    int r, c;
    if (point_to_cell(hit, cfg, &r, &c)) grid.at(r, c) = 1.0f;
  }
  return grid;
}

GridStack build_stack(const std::array<LaserScan, kStackDepth>& scans,
                      const std::array<Pose2, kStackDepth>& poses,
                      const GridConfig& cfg) {
  GridStack stack;
  const Pose2& newest = poses[kStackDepth - 1];
  for (int i = 0; i < kStackDepth; ++i) {
    Pose2 rel = poses[i].relative_to(newest);
    stack.frames[i] = rasterize_scan(scans[i], rel, cfg);
  }
  return stack;
}

MotionContent motion_content_split(const GridStack& stack) {
  MotionContent out;
  for (int i = 0; i + 1 < kStackDepth; ++i) {
    const OccupancyGrid& a = stack.frames[i];
    const OccupancyGrid& b = stack.frames[i + 1];
    OccupancyGrid diff(a.height, a.width);
    for (size_t k = 0; k < diff.cells.size(); ++k)
      diff.cells[k] = b.cells[k] - a.cells[k];
    out.motion[i] = std::move(diff);
  }
  out.content = stack.frames[kStackDepth - 1];
  return out;
}

CellAffine ego_motion_affine(const Pose2& ego_motion, const GridConfig& cfg) {
  const double ct = std::cos(ego_motion.theta), st = std::sin(ego_motion.theta);
  const double H1 = cfg.height - 1;
  const double A = cfg.anchor_col();
  CellAffine m;
  if (ego_motion.theta == 0.0 && ego_motion.x == 0.0 && ego_motion.y == 0.0)
    return m;  // exact identity
  m.m00 = ct;
  m.m01 = -st;
  m.m10 = st;
  m.m11 = ct;
  m.or_ = H1 * (1.0 - ct) + st * A - ego_motion.x / cfg.resolution;
  m.oc_ = A * (1.0 - ct) - st * H1 - ego_motion.y / cfg.resolution;
  return m;
}

OccupancyGrid affine_warp(const OccupancyGrid& grid, const Pose2& ego_motion,
                          const GridConfig& cfg) {
  OccupancyGrid out(grid.height, grid.width);
  CellAffine m = ego_motion_affine(ego_motion, cfg);
  warp_bilinear(grid.cells.data(), out.cells.data(), grid.height, grid.width, m);
  return out;
}

void propagate_proprioception(double* goal_dist, double* goal_bearing,
                              Action* vel, const Action& action, double dt) {
  Vec2 goal{*goal_dist * std::cos(*goal_bearing), *goal_dist * std::sin(*goal_bearing)};
  Pose2 displacement = step_agent(Pose2{}, action, dt);
  Vec2 g = displacement.inverse_transform(goal);
  *goal_dist = g.norm();
  *goal_bearing = (*goal_dist > 0.0) ? std::atan2(g.y, g.x) : 0.0;
  *vel = action;
}

NormalizedObs normalize_observation(const Observation& obs, const NormConfig& norms) {
  NormalizedObs out;
  const int hw = obs.maps.frames[0].height * obs.maps.frames[0].width;
  out.maps.resize(static_cast<size_t>(kStackDepth) * hw);
  for (int f = 0; f < kStackDepth; ++f)
    std::copy(obs.maps.frames[f].cells.begin(), obs.maps.frames[f].cells.end(),
              out.maps.begin() + static_cast<size_t>(f) * hw);
  out.goal_dist = static_cast<float>(std::clamp(obs.goal_dist / norms.d_max, 0.0, 1.0));
  out.goal_bearing = static_cast<float>((obs.goal_bearing + kPi) / (2.0 * kPi));
  out.v = static_cast<float>((obs.vel.v - kVMin) / (kVMax - kVMin));
  out.w = static_cast<float>((obs.vel.w - kWMin) / (kWMax - kWMin));
  return out;
}

void denormalize_scalars(const NormalizedObs& n, const NormConfig& norms,
                         double* goal_dist, double* goal_bearing, Action* vel) {
  *goal_dist = static_cast<double>(n.goal_dist) * norms.d_max;
  *goal_bearing = static_cast<double>(n.goal_bearing) * 2.0 * kPi - kPi;
  *vel = Action(static_cast<double>(n.v) * (kVMax - kVMin) + kVMin,
                static_cast<double>(n.w) * (kWMax - kWMin) + kWMin);
}

void ObservationBuilder::reset() {
  scans_.clear();
  poses_.clear();
}

void ObservationBuilder::push(const LaserScan& scan, const Pose2& pose) {
  if (scans_.size() == kStackDepth) {
    scans_.erase(scans_.begin());
    poses_.erase(poses_.begin());
  }
  scans_.push_back(scan);
  poses_.push_back(pose);
}

Observation ObservationBuilder::build(const Vec2& goal, const Action& vel) const {
  if (scans_.empty())
    throw std::logic_error("ObservationBuilder: build before any push");
  std::array<LaserScan, kStackDepth> scans;
  std::array<Pose2, kStackDepth> poses;
  const int pad = kStackDepth - static_cast<int>(scans_.size());
  for (int i = 0; i < kStackDepth; ++i) {
    int src = std::max(0, i - pad);
    scans[i] = scans_[src];
    poses[i] = poses_[src];
  }
  Observation obs;
  obs.maps = build_stack(scans, poses, cfg_);
  Vec2 g = poses.back().inverse_transform(goal);
  obs.goal_dist = g.norm();
  obs.goal_bearing = (obs.goal_dist > 0.0) ? std::atan2(g.y, g.x) : 0.0;
  obs.vel = vel;
  return obs;
}

void write_pgm(const OccupancyGrid& grid, const std::string& path) {
  write_pgm_strip({&grid}, path);
}

void write_pgm_strip(const std::vector<const OccupancyGrid*>& grids,
                     const std::string& path) {
  if (grids.empty()) throw std::invalid_argument("write_pgm_strip: no grids");
  const int h = grids[0]->height, w = grids[0]->width;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_pgm_strip: cannot open " + path);
  const int total_w = w * static_cast<int>(grids.size());
  os << "P5\n" << total_w << " " << h << "\n255\n";
  std::vector<unsigned char> row(total_w);
  for (int r = 0; r < h; ++r) {
    for (size_t g = 0; g < grids.size(); ++g) {
      for (int c = 0; c < w; ++c) {
        float v = std::clamp(grids[g]->at(r, c), 0.0f, 1.0f);
        row[g * w + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
    os.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
}

}  // namespace socnav
