#pragma once

#include <array>
#include <string>
#include <vector>

#include "socnav/lidar.hpp"
#include "socnav/warp.hpp"

namespace socnav {

inline constexpr int kStackDepth = 10;  // consecutive scans per observation

// Local grid: robot anchored at the middle of the bottom edge, forward is up
// (decreasing row index).
struct GridConfig {
  int width = 64;
  int height = 64;
  double resolution = 0.1;  // meters per cell

  int anchor_col() const { return width / 2; }
  int anchor_row() const { return height - 1; }
  int cells() const { return width * height; }
};

struct OccupancyGrid {
  int height = 0;
  int width = 0;
  std::vector<float> cells;  // row-major, values in [0,1]

  OccupancyGrid() = default;
  OccupancyGrid(int h, int w) : height(h), width(w), cells(h * w, 0.0f) {}
  explicit OccupancyGrid(const GridConfig& cfg)
      : OccupancyGrid(cfg.height, cfg.width) {}

  float& at(int r, int c) { return cells[r * width + c]; }
  float at(int r, int c) const { return cells[r * width + c]; }
};

struct GridStack {
  std::array<OccupancyGrid, kStackDepth> frames;  // chronological, newest last
};

struct Observation {
  GridStack maps;
  double goal_dist = 0.0;     // meters
  double goal_bearing = 0.0;  // radians in (-pi, pi]
  Action vel;                 // last commanded action
};

struct NormConfig {
  double d_max = 10.0;  // goal-distance cap for normalization
};

struct NormalizedObs {
  std::vector<float> maps;  // kStackDepth * H * W, row-major per frame
  float goal_dist = 0.0f;
  float goal_bearing = 0.0f;
  float v = 0.0f;
  float w = 0.0f;
};

// Maps a robot-frame point to a cell; returns false when out of bounds.
bool point_to_cell(const Vec2& p, const GridConfig& cfg, int* row, int* col);

// Rasterizes the scan's hit points into a grid. `relative_pose` expresses the
// scan pose in the target (newest) frame; beams at max range contribute
// nothing.
OccupancyGrid rasterize_scan(const LaserScan& scan, const Pose2& relative_pose,
                             const GridConfig& cfg);

// Aligns the ten scans into the frame of the newest pose via odometry.
GridStack build_stack(const std::array<LaserScan, kStackDepth>& scans,
                      const std::array<Pose2, kStackDepth>& poses,
                      const GridConfig& cfg);

struct MotionContent {
  std::array<OccupancyGrid, kStackDepth - 1> motion;  // adjacent diffs, [-1,1]
  OccupancyGrid content;                              // newest frame
};

MotionContent motion_content_split(const GridStack& stack);

// Cell-space affine for resampling a grid under a rigid ego motion
// (the robot's new pose expressed in the old frame).
CellAffine ego_motion_affine(const Pose2& ego_motion, const GridConfig& cfg);

OccupancyGrid affine_warp(const OccupancyGrid& grid, const Pose2& ego_motion,
                          const GridConfig& cfg);

// Analytic update of goal/velocity proprioception under an action command.
void propagate_proprioception(double* goal_dist, double* goal_bearing,
                              Action* vel, const Action& action, double dt);

NormalizedObs normalize_observation(const Observation& obs, const NormConfig& norms);

// Inverse of the scalar part of normalize_observation (grids pass through).
void denormalize_scalars(const NormalizedObs& n, const NormConfig& norms,
                         double* goal_dist, double* goal_bearing, Action* vel);

// Rolling scan/pose history that pads with the earliest entry until full.
class ObservationBuilder {
 public:
  explicit ObservationBuilder(const GridConfig& cfg) : cfg_(cfg) {}

  void reset();
  void push(const LaserScan& scan, const Pose2& pose);
  bool empty() const { return scans_.empty(); }

  // Builds the aligned observation for the agent with the given goal; `vel`
  // is the last commanded action.
  Observation build(const Vec2& goal, const Action& vel) const;

  const GridConfig& grid() const { return cfg_; }

  // Checkpoint support.
  const std::vector<LaserScan>& scans() const { return scans_; }
  const std::vector<Pose2>& poses() const { return poses_; }
  void restore(std::vector<LaserScan> scans, std::vector<Pose2> poses) {
    scans_ = std::move(scans);
    poses_ = std::move(poses);
  }

 private:
  GridConfig cfg_;
  std::vector<LaserScan> scans_;  // at most kStackDepth, chronological
  std::vector<Pose2> poses_;
};

// 8-bit PGM, 0 = free, 255 = occupied.
void write_pgm(const OccupancyGrid& grid, const std::string& path);
// Frames concatenated left-to-right into one strip.
void write_pgm_strip(const std::vector<const OccupancyGrid*>& grids,
                     const std::string& path);

}  // namespace socnav
