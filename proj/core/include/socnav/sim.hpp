#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "socnav/geometry.hpp"
#include "socnav/rng.hpp"

namespace socnav {

inline constexpr double kVMin = 0.0;
inline constexpr double kVMax = 1.0;
inline constexpr double kWMin = -1.5;
inline constexpr double kWMax = 1.5;

// Differential-drive command; clamped into bounds at construction.
struct Action {
  double v = 0.0;
  double w = 0.0;

  Action() = default;
  Action(double v_, double w_)
      : v(v_ < kVMin ? kVMin : (v_ > kVMax ? kVMax : v_)),
        w(w_ < kWMin ? kWMin : (w_ > kWMax ? kWMax : w_)) {}
};

enum class AgentStatus { active, arrived, collided, timed_out };

struct AgentState {
  Pose2 pose;
  Action vel;         // last commanded action
  Vec2 goal;
  double radius = 0.3;
  AgentStatus status = AgentStatus::active;

  bool active() const { return status == AgentStatus::active; }
};

struct CircleShape {
  Vec2 center;
  double radius = 0.0;
};

struct SegmentShape {
  Vec2 a, b;
};

struct RectShape {
  Vec2 center;
  Vec2 extents;      // half-sizes along the rect's own axes
  double rotation = 0.0;
};

struct Obstacle {
  std::variant<CircleShape, SegmentShape, RectShape> shape;
};

// Surface distance from a point to an obstacle (0 on the boundary, 0 inside).
double obstacle_distance(const Vec2& p, const Obstacle& obs);

struct WorldState {
  std::vector<AgentState> agents;
  std::vector<Obstacle> obstacles;
  int64_t tick = 0;
  double dt = 0.1;
  int main_agent = 0;  // the single data-collecting agent
};

enum class ScenarioKind { passing, towards, crossing, random, static_mapless };

struct Scenario {
  ScenarioKind kind = ScenarioKind::random;
  uint64_t seed = 0;
  int n_agents = 4;
  double bounds = 10.0;          // side length of the square arena, meters
  double obstacle_density = 0.05;
};

const char* to_string(ScenarioKind k);
std::optional<ScenarioKind> scenario_kind_from_string(const std::string& s);

// Episode bookkeeping knobs shared by stepping and reward computation.
struct SimParams {
  double dt = 0.1;
  int64_t timeout_ticks = 600;
  double goal_tolerance = 0.3;
  double agent_radius = 0.3;
};

// Closed-form unicycle integration over one step.
Pose2 step_agent(const Pose2& pose, const Action& action, double dt);

// Advances every active agent simultaneously from the pre-step snapshot, then
// refreshes collision/arrival/timeout statuses. Throws std::invalid_argument
// if the action count does not match the number of active agents.
void step_world(WorldState& world, const std::vector<Action>& actions,
                const SimParams& params);

struct Clearances {
  double d = 0.0;      // min center-to-surface distance, obstacles and peers
  double d_ped = 0.0;  // min center-to-peer-surface distance, peers only
};

// Ground-truth clearances for one agent. `d` saturates at lidar_max_range when
// nothing is closer; `d_ped` is +inf without peers. Both clamped >= 0.
Clearances min_clearances(const WorldState& world, int agent_index,
                          double lidar_max_range = 6.0);

// Deterministic world construction from a scenario spec. Throws
// std::runtime_error when rejection sampling fails to place entities.
WorldState generate_scenario(const Scenario& spec, const SimParams& params);

std::string scenario_to_json(const Scenario& spec);
Scenario scenario_from_json(const std::string& text);

}  // namespace socnav
