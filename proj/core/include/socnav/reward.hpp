#pragma once

#include "socnav/sim.hpp"

namespace socnav {

struct RewardConfig {
  double r_arrival = 20.0;
  double r_collision = -20.0;
  double w1 = -2.5;  // progress weight (negative: printed formula rewards approach)
  double w2 = -0.2;  // obstacle-proximity weight
  double w3 = -0.3;  // pedestrian-proximity weight
  double r = 0.3;    // robot safety radius
  double goal_tolerance = 0.3;
};

enum class OutcomeKind { running, arrived, collided, timed_out };

struct StepOutcome {
  double reward = 0.0;
  bool terminal = false;
  OutcomeKind kind = OutcomeKind::running;
};

struct AgentSnapshot {
  Pose2 pose;
  Vec2 goal;
  AgentStatus status = AgentStatus::active;
};

// Three-term reward: goal progress + obstacle proximity penalty + pedestrian
// proximity penalty, evaluated on consecutive snapshots of one agent.
// Throws std::invalid_argument on non-finite inputs.
StepOutcome compute_reward(const AgentSnapshot& prev, const AgentSnapshot& cur,
                           const Clearances& clearances, const RewardConfig& cfg);

}  // namespace socnav
