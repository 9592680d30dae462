#include "socnav/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace socnav {

StepOutcome compute_reward(const AgentSnapshot& prev, const AgentSnapshot& cur,
                           const Clearances& clearances, const RewardConfig& cfg) {
  const double prev_dist = (prev.pose.position() - prev.goal).norm();
  const double cur_dist = (cur.pose.position() - cur.goal).norm();
  if (!std::isfinite(prev_dist) || !std::isfinite(cur_dist) ||
      !std::isfinite(clearances.d))
    throw std::invalid_argument("compute_reward: non-finite input");

  StepOutcome out;
  const bool collided = cur.status == AgentStatus::collided;
  const bool arrived = !collided && (cur.status == AgentStatus::arrived ||
                                     cur_dist <= cfg.goal_tolerance);

  double r_g;
  if (arrived) {
    r_g = cfg.r_arrival;
  } else {
    r_g = cfg.w1 * (cur_dist - prev_dist);
  }

  double r_c;
  if (collided) {
    r_c = cfg.r_collision;
  } else if (clearances.d <= cfg.r + 1.0) {
    r_c = cfg.w2 * (1.0 - clearances.d / (cfg.r + 1.0));
  } else {
    r_c = 0.0;
  }

  double r_s = 0.0;
  if (clearances.d_ped <= cfg.r + 1.25)
    r_s = cfg.w3 * (1.0 - clearances.d_ped / (cfg.r + 1.25));

  out.reward = r_g + r_c + r_s;
  if (collided) {
    out.kind = OutcomeKind::collided;
  } else if (arrived) {
    out.kind = OutcomeKind::arrived;
  } else if (cur.status == AgentStatus::timed_out) {
    out.kind = OutcomeKind::timed_out;
  } else {
    out.kind = OutcomeKind::running;
  }
  out.terminal = out.kind != OutcomeKind::running;
  return out;
}

}  // namespace socnav
