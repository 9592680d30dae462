#pragma once

#include <functional>
#include <string>
#include <vector>

#include "socnav/config.hpp"
#include "socnav/obsmap.hpp"
#include "socnav/reward.hpp"

namespace socnav {

using PolicyFn = std::function<Action(const Observation&, Rng&)>;

struct TraceTick {
  Pose2 pose;
  Action action;
  double d = 0.0;
  double d_ped = 0.0;
  double reward = 0.0;
};

struct EpisodeTrace {
  std::vector<TraceTick> ticks;
  OutcomeKind outcome = OutcomeKind::running;
  double duration = 0.0;  // seconds, ticks * dt

  double total_reward() const {
    double s = 0.0;
    for (const auto& t : ticks) s += t.reward;
    return s;
  }
};

struct MetricsReport {
  double success_rate = 0.0;   // percent
  double arriving_time = 0.0;  // seconds, mean over successes; NaN if none
  double ego_score = 0.0;      // 0..100
  double social_score = 0.0;   // 0..100
  int episodes = 0;
};

struct LabeledReport {
  std::string policy;
  std::string scenario;
  MetricsReport report;
};

struct EpisodeConfig {
  SimParams sim;
  LidarConfig lidar;
  GridConfig grid;
  RewardConfig reward;
  double comfort_margin = 0.45;  // social-score margin above the safety radius

  static EpisodeConfig from(const AppConfig& cfg) {
    return {cfg.sim, cfg.lidar, cfg.grid, cfg.reward, cfg.loop.eval_comfort_margin};
  }
};

// Runs one seeded episode with every agent acting from the shared policy;
// records the main agent's trace until it terminates.
EpisodeTrace run_episode(const Scenario& scenario, const EpisodeConfig& cfg,
                         const PolicyFn& policy, uint64_t episode_seed);

// Seeded evaluation suite; episode i uses scenario seed seed_base + i.
MetricsReport evaluate(const PolicyFn& policy, const Scenario& base, int episodes,
                       uint64_t seed_base, const EpisodeConfig& cfg,
                       std::vector<EpisodeTrace>* traces = nullptr);

// Fraction of ticks with d strictly above the safety radius, scaled to 0-100.
double ego_score(const EpisodeTrace& trace, double safety_radius);
// Same with d_ped against safety radius + comfort margin.
double social_score(const EpisodeTrace& trace, double safety_radius,
                    double comfort_margin);

// Machine CSV (full precision, "-" marks an undefined arriving time) and a
// human-readable aligned table (percent/seconds formatting).
std::string export_csv(const std::vector<LabeledReport>& reports);
std::vector<LabeledReport> parse_csv(const std::string& text);
std::string export_table(const std::vector<LabeledReport>& reports);

void dump_trace_csv(const EpisodeTrace& trace, double dt, const std::string& path);

// Steers proportionally to the goal bearing at full speed; no avoidance.
PolicyFn go_straight_policy(double gain = 2.0);
// Uniform actions within bounds.
PolicyFn uniform_random_policy();

}  // namespace socnav
