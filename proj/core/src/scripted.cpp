#include "socnav/scripted.hpp"

#include <cmath>

#include "socnav/lidar.hpp"

namespace socnav {

EnvReplay scripted_crossing_dataset(int64_t n_transitions, uint64_t seed,
                                    const AppConfig& cfg) {
  EnvReplay buf(n_transitions + 1, cfg.lidar);
  Rng rng = Rng(seed).fork("scripted-crossing");
  const double half = 5.0;

  while (buf.size() < n_transitions) {
    WorldState world;
    world.dt = cfg.sim.dt;
    world.main_agent = 0;
    const Vec2 a{-half, -half}, b{half, -half}, c{half, half}, d{-half, half};
    world.obstacles.push_back({SegmentShape{a, b}});
    world.obstacles.push_back({SegmentShape{b, c}});
    world.obstacles.push_back({SegmentShape{c, d}});
    world.obstacles.push_back({SegmentShape{d, a}});
    world.obstacles.push_back({CircleShape{{3.4, 2.6}, 0.35}});
    world.obstacles.push_back({RectShape{{-3.2, -2.8}, {0.4, 0.3}, 0.5}});

    AgentState robot;
    robot.radius = cfg.sim.agent_radius;
    robot.pose = Pose2(rng.uniform(-3.0, -1.5), rng.uniform(-1.2, 1.2),
                       rng.uniform(-0.4, 0.4));
    robot.goal = {half * 3.0, 0.0};  // unreachable: episodes end on schedule
    world.agents.push_back(robot);

    // Pedestrian spawns ahead of the robot and crosses its corridor at a
    // constant velocity.
    AgentState ped;
    ped.radius = cfg.sim.agent_radius;
    const double side = rng.uniform01() < 0.5 ? 1.0 : -1.0;
    const double ahead = rng.uniform(1.5, 3.5);
    Vec2 spawn = robot.pose.transform({ahead, side * rng.uniform(2.0, 3.0)});
    spawn.x = std::clamp(spawn.x, -half + 0.6, half - 0.6);
    spawn.y = std::clamp(spawn.y, -half + 0.6, half - 0.6);
    double cross_heading = robot.pose.theta - side * kPi / 2.0 + rng.uniform(-0.25, 0.25);
    ped.pose = Pose2(spawn.x, spawn.y, cross_heading);
    ped.goal = ped.pose.transform({20.0, 0.0});
    world.agents.push_back(ped);
    const double ped_speed = rng.uniform(0.6, 1.0);

    const double phase_v = rng.uniform(0.0, 2.0 * kPi);
    const double phase_w = rng.uniform(0.0, 2.0 * kPi);
    const int episode_len = 60;

    Action last_robot, last_ped;
    SimParams params = cfg.sim;
    params.timeout_ticks = episode_len + 1;
    params.goal_tolerance = 0.0;  // scripted agents never "arrive"

    buf.begin_episode();
    for (int t = 0; t < episode_len && buf.size() < n_transitions; ++t) {
      EnvTick tick;
      {
        LaserScan s = scan(world, 0, cfg.lidar);
        tick.ranges = s.ranges;
      }
      tick.pose = world.agents[0].pose;
      tick.goal = world.agents[0].goal;
      tick.vel = last_robot;

      Action robot_act(0.5 + 0.25 * std::sin(0.17 * t + phase_v),
                       0.55 * std::sin(0.12 * t + phase_w));
      Action ped_act(ped_speed, 0.0);
      std::vector<Action> actions;
      if (world.agents[0].active()) actions.push_back(robot_act);
      if (world.agents[1].active()) actions.push_back(ped_act);
      if (actions.empty()) break;

      AgentSnapshot prev{world.agents[0].pose, world.agents[0].goal,
                         world.agents[0].status};
      step_world(world, actions, params);
      Clearances cl = min_clearances(world, 0, cfg.lidar.max_range);
      AgentSnapshot cur{world.agents[0].pose, world.agents[0].goal,
                        world.agents[0].status};
      StepOutcome outcome = compute_reward(prev, cur, cl, cfg.reward);

      tick.action = robot_act;
      tick.reward = static_cast<float>(outcome.reward);
      tick.done = outcome.terminal;
      tick.kind = outcome.kind;
      last_robot = robot_act;
      last_ped = ped_act;
      buf.push_tick(std::move(tick));

      if (outcome.terminal || !world.agents[0].active()) break;
    }
    // Closing tick carries the final observation.
    EnvTick final_tick;
    {
      LaserScan s = scan(world, 0, cfg.lidar);
      final_tick.ranges = s.ranges;
    }
    final_tick.pose = world.agents[0].pose;
    final_tick.goal = world.agents[0].goal;
    final_tick.vel = last_robot;
    buf.push_tick(std::move(final_tick));
    buf.end_episode();
  }
  return buf;
}

}  // namespace socnav
