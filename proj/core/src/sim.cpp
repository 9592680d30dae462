#include "socnav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace socnav {

namespace {

double rect_distance(const Vec2& p, const RectShape& r) {
  // Work in the rect's own frame.
  double c = std::cos(r.rotation), s = std::sin(r.rotation);
  double dx = p.x - r.center.x, dy = p.y - r.center.y;
  double lx = c * dx + s * dy;
  double ly = -s * dx + c * dy;
  double qx = std::abs(lx) - r.extents.x;
  double qy = std::abs(ly) - r.extents.y;
  double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0);
  double outside = std::hypot(ox, oy);
  return outside;  // 0 inside
}

}  // namespace

double obstacle_distance(const Vec2& p, const Obstacle& obs) {
  return std::visit(
      [&](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, CircleShape>) {
          return std::max(0.0, (p - sh.center).norm() - sh.radius);
        } else if constexpr (std::is_same_v<T, SegmentShape>) {
          return point_segment_distance(p, sh.a, sh.b);
        } else {
          return rect_distance(p, sh);
        }
      },
      obs.shape);
}

Pose2 step_agent(const Pose2& pose, const Action& action, double dt) {
  const double v = action.v, w = action.w;
  if (std::abs(w) < 1e-9) {
    return {pose.x + v * dt * std::cos(pose.theta),
            pose.y + v * dt * std::sin(pose.theta), pose.theta + w * dt};
  }
  const double t0 = pose.theta, t1 = pose.theta + w * dt;
  return {pose.x + (v / w) * (std::sin(t1) - std::sin(t0)),
          pose.y - (v / w) * (std::cos(t1) - std::cos(t0)), t1};
}

namespace {

// Center-to-surface distance from agent i's center to every other entity.
double min_distance_to_entities(const WorldState& world, int i,
                                bool peers_only, bool* found) {
  const Vec2 p = world.agents[i].pose.position();
  double best = std::numeric_limits<double>::infinity();
  *found = false;
  if (!peers_only) {
    for (const auto& obs : world.obstacles) {
      best = std::min(best, obstacle_distance(p, obs));
      *found = true;
    }
  }
  for (size_t j = 0; j < world.agents.size(); ++j) {
    if (static_cast<int>(j) == i) continue;
    double d = (p - world.agents[j].pose.position()).norm() - world.agents[j].radius;
    best = std::min(best, d);
    *found = true;
  }
  return std::max(best, 0.0);
}

}  // namespace

Clearances min_clearances(const WorldState& world, int agent_index,
                          double lidar_max_range) {
  bool found_any = false, found_peer = false;
  double d = min_distance_to_entities(world, agent_index, false, &found_any);
  double d_ped = min_distance_to_entities(world, agent_index, true, &found_peer);
  Clearances out;
  out.d = (!found_any || d > lidar_max_range) ? lidar_max_range : d;
  out.d_ped = found_peer ? d_ped : std::numeric_limits<double>::infinity();
  return out;
}

void step_world(WorldState& world, const std::vector<Action>& actions,
                const SimParams& params) {
  size_t n_active = 0;
  for (const auto& a : world.agents)
    if (a.active()) ++n_active;
  if (actions.size() != n_active) {
    throw std::invalid_argument(
        "step_world: expected " + std::to_string(n_active) + " actions, got " +
        std::to_string(actions.size()));
  }

  // Advance all active agents from the pre-step snapshot.
  size_t ai = 0;
  for (auto& agent : world.agents) {
    if (!agent.active()) continue;
    agent.pose = step_agent(agent.pose, actions[ai], world.dt);
    agent.vel = actions[ai];
    ++ai;
  }
  world.tick += 1;

  // Post-step status update. Collision dominates arrival.
  const size_t n = world.agents.size();
  std::vector<bool> collided(n, false);
  for (size_t i = 0; i < n; ++i) {
    if (!world.agents[i].active()) continue;
    const Vec2 p = world.agents[i].pose.position();
    for (const auto& obs : world.obstacles) {
      if (obstacle_distance(p, obs) < world.agents[i].radius) {
        collided[i] = true;
        break;
      }
    }
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double sep = (p - world.agents[j].pose.position()).norm();
      if (sep < world.agents[i].radius + world.agents[j].radius) {
        collided[i] = true;
        if (world.agents[j].active()) collided[j] = true;
      }
    }
  }
  for (size_t i = 0; i < n; ++i) {
    auto& agent = world.agents[i];
    if (!agent.active()) continue;
    if (collided[i]) {
      agent.status = AgentStatus::collided;
    } else if ((agent.pose.position() - agent.goal).norm() <= params.goal_tolerance) {
      agent.status = AgentStatus::arrived;
    } else if (world.tick >= params.timeout_ticks) {
      agent.status = AgentStatus::timed_out;
    }
  }
}

const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::passing: return "passing";
    case ScenarioKind::towards: return "towards";
    case ScenarioKind::crossing: return "crossing";
    case ScenarioKind::random: return "random";
    case ScenarioKind::static_mapless: return "static_mapless";
  }
  return "random";
}

std::optional<ScenarioKind> scenario_kind_from_string(const std::string& s) {
  if (s == "passing") return ScenarioKind::passing;
  if (s == "towards") return ScenarioKind::towards;
  if (s == "crossing") return ScenarioKind::crossing;
  if (s == "random") return ScenarioKind::random;
  if (s == "static_mapless") return ScenarioKind::static_mapless;
  return std::nullopt;
}

namespace {

constexpr double kMinInterAgentClearance = 1.0;
constexpr int kMaxPlacementAttempts = 1000;

void add_arena_walls(WorldState& world, double half) {
  const Vec2 a{-half, -half}, b{half, -half}, c{half, half}, d{-half, half};
  world.obstacles.push_back({SegmentShape{a, b}});
  world.obstacles.push_back({SegmentShape{b, c}});
  world.obstacles.push_back({SegmentShape{c, d}});
  world.obstacles.push_back({SegmentShape{d, a}});
}

bool clear_of_agents(const std::vector<AgentState>& agents, const Vec2& p,
                     double clearance) {
  for (const auto& a : agents) {
    if ((a.pose.position() - p).norm() < clearance) return false;
    if ((a.goal - p).norm() < clearance) return false;
  }
  return true;
}

AgentState make_agent(const Vec2& start, const Vec2& goal, double radius,
                      double heading_jitter, Rng& rng) {
  AgentState a;
  double heading = std::atan2(goal.y - start.y, goal.x - start.x);
  if (heading_jitter > 0.0) heading += rng.uniform(-heading_jitter, heading_jitter);
  a.pose = Pose2(start.x, start.y, heading);
  a.goal = goal;
  return a;
}

Obstacle random_obstacle(Rng& rng, const Vec2& center) {
  switch (rng.uniform_index(3)) {
    case 0:
      return {CircleShape{center, rng.uniform(0.15, 0.5)}};
    case 1: {
      double ang = rng.uniform(0.0, kPi);
      double len = rng.uniform(0.4, 1.2);
      Vec2 d{std::cos(ang) * len * 0.5, std::sin(ang) * len * 0.5};
      return {SegmentShape{center - d, center + d}};
    }
    default:
      return {RectShape{center,
                        {rng.uniform(0.15, 0.45), rng.uniform(0.15, 0.45)},
                        rng.uniform(0.0, kPi)}};
  }
}

}  // namespace

WorldState generate_scenario(const Scenario& spec, const SimParams& params) {
  if (spec.n_agents < 1) throw std::invalid_argument("scenario: n_agents >= 1");
  if (spec.bounds <= 0.0) throw std::invalid_argument("scenario: bounds > 0");

  Rng rng(spec.seed);
  rng = rng.fork("scenario");
  WorldState world;
  world.dt = params.dt;
  world.main_agent = 0;
  const double half = spec.bounds * 0.5;
  const double r = params.agent_radius;

  // Starts and goals keep a margin off the arena walls; goal distances are
  // banded so episodes are neither trivial nor wall-hugging marathons.
  auto place_agents_random = [&](int count, double max_goal_frac) {
    const double margin = std::max(0.8, r);
    for (int i = 0; i < count; ++i) {
      int attempts = 0;
      for (;;) {
        if (++attempts > kMaxPlacementAttempts)
          throw std::runtime_error("scenario: agent placement failed");
        Vec2 start{rng.uniform(-half + margin, half - margin),
                   rng.uniform(-half + margin, half - margin)};
        Vec2 goal{rng.uniform(-half + margin, half - margin),
                  rng.uniform(-half + margin, half - margin)};
        const double dist = (goal - start).norm();
        if (dist < spec.bounds * 0.3) continue;
        if (max_goal_frac > 0.0 && dist > spec.bounds * max_goal_frac) continue;
        if (!clear_of_agents(world.agents, start, kMinInterAgentClearance)) continue;
        if (!clear_of_agents(world.agents, goal, kMinInterAgentClearance)) continue;
        AgentState a = make_agent(start, goal, r, 0.0, rng);
        a.radius = r;
        world.agents.push_back(a);
        break;
      }
    }
  };

  auto place_obstacles = [&](double margin) {
    int count = static_cast<int>(std::llround(spec.obstacle_density * spec.bounds * spec.bounds));
    for (int i = 0; i < count; ++i) {
      int attempts = 0;
      for (;;) {
        if (++attempts > kMaxPlacementAttempts)
          throw std::runtime_error("scenario: obstacle placement failed");
        Vec2 c{rng.uniform(-half + 0.6, half - 0.6), rng.uniform(-half + 0.6, half - 0.6)};
        bool ok = true;
        for (const auto& a : world.agents) {
          if ((a.pose.position() - c).norm() < margin || (a.goal - c).norm() < margin) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        Obstacle obs = random_obstacle(rng, c);
        bool overlaps = false;
        for (const auto& other : world.obstacles) {
          if (obstacle_distance(c, other) < 0.8) {
            overlaps = true;
            break;
          }
        }
        if (overlaps) continue;
        world.obstacles.push_back(obs);
        break;
      }
    }
  };

  switch (spec.kind) {
    case ScenarioKind::passing: {
      // Parallel lanes, same direction; goals shifted one lane over so the
      // agents have to pass each other.
      const double lane_gap = std::max(kMinInterAgentClearance, 1.2);
      const double span = spec.bounds * 0.8;
      for (int i = 0; i < spec.n_agents; ++i) {
        double lane = (i - (spec.n_agents - 1) * 0.5) * lane_gap;
        double goal_lane = ((spec.n_agents - 1 - i) - (spec.n_agents - 1) * 0.5) * lane_gap;
        Vec2 start{-span * 0.5, lane};
        Vec2 goal{span * 0.5, goal_lane};
        AgentState a = make_agent(start, goal, r, 0.0, rng);
        a.radius = r;
        world.agents.push_back(a);
      }
      break;
    }
    case ScenarioKind::towards: {
      // Antipodal start/goal pairs on a circle.
      const double radius = spec.bounds * 0.4;
      for (int i = 0; i < spec.n_agents; ++i) {
        double ang = 2.0 * kPi * i / spec.n_agents + rng.uniform(-0.08, 0.08);
        Vec2 start{radius * std::cos(ang), radius * std::sin(ang)};
        Vec2 goal{-start.x, -start.y};
        AgentState a = make_agent(start, goal, r, 0.0, rng);
        a.radius = r;
        world.agents.push_back(a);
      }
      break;
    }
    case ScenarioKind::crossing: {
      // Half the agents travel left->right, half bottom->top, intersecting at
      // the center.
      const double span = spec.bounds * 0.8;
      const double gap = std::max(kMinInterAgentClearance, 1.2);
      int horiz = (spec.n_agents + 1) / 2;
      for (int i = 0; i < spec.n_agents; ++i) {
        bool horizontal = i < horiz;
        int k = horizontal ? i : i - horiz;
        int lanes = horizontal ? horiz : spec.n_agents - horiz;
        double lane = (k - (lanes - 1) * 0.5) * gap;
        Vec2 start = horizontal ? Vec2{-span * 0.5, lane} : Vec2{lane, -span * 0.5};
        Vec2 goal = horizontal ? Vec2{span * 0.5, lane} : Vec2{lane, span * 0.5};
        AgentState a = make_agent(start, goal, r, 0.0, rng);
        a.radius = r;
        world.agents.push_back(a);
      }
      break;
    }
    case ScenarioKind::random: {
      add_arena_walls(world, half);
      place_agents_random(spec.n_agents, 0.0);
      place_obstacles(kMinInterAgentClearance);
      break;
    }
    case ScenarioKind::static_mapless: {
      add_arena_walls(world, half);
      place_agents_random(1, 0.55);
      place_obstacles(kMinInterAgentClearance);
      break;
    }
  }

  // Enforce minimum initial inter-agent clearance for the structured layouts.
  for (size_t i = 0; i < world.agents.size(); ++i) {
    for (size_t j = i + 1; j < world.agents.size(); ++j) {
      double sep = (world.agents[i].pose.position() - world.agents[j].pose.position()).norm();
      if (sep < kMinInterAgentClearance)
        throw std::runtime_error("scenario: initial inter-agent clearance violated");
    }
  }
  return world;
}

std::string scenario_to_json(const Scenario& spec) {
  nlohmann::json j;
  j["kind"] = to_string(spec.kind);
  j["seed"] = spec.seed;
  j["n_agents"] = spec.n_agents;
  j["bounds"] = spec.bounds;
  j["obstacle_density"] = spec.obstacle_density;
  return j.dump(2);
}

Scenario scenario_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Scenario s;
  auto kind = scenario_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw std::runtime_error("scenario: unknown kind");
  s.kind = *kind;
  s.seed = j.at("seed").get<uint64_t>();
  s.n_agents = j.at("n_agents").get<int>();
  s.bounds = j.at("bounds").get<double>();
  s.obstacle_density = j.at("obstacle_density").get<double>();
  return s;
}

}  // namespace socnav
