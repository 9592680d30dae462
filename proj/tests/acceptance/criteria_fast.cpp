#include <cmath>
#include <filesystem>

#include "criteria.hpp"
#include "socnav/lidar.hpp"
#include "socnav/obsmap.hpp"
#include "socnav/reward.hpp"
#include "socnav/trainer.hpp"

namespace acceptance {

using namespace socnav;

namespace {

Pose2 euler_integrate(Pose2 p, const Action& a, double dt, int substeps) {
  const double h = dt / substeps;
  double x = p.x, y = p.y, theta = p.theta;
  for (int i = 0; i < substeps; ++i) {
    x += a.v * std::cos(theta) * h;
    y += a.v * std::sin(theta) * h;
    theta += a.w * h;
  }
  return {x, y, theta};
}

// Projection-form ray/circle intersection: an independent route from the
// quadratic used in the implementation.
double circle_hit_projection(const Vec2& o, const Vec2& d, const Vec2& c, double r) {
  const double tc = (c - o).dot(d);
  const double off2 = (c - o).norm_sq() - tc * tc;
  const double th = std::sqrt(r * r - off2);
  const double t1 = tc - th;
  return t1 >= 0.0 ? t1 : tc + th;
}

// Line-line intersection via parametric elimination on the segment side.
double segment_hit_parametric(const Vec2& o, const Vec2& d, const Vec2& a,
                              const Vec2& b) {
  const Vec2 ab = b - a;
  const double u =
      ((o.x - a.x) * d.y - (o.y - a.y) * d.x) / (ab.x * d.y - ab.y * d.x);
  const Vec2 p{a.x + u * ab.x, a.y + u * ab.y};
  return (p - o).dot(d);
}

}  // namespace

Result criterion1_geometry_oracles() {
  Rng rng(4001);
  double worst_kin = 0.0;
  for (int i = 0; i < 200; ++i) {
    Pose2 start{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-3, 3)};
    Action a(rng.uniform(0, 1), rng.uniform(-1.5, 1.5));
    const double dt = rng.uniform(0.02, 1.0);
    Pose2 exact = step_agent(start, a, dt);
    Pose2 fine = euler_integrate(start, a, dt, 20000);
    worst_kin = std::max({worst_kin, std::abs(exact.x - fine.x),
                          std::abs(exact.y - fine.y)});
  }
  if (worst_kin >= 1e-4)
    return {false, "kinematics vs fine-step integration diverged"};

  double worst_ray = 0.0;
  for (int i = 0; i < 300; ++i) {
    const Vec2 o{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double ang = rng.uniform(-kPi, kPi);
    const Vec2 d{std::cos(ang), std::sin(ang)};
    // Circle placed on the ray so a hit is guaranteed.
    const double along = rng.uniform(1.0, 5.0);
    const Vec2 c{o.x + d.x * along + rng.uniform(-0.2, 0.2),
                 o.y + d.y * along + rng.uniform(-0.2, 0.2)};
    const double r = rng.uniform(0.3, 0.8);
    auto hit = intersect_ray_circle(o, d, c, r);
    if (!hit) return {false, "ray-circle missed a guaranteed hit"};
    worst_ray = std::max(worst_ray, std::abs(*hit - circle_hit_projection(o, d, c, r)));

    // Perpendicular-ish segment crossing the ray.
    const Vec2 mid{o.x + d.x * along, o.y + d.y * along};
    const Vec2 n{-d.y, d.x};
    const double half = rng.uniform(0.5, 2.0);
    const double skew = rng.uniform(-0.3, 0.3);
    const Vec2 sa{mid.x + n.x * half + d.x * skew, mid.y + n.y * half + d.y * skew};
    const Vec2 sb{mid.x - n.x * half - d.x * skew, mid.y - n.y * half - d.y * skew};
    auto seg = intersect_ray_segment(o, d, sa, sb);
    if (!seg) return {false, "ray-segment missed a guaranteed hit"};
    worst_ray = std::max(worst_ray, std::abs(*seg - segment_hit_parametric(o, d, sa, sb)));
  }
  if (worst_ray >= 1e-6) return {false, "ray intersections vs analytic roots diverged"};

  // Warp identity bit-exactness and inverse composition on integer-cell
  // motions.
  GridConfig cfg;
  cfg.width = 24;
  cfg.height = 24;
  cfg.resolution = 0.1;
  OccupancyGrid grid(cfg);
  for (auto& v : grid.cells) v = static_cast<float>(rng.uniform01());
  OccupancyGrid identity = affine_warp(grid, Pose2(0, 0, 0), cfg);
  if (identity.cells != grid.cells) return {false, "identity warp not bit-exact"};

  double worst_warp = 0.0;
  for (int cells = 1; cells <= 3; ++cells) {
    const double shift = cells * cfg.resolution;
    OccupancyGrid fwd = affine_warp(grid, Pose2(shift, 0, 0), cfg);
    OccupancyGrid back = affine_warp(fwd, Pose2(-shift, 0, 0), cfg);
    // Interior region untouched by boundary fill.
    for (int r = cells; r < cfg.height - cells; ++r)
      for (int c = 0; c < cfg.width; ++c)
        worst_warp = std::max(worst_warp,
                              static_cast<double>(std::abs(back.at(r, c) - grid.at(r, c))));
    // The forward shift must be an exact row move.
    for (int r = cells; r < cfg.height; ++r)
      for (int c = 0; c < cfg.width; ++c)
        worst_warp = std::max(worst_warp,
                              static_cast<double>(std::abs(fwd.at(r, c) - grid.at(r - cells, c))));
  }
  if (worst_warp >= 1e-6) return {false, "warp identity/inverse tolerance exceeded"};

  std::ostringstream os;
  os << "kinematics err " << worst_kin << ", ray err " << worst_ray
     << ", warp err " << worst_warp;
  return {true, os.str()};
}

Result criterion3_reward_formulas() {
  RewardConfig cfg;  // defaults: 20 / -20 / -2.5 / -0.2 / -0.3 / r=0.3
  auto snap = [](double x, double y, Vec2 goal,
                 AgentStatus st = AgentStatus::active) {
    return AgentSnapshot{Pose2(x, y, 0), goal, st};
  };
  const Clearances far{6.0, std::numeric_limits<double>::infinity()};

  StepOutcome progress =
      compute_reward(snap(-3.0, 0, {0, 0}), snap(-2.9, 0, {0, 0}), far, cfg);
  if (std::abs(progress.reward - 0.25) > 1e-9)
    return {false, "progress term mismatch"};

  StepOutcome prox = compute_reward(snap(0, 0, {3, 0}), snap(0, 0, {3, 0}),
                                    Clearances{0.8, 1.0}, cfg);
  const double rc = cfg.w2 * (1.0 - 0.8 / (cfg.r + 1.0));
  const double rs = cfg.w3 * (1.0 - 1.0 / (cfg.r + 1.25));
  if (std::abs(rc - (-0.076923076923076927)) > 1e-9)
    return {false, "obstacle term mismatch"};
  if (std::abs(rs - (-0.10645161290322579)) > 1e-9)
    return {false, "pedestrian term mismatch"};
  if (std::abs(prox.reward - (rc + rs)) > 1e-9)
    return {false, "summed reward mismatch"};

  StepOutcome coll = compute_reward(snap(-3.0, 0, {0, 0}),
                                    snap(-2.9, 0, {0, 0}, AgentStatus::collided),
                                    Clearances{0.0, 0.2}, cfg);
  const double expect_coll = cfg.r_collision + cfg.w1 * (2.9 - 3.0) +
                             cfg.w3 * (1.0 - 0.2 / (cfg.r + 1.25));
  if (std::abs(coll.reward - expect_coll) > 1e-9 || !coll.terminal)
    return {false, "collision case mismatch"};

  StepOutcome arr = compute_reward(snap(-0.5, 0, {0, 0}),
                                   snap(-0.2, 0, {0, 0}, AgentStatus::arrived), far, cfg);
  if (std::abs(arr.reward - cfg.r_arrival) > 1e-9 || !arr.terminal)
    return {false, "arrival case mismatch"};

  // Threshold continuity at d = r+1.0 and d_ped = r+1.25.
  StepOutcome edge = compute_reward(snap(0, 0, {3, 0}), snap(0, 0, {3, 0}),
                                    Clearances{cfg.r + 1.0, cfg.r + 1.25}, cfg);
  if (std::abs(edge.reward) > 1e-12) return {false, "penalty not zero at thresholds"};
  for (double delta : {1e-9, 1e-6, 1e-4}) {
    StepOutcome inside =
        compute_reward(snap(0, 0, {3, 0}), snap(0, 0, {3, 0}),
                       Clearances{cfg.r + 1.0 - delta, cfg.r + 1.25 - delta}, cfg);
    const double bound = delta * (std::abs(cfg.w2) / (cfg.r + 1.0) +
                                  std::abs(cfg.w3) / (cfg.r + 1.25)) + 1e-12;
    if (std::abs(inside.reward) > bound)
      return {false, "penalty discontinuous at thresholds"};
  }
  return {true, "formula values reproduced to 1e-9, thresholds continuous"};
}

Result criterion5_ego_disentanglement() {
  GridConfig gcfg;  // 64x64 at 0.1
  LidarConfig lcfg;
  lcfg.n_beams = 181;

  // Sub-cell pellets centered on cell centers: every viewpoint paints exactly
  // the pellet's own cell.
  WorldState world;
  AgentState agent;
  world.agents.push_back(agent);
  const std::vector<Vec2> pellets{{2.4, 0.0}, {2.7, -0.8}, {3.1, 0.9}, {2.9, -0.2},
                                  {3.4, 0.4}};
  for (const Vec2& c : pellets) world.obstacles.push_back({CircleShape{c, 0.045}});

  std::array<LaserScan, kStackDepth> scans;
  std::array<Pose2, kStackDepth> poses;
  for (int i = 0; i < kStackDepth; ++i) {
    world.agents[0].pose = Pose2(0.1 * i, 0.0, 0.0);  // one cell per step
    scans[i] = scan(world, 0, lcfg);
    poses[i] = world.agents[0].pose;
  }
  GridStack stack = build_stack(scans, poses, gcfg);

  int occupied = 0;
  for (float v : stack.frames[kStackDepth - 1].cells) occupied += v > 0 ? 1 : 0;
  if (occupied != static_cast<int>(pellets.size()))
    return {false, "pellet rasterization did not hit one cell each"};
  for (int i = 0; i < kStackDepth; ++i)
    if (stack.frames[i].cells != stack.frames[kStackDepth - 1].cells)
      return {false, "aligned frames differ"};

  MotionContent mc = motion_content_split(stack);
  for (const auto& d : mc.motion)
    for (float v : d.cells)
      if (v != 0.0f) return {false, "motion diff not exactly zero"};
  return {true, "10 aligned frames identical, 9 diffs exactly zero"};
}

Result criterion9_accounting() {
  namespace fs = std::filesystem;
  AppConfig cfg;
  cfg.grid.width = 16;
  cfg.grid.height = 16;
  cfg.grid.resolution = 0.4;
  cfg.lidar.n_beams = 36;
  cfg.sim.timeout_ticks = 100000;
  cfg.model.enc_ch1 = 2;
  cfg.model.enc_ch2 = 3;
  cfg.model.lstm_ch = 2;
  cfg.model.embed_hidden = 8;
  cfg.model.embed_spatial = 1;
  cfg.model.fuse_ch = 3;
  cfg.model.dec_ch = 2;
  cfg.model.reward_conv = 2;
  cfg.model.reward_hidden = 8;
  cfg.model.ensemble = 1;
  cfg.model.batch = 4;
  cfg.model.pretrain_steps = 0;
  cfg.policy.conv1 = 2;
  cfg.policy.conv2 = 2;
  cfg.policy.conv3 = 2;
  cfg.policy.fc_embed = 8;
  cfg.policy.scalar_embed = 4;
  cfg.policy.action_embed = 4;
  cfg.policy.head_hidden = 8;
  cfg.loop.exploration_steps = 100;
  cfg.loop.epochs = 1;
  cfg.loop.steps_per_epoch = 10;
  cfg.loop.rollout_starts = 2;
  cfg.loop.policy_updates = 0;
  cfg.loop.rollout_horizon = 5;
  cfg.loop.eval_every = 0;
  cfg.loop.model_retrain_every = 0;
  cfg.loop.scenario = Scenario{ScenarioKind::towards, 5, 1, 60.0, 0.0};
  cfg.loop.eval_scenario = cfg.loop.scenario;

  const std::string dir = "acceptance_out/c9_counts";
  fs::remove_all(dir);
  Trainer trainer(cfg, 12345, dir);
  trainer.run();
  if (trainer.env_buffer().size() != 110)
    return {false, "D_env size " + std::to_string(trainer.env_buffer().size()) +
                       " != 110"};
  if (trainer.model_buffer().size() != 100)
    return {false, "D_model size " + std::to_string(trainer.model_buffer().size()) +
                       " != 100"};

  AppConfig ab = cfg;
  ab.loop.ablation = true;
  ab.loop.rollout_starts = 0;
  const std::string dir2 = "acceptance_out/c9_ablation";
  fs::remove_all(dir2);
  Trainer ablation(ab, 12345, dir2);
  ablation.run();
  if (ablation.model_buffer().size() != 0)
    return {false, "ablation left D_model non-empty"};
  if (ablation.env_buffer().size() != 110)
    return {false, "ablation consumed a different env budget"};
  return {true, "|D_env| = 110, |D_model| = 100 exactly; ablation keeps D_model empty"};
}

}  // namespace acceptance
