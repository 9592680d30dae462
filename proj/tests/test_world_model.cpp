#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "socnav/replay.hpp"
#include "socnav/world_model.hpp"

using namespace socnav;

namespace {

ModelConfig tiny_model_cfg() {
  ModelConfig cfg;
  cfg.enc_ch1 = 4;
  cfg.enc_ch2 = 8;
  cfg.lstm_ch = 4;
  cfg.embed_hidden = 16;
  cfg.embed_spatial = 2;
  cfg.fuse_ch = 8;
  cfg.dec_ch = 4;
  cfg.reward_conv = 2;
  cfg.reward_hidden = 16;
  cfg.ensemble = 1;
  cfg.batch = 8;
  return cfg;
}

GridConfig tiny_grid() {
  GridConfig g;
  g.width = 16;
  g.height = 16;
  g.resolution = 0.2;
  return g;
}

Observation random_observation(const GridConfig& grid, Rng& rng, bool binary) {
  Observation obs;
  for (auto& f : obs.maps.frames) {
    f = OccupancyGrid(grid);
    for (auto& v : f.cells)
      v = binary ? (rng.uniform01() < 0.1 ? 1.0f : 0.0f)
                 : static_cast<float>(rng.uniform01());
  }
  obs.goal_dist = rng.uniform(0.5, 8.0);
  obs.goal_bearing = rng.uniform(-3.0, 3.0);
  obs.vel = Action(rng.uniform(0, 1), rng.uniform(-1.5, 1.5));
  return obs;
}

// One static scene recorded while nobody moves: every transition identical.
EnvReplay static_scene_buffer(const GridConfig& grid, const LidarConfig& lidar,
                              int n_transitions) {
  EnvReplay buf(n_transitions + 4, lidar);
  WorldState w;
  AgentState agent;
  agent.pose = Pose2(0, 0, 0);
  agent.goal = {4.0, 0.0};
  w.agents.push_back(agent);
  w.obstacles.push_back({CircleShape{{1.6, 0.4}, 0.3}});
  w.obstacles.push_back({SegmentShape{{2.4, -1.6}, {2.4, 1.6}}});

  LaserScan s = scan(w, 0, lidar);
  buf.begin_episode();
  for (int t = 0; t < n_transitions + 1; ++t) {
    EnvTick tick;
    tick.ranges = s.ranges;
    tick.pose = w.agents[0].pose;
    tick.goal = w.agents[0].goal;
    tick.vel = Action(0, 0);
    tick.action = Action(0, 0);
    tick.reward = 0.05f;
    buf.push_tick(std::move(tick));
  }
  buf.end_episode();
  return buf;
}

}  // namespace

TEST_CASE("untrained predict obeys the output contract") {
  GridConfig grid = tiny_grid();
  TransitionModel model(tiny_model_cfg(), grid, 3);
  Rng rng(1);
  Observation obs = random_observation(grid, rng, true);
  NormConfig norm;

  Prediction p1 = predict(model, obs, Action(0.6, 0.4), norm, 0.1);
  CHECK(std::isfinite(p1.reward));
  for (float v : p1.next_map.cells) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  Prediction p2 = predict(model, obs, Action(0.6, 0.4), norm, 0.1);
  CHECK(p1.next_map.cells == p2.next_map.cells);
  CHECK(p1.reward == p2.reward);
}

TEST_CASE("copy-decoder isolates the warp path") {
  GridConfig grid = tiny_grid();
  TransitionModel model(tiny_model_cfg(), grid, 5);
  model.copy_decoder = true;
  Rng rng(2);
  Observation obs = random_observation(grid, rng, false);
  NormConfig norm;
  Action action(0.8, -0.9);
  const double dt = 0.1;

  Prediction p = predict(model, obs, action, norm, dt);
  OccupancyGrid expect = affine_warp(obs.maps.frames[kStackDepth - 1],
                                     step_agent(Pose2{}, action, dt), grid);
  CHECK(p.next_map.cells == expect.cells);

  SUBCASE("identity action reproduces the content frame bit-exactly") {
    Prediction pid = predict(model, obs, Action(0, 0), norm, dt);
    CHECK(pid.next_map.cells == obs.maps.frames[kStackDepth - 1].cells);
  }
}

TEST_CASE("model_loss formula cases") {
  GridConfig grid = tiny_grid();
  ModelConfig mcfg = tiny_model_cfg();
  NormConfig norm;
  Rng rng(4);

  SUBCASE("prediction equal to target gives exactly the reward term") {
    TransitionModel model(mcfg, grid, 6);
    model.copy_decoder = true;
    Observation obs = random_observation(grid, rng, true);
    // Zero action: identity warp, prediction == content frame.
    Action action(0, 0);
    Prediction p = predict(model, obs, action, norm, 0.1);

    Tensor maps({1, kStackDepth, grid.height, grid.width});
    NormalizedObs no = normalize_observation(obs, norm);
    std::copy(no.maps.begin(), no.maps.end(), maps.data());
    Tensor scalars({1, 6}, {no.goal_dist, no.goal_bearing, no.v, no.w, 0.0f, 0.5f});
    Tensor target_map({1, 1, grid.height, grid.width},
                      obs.maps.frames[kStackDepth - 1].cells);
    Tensor target_reward({1, 1}, {static_cast<float>(p.reward)});
    std::vector<CellAffine> affines{CellAffine{}};

    TapeT<float> tape;
    Val loss = model_loss(tape, model, maps, scalars, affines, target_map,
                          target_reward, false);
    CHECK(tape.value(loss)[0] == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("all-0.5 prediction vs binary target scores pixel MSE 0.25") {
    ModelConfig cfg = mcfg;
    cfg.lambda_r = 0.0;
    TransitionModel model(cfg, grid, 7);
    model.copy_decoder = true;
    Observation obs = random_observation(grid, rng, true);
    for (auto& v : obs.maps.frames[kStackDepth - 1].cells) v = 0.5f;

    NormalizedObs no = normalize_observation(obs, norm);
    Tensor maps({1, kStackDepth, grid.height, grid.width});
    std::copy(no.maps.begin(), no.maps.end(), maps.data());
    Tensor scalars({1, 6}, {no.goal_dist, no.goal_bearing, no.v, no.w, 0.0f, 0.5f});
    // Any binary occupancy fraction q gives (0.5)^2 everywhere.
    Tensor target_map({1, 1, grid.height, grid.width});
    for (int64_t i = 0; i < target_map.size(); ++i)
      target_map[i] = rng.uniform01() < 0.3 ? 1.0f : 0.0f;
    Tensor target_reward({1, 1}, {0.0f});
    std::vector<CellAffine> affines{CellAffine{}};

    TapeT<float> tape;
    Val loss = model_loss(tape, model, maps, scalars, affines, target_map,
                          target_reward, false);
    CHECK(tape.value(loss)[0] == doctest::Approx(0.25).epsilon(1e-6));
  }

  SUBCASE("loss is non-negative") {
    TransitionModel model(mcfg, grid, 8);
    for (int t = 0; t < 5; ++t) {
      Observation obs = random_observation(grid, rng, true);
      NormalizedObs no = normalize_observation(obs, norm);
      Tensor maps({1, kStackDepth, grid.height, grid.width});
      std::copy(no.maps.begin(), no.maps.end(), maps.data());
      Tensor scalars({1, 6});
      for (int i = 0; i < 6; ++i) scalars[i] = static_cast<float>(rng.uniform01());
      Tensor target_map({1, 1, grid.height, grid.width});
      Tensor target_reward({1, 1}, {static_cast<float>(rng.uniform(-20, 20))});
      std::vector<CellAffine> affines{CellAffine{}};
      TapeT<float> tape;
      Val loss = model_loss(tape, model, maps, scalars, affines, target_map,
                            target_reward, false);
      CHECK(tape.value(loss)[0] >= 0.0f);
    }
  }
}

TEST_CASE("composed model loss passes finite-difference checks in 64-bit") {
  GridConfig grid;
  grid.width = 8;
  grid.height = 8;
  grid.resolution = 0.2;
  ModelConfig cfg = tiny_model_cfg();
  cfg.enc_ch1 = 2;
  cfg.enc_ch2 = 3;
  cfg.lstm_ch = 2;
  cfg.embed_hidden = 4;
  cfg.embed_spatial = 1;
  cfg.fuse_ch = 3;
  cfg.dec_ch = 2;
  cfg.reward_conv = 2;
  cfg.reward_hidden = 4;

  TransitionModelT<double> model(cfg, grid, 11);
  Rng rng(12);
  // Generic-position parameters: exact zeros would park activations on the
  // nonlinearity kinks where central differences are meaningless.
  for (auto& e : model.params().entries())
    for (int64_t i = 0; i < e.value.size(); ++i)
      e.value[i] += rng.uniform(-0.05, 0.05);
  TensorT<double> maps({2, kStackDepth, 8, 8});
  for (int64_t i = 0; i < maps.size(); ++i)
    maps[i] = rng.uniform01() < 0.2 ? 1.0 : 0.0;
  TensorT<double> scalars({2, 6});
  for (int64_t i = 0; i < scalars.size(); ++i) scalars[i] = rng.uniform01();
  TensorT<double> target_map({2, 1, 8, 8});
  for (int64_t i = 0; i < target_map.size(); ++i)
    target_map[i] = rng.uniform01() < 0.2 ? 1.0 : 0.0;
  TensorT<double> target_reward({2, 1}, {0.3, -1.2});
  std::vector<CellAffine> affines(2);
  affines[1] = ego_motion_affine(step_agent(Pose2{}, Action(0.7, 0.5), 0.1), grid);

  auto build = [&](TapeT<double>& tp) {
    return model_loss(tp, model, maps, scalars, affines, target_map,
                      target_reward, true);
  };

  model.params().zero_grads();
  {
    TapeT<double> tape;
    Val loss = build(tape);
    tape.backward(loss);
  }
  auto eval = [&]() {
    TapeT<double> tape;
    Val loss = build(tape);
    return tape.value(loss)[0];
  };
  // Smaller step than the op-level suite: the composed graph crosses
  // leaky-relu kinks, and the kink band scales with eps.
  const double eps = 1e-5;
  int checked = 0, failed = 0;
  Rng pick(13);
  for (auto& e : model.params().entries()) {
    // Sample a handful of coordinates per tensor.
    const int samples = static_cast<int>(std::min<int64_t>(e.value.size(), 6));
    for (int s = 0; s < samples; ++s) {
      int64_t i = static_cast<int64_t>(pick.uniform_index(e.value.size()));
      const double v0 = e.value[i];
      e.value[i] = v0 + eps;
      const double lp = eval();
      e.value[i] = v0 - eps;
      const double lm = eval();
      e.value[i] = v0;
      const double fd = (lp - lm) / (2.0 * eps);
      const double an = e.grad[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      if (std::abs(fd - an) / denom >= 1e-3 && std::abs(fd - an) > 1e-8) ++failed;
      ++checked;
    }
  }
  CHECK(failed == 0);
  CHECK(checked > 80);
}

TEST_CASE("train_model overfits one repeated static transition") {
  GridConfig grid = tiny_grid();
  LidarConfig lidar;
  lidar.n_beams = 64;
  ModelConfig cfg = tiny_model_cfg();
  cfg.lr = 2e-3;
  cfg.pretrain_steps = 2000;
  cfg.val_fraction = 0.1;
  cfg.batch = 8;

  EnvReplay buf = static_scene_buffer(grid, lidar, 32);
  ModelEnsemble ensemble(cfg, grid, 21);
  Rng rng(22);
  NormConfig norm;
  ModelTrainReport rep =
      train_model(ensemble, buf, grid, norm, 0.1, 2000, rng);
  REQUIRE(rep.final_loss.size() == 1);
  CHECK(rep.final_loss[0] < 1e-3);
  CHECK(rep.val_mse[0] < 1e-3);
}

TEST_CASE("bootstrap members differ after training") {
  GridConfig grid = tiny_grid();
  LidarConfig lidar;
  lidar.n_beams = 48;
  ModelConfig cfg = tiny_model_cfg();
  cfg.ensemble = 3;
  cfg.batch = 8;

  EnvReplay buf = static_scene_buffer(grid, lidar, 24);
  ModelEnsemble ensemble(cfg, grid, 31);
  // Seeded initialization alone separates members.
  CHECK(ensemble.members[0].params().checksum() !=
        ensemble.members[1].params().checksum());
  CHECK(ensemble.members[1].params().checksum() !=
        ensemble.members[2].params().checksum());

  Rng rng(32);
  NormConfig norm;
  train_model(ensemble, buf, grid, norm, 0.1, 50, rng);
  CHECK(ensemble.members[0].params().checksum() !=
        ensemble.members[1].params().checksum());
  CHECK(ensemble.members[1].params().checksum() !=
        ensemble.members[2].params().checksum());
}

TEST_CASE("train_model rejects a buffer smaller than one batch") {
  GridConfig grid = tiny_grid();
  LidarConfig lidar;
  lidar.n_beams = 16;
  ModelConfig cfg = tiny_model_cfg();
  cfg.batch = 64;
  EnvReplay buf = static_scene_buffer(grid, lidar, 8);
  ModelEnsemble ensemble(cfg, grid, 41);
  Rng rng(42);
  NormConfig norm;
  CHECK_THROWS_AS(train_model(ensemble, buf, grid, norm, 0.1, 10, rng),
                  std::runtime_error);
}

TEST_CASE("advance_virtual pushes frames and propagates proprioception") {
  GridConfig grid = tiny_grid();
  Rng rng(51);
  Observation obs = random_observation(grid, rng, false);
  OccupancyGrid predicted(grid);
  predicted.cells[5] = 0.7f;

  SUBCASE("zero action: frames shift exactly, scalars unchanged") {
    Observation next = advance_virtual(obs, Action(0, 0), predicted, grid, 0.1);
    for (int i = 0; i + 1 < kStackDepth; ++i)
      CHECK(next.maps.frames[i].cells == obs.maps.frames[i + 1].cells);
    CHECK(next.maps.frames[kStackDepth - 1].cells == predicted.cells);
    CHECK(next.goal_dist == doctest::Approx(obs.goal_dist));
    CHECK(next.vel.v == 0.0);
  }

  SUBCASE("forward action shortens a dead-ahead goal") {
    obs.goal_bearing = 0.0;
    obs.goal_dist = 2.0;
    Observation next = advance_virtual(obs, Action(1.0, 0), predicted, grid, 0.1);
    CHECK(next.goal_dist == doctest::Approx(1.9).epsilon(1e-9));
    CHECK(next.vel.v == 1.0);
  }
}

TEST_CASE("rollout_model contracts") {
  GridConfig grid = tiny_grid();
  ModelConfig cfg = tiny_model_cfg();
  NormConfig norm;
  Rng data_rng(61);
  std::vector<Observation> starts;
  for (int i = 0; i < 3; ++i) starts.push_back(random_observation(grid, data_rng, true));

  BatchActionFn fixed_policy = [](const std::vector<Observation>& obs, Rng&) {
    return std::vector<Action>(obs.size(), Action(0.5, 0.0));
  };

  SUBCASE("h=1 yields exactly one step per start") {
    ModelEnsemble ensemble(cfg, grid, 71);
    RolloutParams params;
    params.horizon = 1;
    Rng rng(72);
    auto rollouts = rollout_model(ensemble, starts, fixed_policy, params, norm, rng);
    REQUIRE(rollouts.size() == 3);
    for (const auto& r : rollouts) CHECK(r.steps.size() == 1);
  }

  SUBCASE("single deterministic member reproduces under a fixed seed") {
    ModelEnsemble ensemble(cfg, grid, 73);
    RolloutParams params;
    params.horizon = 4;
    Rng rng1(99), rng2(99);
    auto r1 = rollout_model(ensemble, starts, fixed_policy, params, norm, rng1);
    auto r2 = rollout_model(ensemble, starts, fixed_policy, params, norm, rng2);
    REQUIRE(r1.size() == r2.size());
    for (size_t i = 0; i < r1.size(); ++i) {
      REQUIRE(r1[i].steps.size() == r2[i].steps.size());
      for (size_t k = 0; k < r1[i].steps.size(); ++k) {
        CHECK(r1[i].steps[k].reward == r2[i].steps[k].reward);
        CHECK(r1[i].steps[k].predicted_map.cells == r2[i].steps[k].predicted_map.cells);
      }
    }
  }

  SUBCASE("a huge predicted reward stops the rollout as arrived") {
    ModelEnsemble ensemble(cfg, grid, 74);
    ensemble.members[0].params().at("rfc2_b").value[0] = 100.0f;
    RolloutParams params;
    params.horizon = 5;
    Rng rng(75);
    auto rollouts = rollout_model(ensemble, starts, fixed_policy, params, norm, rng);
    for (const auto& r : rollouts) {
      REQUIRE(r.steps.size() == 1);
      CHECK(r.steps[0].done);
      CHECK(r.steps[0].kind == OutcomeKind::arrived);
    }
  }

  SUBCASE("a hugely negative reward stops the rollout as collided") {
    ModelEnsemble ensemble(cfg, grid, 76);
    ensemble.members[0].params().at("rfc2_b").value[0] = -100.0f;
    RolloutParams params;
    params.horizon = 5;
    Rng rng(77);
    auto rollouts = rollout_model(ensemble, starts, fixed_policy, params, norm, rng);
    for (const auto& r : rollouts) {
      REQUIRE(r.steps.size() == 1);
      CHECK(r.steps[0].kind == OutcomeKind::collided);
    }
  }
}

TEST_CASE("model replay round-trips rollouts through quantization") {
  GridConfig grid = tiny_grid();
  Rng rng(81);
  VirtualRollout rollout;
  rollout.start = random_observation(grid, rng, false);
  for (int k = 0; k < 3; ++k) {
    VirtualStep st;
    st.action = Action(rng.uniform(0, 1), rng.uniform(-1.5, 1.5));
    st.reward = static_cast<float>(rng.uniform(-1, 1));
    st.predicted_map = OccupancyGrid(grid);
    for (auto& v : st.predicted_map.cells) v = static_cast<float>(rng.uniform01());
    rollout.steps.push_back(st);
  }
  rollout.steps.back().done = true;
  rollout.steps.back().kind = OutcomeKind::collided;

  ModelReplay replay(100);
  replay.push_rollout(rollout);
  CHECK(replay.size() == 3);

  TransitionSample s0 = replay.sample_at(0, grid, 0.1);
  CHECK(s0.model_origin);
  CHECK(s0.action.v == rollout.steps[0].action.v);
  CHECK(s0.reward == doctest::Approx(rollout.steps[0].reward));
  // Quantized start frames are within half a quantization step.
  for (int f = 0; f < kStackDepth; ++f)
    for (size_t i = 0; i < s0.obs.maps.frames[f].cells.size(); ++i)
      CHECK(std::abs(s0.obs.maps.frames[f].cells[i] -
                     rollout.start.maps.frames[f].cells[i]) < 0.5f / 255.0f + 1e-6f);

  TransitionSample s2 = replay.sample_at(2, grid, 0.1);
  CHECK(s2.done);
  CHECK(s2.kind == OutcomeKind::collided);
  // The newest frame of next_obs is the step's predicted map (quantized).
  for (size_t i = 0; i < s2.next_obs.maps.frames[kStackDepth - 1].cells.size(); ++i)
    CHECK(std::abs(s2.next_obs.maps.frames[kStackDepth - 1].cells[i] -
                   rollout.steps[2].predicted_map.cells[i]) < 0.5f / 255.0f + 1e-6f);

  // Chain consistency: obs of step k+1 equals next_obs of step k.
  TransitionSample s1 = replay.sample_at(1, grid, 0.1);
  TransitionSample s0b = replay.sample_at(0, grid, 0.1);
  for (int f = 0; f < kStackDepth; ++f)
    CHECK(s1.obs.maps.frames[f].cells == s0b.next_obs.maps.frames[f].cells);
}
