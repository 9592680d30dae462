#include <benchmark/benchmark.h>

#include "socnav/eval.hpp"
#include "socnav/lidar.hpp"
#include "socnav/policy.hpp"
#include "socnav/replay.hpp"
#include "socnav/scripted.hpp"
#include "socnav/world_model.hpp"

using namespace socnav;

namespace {

GridConfig desk_grid() {
  GridConfig g;
  g.width = 32;
  g.height = 32;
  g.resolution = 0.2;
  return g;
}

ModelConfig desk_model() {
  ModelConfig cfg;
  cfg.enc_ch1 = 8;
  cfg.enc_ch2 = 16;
  cfg.lstm_ch = 8;
  cfg.embed_spatial = 4;
  cfg.fuse_ch = 16;
  cfg.dec_ch = 8;
  return cfg;
}

Tensor random_maps(int n, const GridConfig& grid, Rng& rng) {
  Tensor t({n, kStackDepth, grid.height, grid.width});
  for (int64_t i = 0; i < t.size(); ++i)
    t[i] = rng.uniform01() < 0.1 ? 1.0f : 0.0f;
  return t;
}

}  // namespace

static void BM_lidar_scan(benchmark::State& state) {
  SimParams sim;
  Scenario spec{ScenarioKind::random, 3, 4, 10.0, 0.05};
  WorldState world = generate_scenario(spec, sim);
  LidarConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(scan(world, 0, cfg));
}
BENCHMARK(BM_lidar_scan);

static void BM_build_stack(benchmark::State& state) {
  SimParams sim;
  Scenario spec{ScenarioKind::random, 3, 4, 10.0, 0.05};
  WorldState world = generate_scenario(spec, sim);
  LidarConfig lcfg;
  GridConfig gcfg = desk_grid();
  std::array<LaserScan, kStackDepth> scans;
  std::array<Pose2, kStackDepth> poses;
  for (int i = 0; i < kStackDepth; ++i) {
    scans[i] = scan(world, 0, lcfg);
    poses[i] = world.agents[0].pose;
  }
  for (auto _ : state) benchmark::DoNotOptimize(build_stack(scans, poses, gcfg));
}
BENCHMARK(BM_build_stack);

static void BM_affine_warp(benchmark::State& state) {
  GridConfig gcfg = desk_grid();
  Rng rng(1);
  OccupancyGrid g(gcfg);
  for (auto& v : g.cells) v = static_cast<float>(rng.uniform01());
  Pose2 motion(0.07, 0.01, 0.12);
  for (auto _ : state) benchmark::DoNotOptimize(affine_warp(g, motion, gcfg));
}
BENCHMARK(BM_affine_warp);

static void BM_model_forward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  GridConfig grid = desk_grid();
  TransitionModel model(desk_model(), grid, 1);
  Rng rng(2);
  Tensor maps = random_maps(batch, grid, rng);
  Tensor scalars({batch, 6});
  for (int64_t i = 0; i < scalars.size(); ++i)
    scalars[i] = static_cast<float>(rng.uniform01());
  std::vector<CellAffine> affines(batch);
  for (auto _ : state) {
    TapeT<float> tape;
    benchmark::DoNotOptimize(model.forward(tape, maps, scalars, affines, false));
  }
}
BENCHMARK(BM_model_forward)->Arg(1)->Arg(8)->Arg(16);

static void BM_model_train_step(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  GridConfig grid = desk_grid();
  TransitionModel model(desk_model(), grid, 1);
  AdamT<float> adam;
  adam.attach(model.params());
  Rng rng(3);
  Tensor maps = random_maps(batch, grid, rng);
  Tensor scalars({batch, 6});
  for (int64_t i = 0; i < scalars.size(); ++i)
    scalars[i] = static_cast<float>(rng.uniform01());
  Tensor target = random_maps(batch, grid, rng);
  Tensor target_map({batch, 1, grid.height, grid.width});
  std::copy(target.data(), target.data() + target_map.size(), target_map.data());
  Tensor target_reward({batch, 1});
  std::vector<CellAffine> affines(batch);
  for (auto _ : state) {
    TapeT<float> tape;
    Val loss = model_loss(tape, model, maps, scalars, affines, target_map,
                          target_reward, true);
    tape.backward(loss);
    adam.step(model.params());
  }
}
BENCHMARK(BM_model_train_step)->Arg(8)->Arg(16);

static void BM_td3_update(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  GridConfig grid = desk_grid();
  PolicyConfig pcfg;
  pcfg.batch = batch;
  ActorCritic policy(pcfg, grid, 4);
  Rng rng(5);
  BatchBuilder builder(batch, grid, NormConfig{}, 0.1);
  for (int i = 0; i < batch; ++i) {
    TransitionSample s;
    for (auto& f : s.obs.maps.frames) {
      f = OccupancyGrid(grid);
      for (auto& v : f.cells) v = rng.uniform01() < 0.1 ? 1.0f : 0.0f;
    }
    s.next_obs = s.obs;
    s.action = Action(0.5, 0.1);
    s.reward = 0.1;
    builder.set_row(i, s);
  }
  TransitionBatch b = builder.take();
  for (auto _ : state) benchmark::DoNotOptimize(td3_update(policy, b, rng));
}
BENCHMARK(BM_td3_update)->Arg(16)->Arg(32)->Arg(64);

static void BM_policy_act(benchmark::State& state) {
  GridConfig grid = desk_grid();
  PolicyConfig pcfg;
  ActorCritic policy(pcfg, grid, 6);
  Rng rng(7);
  Observation obs;
  for (auto& f : obs.maps.frames) {
    f = OccupancyGrid(grid);
    for (auto& v : f.cells) v = rng.uniform01() < 0.1 ? 1.0f : 0.0f;
  }
  obs.goal_dist = 3.0;
  NormConfig norm;
  for (auto _ : state) benchmark::DoNotOptimize(act(policy, obs, norm, 0.1, rng));
}
BENCHMARK(BM_policy_act);

static void BM_rollout_batch(benchmark::State& state) {
  GridConfig grid = desk_grid();
  ModelConfig mcfg = desk_model();
  mcfg.ensemble = 3;
  ModelEnsemble ensemble(mcfg, grid, 8);
  Rng rng(9);
  std::vector<Observation> starts(8);
  for (auto& obs : starts) {
    for (auto& f : obs.maps.frames) {
      f = OccupancyGrid(grid);
      for (auto& v : f.cells) v = rng.uniform01() < 0.1 ? 1.0f : 0.0f;
    }
    obs.goal_dist = 4.0;
  }
  BatchActionFn fn = [](const std::vector<Observation>& o, Rng&) {
    return std::vector<Action>(o.size(), Action(0.5, 0.1));
  };
  RolloutParams params;
  params.horizon = 5;
  NormConfig norm;
  for (auto _ : state)
    benchmark::DoNotOptimize(rollout_model(ensemble, starts, fn, params, norm, rng));
}
BENCHMARK(BM_rollout_batch);

BENCHMARK_MAIN();
