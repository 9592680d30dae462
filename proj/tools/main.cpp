#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "socnav/checkpoint.hpp"
#include "socnav/config.hpp"
#include "socnav/eval.hpp"
#include "socnav/lidar.hpp"
#include "socnav/policy.hpp"
#include "socnav/scripted.hpp"
#include "socnav/trainer.hpp"
#include "socnav/world_model.hpp"

namespace {

using namespace socnav;

AppConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return AppConfig{};
  return load_config_file(path);
}

void load_actor(const CheckpointReader& reader, ActorCritic* policy) {
  for (auto& e : policy->actor.params().entries())
    e.value = reader.tensor("actor/" + e.name);
}

int cmd_gen_scenario(const std::string& kind, uint64_t seed, int n_agents,
                     double bounds, double density, const std::string& json_path,
                     const std::string& scan_csv) {
  Scenario spec;
  auto k = scenario_kind_from_string(kind);
  if (!k) {
    std::cerr << "unknown scenario kind: " << kind << "\n";
    return 1;
  }
  spec.kind = *k;
  spec.seed = seed;
  spec.n_agents = n_agents;
  spec.bounds = bounds;
  spec.obstacle_density = density;
  std::ofstream os(json_path);
  if (!os) {
    std::cerr << "cannot open " << json_path << "\n";
    return 1;
  }
  os << scenario_to_json(spec) << "\n";

  if (!scan_csv.empty()) {
    SimParams sim;
    WorldState world = generate_scenario(spec, sim);
    LidarConfig lidar;
    std::ofstream cs(scan_csv);
    for (size_t i = 0; i < world.agents.size(); ++i) {
      LaserScan s = scan(world, static_cast<int>(i), lidar);
      cs << scan_to_csv_row(s, world.tick) << "\n";
    }
  }
  std::cout << "wrote " << json_path << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, uint64_t seed,
              const std::string& out_dir, bool ablation,
              const std::string& resume) {
  AppConfig cfg = load_config_or_default(config_path);
  if (ablation) {
    cfg.loop.ablation = true;
    cfg.loop.rollout_starts = 0;
  }
  Trainer trainer(cfg, seed, out_dir);
  if (!resume.empty()) trainer.load_checkpoint(resume);
  TrainResult res = trainer.run();
  std::cout << "log: " << res.log_path << "\n";
  std::cout << "checkpoint: " << res.final_checkpoint << ".bin\n";
  std::cout << "final eval reward: " << res.final_eval_reward << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path,
             const std::string& suite, int episodes, uint64_t seed_base,
             const std::string& csv_path, const std::string& traces_dir,
             const std::string& table_path) {
  AppConfig cfg = load_config_or_default(config_path);
  auto kind = scenario_kind_from_string(suite);
  if (!kind) {
    std::cerr << "unknown suite: " << suite << "\n";
    return 1;
  }
  Scenario scenario = cfg.loop.eval_scenario;
  scenario.kind = *kind;

  ActorCritic policy(cfg.policy, cfg.grid, 0);
  CheckpointReader reader(checkpoint);
  load_actor(reader, &policy);
  PolicyFn fn = [&](const Observation& obs, Rng& rng) {
    return act(policy, obs, cfg.norm, 0.0, rng);
  };

  EpisodeConfig ecfg = EpisodeConfig::from(cfg);
  std::vector<EpisodeTrace> traces;
  MetricsReport report =
      evaluate(fn, scenario, episodes, seed_base, ecfg, &traces);

  std::vector<LabeledReport> rows{{"learned", suite, report}};
  const std::string csv = export_csv(rows);
  if (!csv_path.empty()) {
    std::ofstream os(csv_path);
    os << csv;
  }
  if (!table_path.empty()) {
    std::ofstream os(table_path);
    os << export_table(rows);
  }
  if (!traces_dir.empty()) {
    std::filesystem::create_directories(traces_dir);
    for (size_t i = 0; i < traces.size(); ++i)
      dump_trace_csv(traces[i], cfg.sim.dt,
                     traces_dir + "/episode_" + std::to_string(i) + ".csv");
  }
  std::cout << export_table(rows);
  return 0;
}

int cmd_rollout_model(const std::string& checkpoint, const std::string& config_path,
                      uint64_t seed, int horizon, const std::string& out_pgm) {
  AppConfig cfg = load_config_or_default(config_path);
  CheckpointReader reader(checkpoint);

  TransitionModel model(cfg.model, cfg.grid, 0);
  for (auto& e : model.params().entries())
    e.value = reader.tensor("model0/" + e.name);

  // A short scripted scene provides the start observation; the rollout then
  // repeatedly feeds predictions back through the ego-warp.
  AppConfig data_cfg = cfg;
  EnvReplay data = scripted_crossing_dataset(64, seed, data_cfg);
  Rng rng(seed);
  std::vector<int64_t> ids = data.sample_ids(1, rng);
  Observation obs = data.observation_at(ids[0], cfg.grid);

  std::vector<OccupancyGrid> frames;
  frames.push_back(obs.maps.frames[kStackDepth - 1]);
  Observation state = obs;
  for (int s = 0; s < horizon; ++s) {
    Action action(0.5, 0.0);
    Prediction pred = predict(model, state, action, cfg.norm, cfg.sim.dt);
    frames.push_back(pred.next_map);
    state = advance_virtual(state, action, pred.next_map, cfg.grid, cfg.sim.dt);
  }
  std::vector<const OccupancyGrid*> ptrs;
  for (const auto& f : frames) ptrs.push_back(&f);
  write_pgm_strip(ptrs, out_pgm);
  std::cout << "wrote " << out_pgm << " (" << frames.size() << " frames)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D multi-agent social-navigation simulator and model-based RL harness"};
  app.require_subcommand(1);

  // gen-scenario
  std::string gs_kind = "random", gs_json = "scenario.json", gs_scan_csv;
  uint64_t gs_seed = 0;
  int gs_agents = 4;
  double gs_bounds = 10.0, gs_density = 0.05;
  auto* gen = app.add_subcommand("gen-scenario", "Write a scenario spec JSON");
  gen->add_option("--kind", gs_kind,
                  "passing|towards|crossing|random|static_mapless");
  gen->add_option("--seed", gs_seed, "Scenario seed");
  gen->add_option("--n-agents", gs_agents, "Number of agents");
  gen->add_option("--bounds", gs_bounds, "Arena side length (m)");
  gen->add_option("--density", gs_density, "Obstacle density");
  gen->add_option("--json", gs_json, "Output JSON path")->required();
  gen->add_option("--scan-csv", gs_scan_csv,
                  "Also dump initial scans (one CSV row per agent)");

  // train
  std::string tr_config, tr_out = "run", tr_resume;
  uint64_t tr_seed = 0;
  bool tr_ablation = false;
  auto* train = app.add_subcommand("train", "Run the training loop");
  train->add_option("--config", tr_config, "Config JSON path");
  train->add_option("--seed", tr_seed, "Master seed")->required();
  train->add_option("--out", tr_out, "Output directory")->required();
  train->add_flag("--ablation", tr_ablation, "Disable the world model");
  train->add_option("--resume", tr_resume, "Checkpoint prefix to resume from");

  // eval
  std::string ev_ckpt, ev_config, ev_suite = "random", ev_csv, ev_traces, ev_table;
  int ev_episodes = 20;
  uint64_t ev_seed_base = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a policy checkpoint");
  eval_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint .bin path")->required();
  eval_cmd->add_option("--config", ev_config, "Config JSON path");
  eval_cmd->add_option("--suite", ev_suite, "passing|towards|crossing|random");
  eval_cmd->add_option("--episodes", ev_episodes, "Episode count");
  eval_cmd->add_option("--seed-base", ev_seed_base, "First episode seed");
  eval_cmd->add_option("--csv", ev_csv, "Write the metrics CSV here");
  eval_cmd->add_option("--table", ev_table, "Write the aligned table here");
  eval_cmd->add_option("--dump-traces", ev_traces, "Directory for per-episode traces");

  // rollout-model
  std::string rm_ckpt, rm_config, rm_out = "rollout.pgm";
  uint64_t rm_seed = 0;
  int rm_horizon = 5;
  auto* rollout = app.add_subcommand(
      "rollout-model", "Dump a predicted map sequence as a PGM strip");
  rollout->add_option("--checkpoint", rm_ckpt, "Checkpoint .bin path")->required();
  rollout->add_option("--config", rm_config, "Config JSON path");
  rollout->add_option("--seed", rm_seed, "Scene seed");
  rollout->add_option("--horizon", rm_horizon, "Prediction steps");
  rollout->add_option("--out", rm_out, "Output PGM path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_scenario(gs_kind, gs_seed, gs_agents, gs_bounds, gs_density,
                              gs_json, gs_scan_csv);
    if (train->parsed())
      return cmd_train(tr_config, tr_seed, tr_out, tr_ablation, tr_resume);
    if (eval_cmd->parsed())
      return cmd_eval(ev_ckpt, ev_config, ev_suite, ev_episodes, ev_seed_base,
                      ev_csv, ev_traces, ev_table);
    if (rollout->parsed())
      return cmd_rollout_model(rm_ckpt, rm_config, rm_seed, rm_horizon, rm_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
