#include "socnav/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace socnav {

using nlohmann::json;

namespace {

template <typename T>
void get_if(const json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

json scenario_json(const Scenario& s) {
  return json{{"kind", to_string(s.kind)},
              {"seed", s.seed},
              {"n_agents", s.n_agents},
              {"bounds", s.bounds},
              {"obstacle_density", s.obstacle_density}};
}

void scenario_from(const json& j, Scenario* s) {
  if (j.contains("kind")) {
    auto k = scenario_kind_from_string(j.at("kind").get<std::string>());
    if (!k) throw std::runtime_error("config: unknown scenario kind");
    s->kind = *k;
  }
  get_if(j, "seed", &s->seed);
  get_if(j, "n_agents", &s->n_agents);
  get_if(j, "bounds", &s->bounds);
  get_if(j, "obstacle_density", &s->obstacle_density);
}

}  // namespace

std::string config_to_json(const AppConfig& c) {
  json j;
  j["sim"] = {{"dt", c.sim.dt},
              {"timeout_ticks", c.sim.timeout_ticks},
              {"goal_tolerance", c.sim.goal_tolerance},
              {"agent_radius", c.sim.agent_radius}};
  j["lidar"] = {{"n_beams", c.lidar.n_beams},
                {"fov", c.lidar.fov},
                {"max_range", c.lidar.max_range},
                {"min_range", c.lidar.min_range},
                {"noise_sigma", c.lidar.noise_sigma}};
  j["grid"] = {{"width", c.grid.width},
               {"height", c.grid.height},
               {"resolution", c.grid.resolution}};
  j["norm"] = {{"d_max", c.norm.d_max}};
  j["reward"] = {{"r_arrival", c.reward.r_arrival},
                 {"r_collision", c.reward.r_collision},
                 {"w1", c.reward.w1},
                 {"w2", c.reward.w2},
                 {"w3", c.reward.w3},
                 {"r", c.reward.r},
                 {"goal_tolerance", c.reward.goal_tolerance}};
  j["model"] = {{"enc_ch1", c.model.enc_ch1},
                {"enc_ch2", c.model.enc_ch2},
                {"lstm_ch", c.model.lstm_ch},
                {"embed_hidden", c.model.embed_hidden},
                {"embed_spatial", c.model.embed_spatial},
                {"fuse_ch", c.model.fuse_ch},
                {"dec_ch", c.model.dec_ch},
                {"reward_conv", c.model.reward_conv},
                {"reward_hidden", c.model.reward_hidden},
                {"lr", c.model.lr},
                {"lambda_r", c.model.lambda_r},
                {"ensemble", c.model.ensemble},
                {"batch", c.model.batch},
                {"pretrain_steps", c.model.pretrain_steps},
                {"retrain_steps", c.model.retrain_steps},
                {"val_fraction", c.model.val_fraction}};
  j["policy"] = {{"conv1", c.policy.conv1},
                 {"conv2", c.policy.conv2},
                 {"conv3", c.policy.conv3},
                 {"fc_embed", c.policy.fc_embed},
                 {"scalar_embed", c.policy.scalar_embed},
                 {"action_embed", c.policy.action_embed},
                 {"head_hidden", c.policy.head_hidden},
                 {"gamma", c.policy.gamma},
                 {"tau", c.policy.tau},
                 {"policy_delay", c.policy.policy_delay},
                 {"sigma_act", c.policy.sigma_act},
                 {"sigma_tgt", c.policy.sigma_tgt},
                 {"noise_clip", c.policy.noise_clip},
                 {"batch", c.policy.batch},
                 {"lr_actor", c.policy.lr_actor},
                 {"lr_critic", c.policy.lr_critic},
                 {"mix_real", c.policy.mix_real}};
  j["loop"] = {{"exploration_steps", c.loop.exploration_steps},
               {"epochs", c.loop.epochs},
               {"steps_per_epoch", c.loop.steps_per_epoch},
               {"rollout_starts", c.loop.rollout_starts},
               {"policy_updates", c.loop.policy_updates},
               {"rollout_horizon", c.loop.rollout_horizon},
               {"model_retrain_every", c.loop.model_retrain_every},
               {"cap_env", c.loop.cap_env},
               {"cap_model", c.loop.cap_model},
               {"eval_every", c.loop.eval_every},
               {"eval_episodes", c.loop.eval_episodes},
               {"checkpoint_every", c.loop.checkpoint_every},
               {"ablation", c.loop.ablation},
               {"full_state_checkpoints", c.loop.full_state_checkpoints},
               {"scenario", scenario_json(c.loop.scenario)},
               {"eval_scenario", scenario_json(c.loop.eval_scenario)},
               {"eval_comfort_margin", c.loop.eval_comfort_margin}};
  return j.dump(2);
}

AppConfig config_from_json(const std::string& text) {
  json j = json::parse(text);
  AppConfig c;
  if (j.contains("sim")) {
    const auto& s = j["sim"];
    get_if(s, "dt", &c.sim.dt);
    get_if(s, "timeout_ticks", &c.sim.timeout_ticks);
    get_if(s, "goal_tolerance", &c.sim.goal_tolerance);
    get_if(s, "agent_radius", &c.sim.agent_radius);
  }
  if (j.contains("lidar")) {
    const auto& s = j["lidar"];
    get_if(s, "n_beams", &c.lidar.n_beams);
    get_if(s, "fov", &c.lidar.fov);
    get_if(s, "max_range", &c.lidar.max_range);
    get_if(s, "min_range", &c.lidar.min_range);
    get_if(s, "noise_sigma", &c.lidar.noise_sigma);
  }
  if (j.contains("grid")) {
    const auto& s = j["grid"];
    get_if(s, "width", &c.grid.width);
    get_if(s, "height", &c.grid.height);
    get_if(s, "resolution", &c.grid.resolution);
  }
  if (j.contains("norm")) get_if(j["norm"], "d_max", &c.norm.d_max);
  if (j.contains("reward")) {
    const auto& s = j["reward"];
    get_if(s, "r_arrival", &c.reward.r_arrival);
    get_if(s, "r_collision", &c.reward.r_collision);
    get_if(s, "w1", &c.reward.w1);
    get_if(s, "w2", &c.reward.w2);
    get_if(s, "w3", &c.reward.w3);
    get_if(s, "r", &c.reward.r);
    get_if(s, "goal_tolerance", &c.reward.goal_tolerance);
  }
  if (j.contains("model")) {
    const auto& s = j["model"];
    get_if(s, "enc_ch1", &c.model.enc_ch1);
    get_if(s, "enc_ch2", &c.model.enc_ch2);
    get_if(s, "lstm_ch", &c.model.lstm_ch);
    get_if(s, "embed_hidden", &c.model.embed_hidden);
    get_if(s, "embed_spatial", &c.model.embed_spatial);
    get_if(s, "fuse_ch", &c.model.fuse_ch);
    get_if(s, "dec_ch", &c.model.dec_ch);
    get_if(s, "reward_conv", &c.model.reward_conv);
    get_if(s, "reward_hidden", &c.model.reward_hidden);
    get_if(s, "lr", &c.model.lr);
    get_if(s, "lambda_r", &c.model.lambda_r);
    get_if(s, "ensemble", &c.model.ensemble);
    get_if(s, "batch", &c.model.batch);
    get_if(s, "pretrain_steps", &c.model.pretrain_steps);
    get_if(s, "retrain_steps", &c.model.retrain_steps);
    get_if(s, "val_fraction", &c.model.val_fraction);
  }
  if (j.contains("policy")) {
    const auto& s = j["policy"];
    get_if(s, "conv1", &c.policy.conv1);
    get_if(s, "conv2", &c.policy.conv2);
    get_if(s, "conv3", &c.policy.conv3);
    get_if(s, "fc_embed", &c.policy.fc_embed);
    get_if(s, "scalar_embed", &c.policy.scalar_embed);
    get_if(s, "action_embed", &c.policy.action_embed);
    get_if(s, "head_hidden", &c.policy.head_hidden);
    get_if(s, "gamma", &c.policy.gamma);
    get_if(s, "tau", &c.policy.tau);
    get_if(s, "policy_delay", &c.policy.policy_delay);
    get_if(s, "sigma_act", &c.policy.sigma_act);
    get_if(s, "sigma_tgt", &c.policy.sigma_tgt);
    get_if(s, "noise_clip", &c.policy.noise_clip);
    get_if(s, "batch", &c.policy.batch);
    get_if(s, "lr_actor", &c.policy.lr_actor);
    get_if(s, "lr_critic", &c.policy.lr_critic);
    get_if(s, "mix_real", &c.policy.mix_real);
  }
  if (j.contains("loop")) {
    const auto& s = j["loop"];
    get_if(s, "exploration_steps", &c.loop.exploration_steps);
    get_if(s, "epochs", &c.loop.epochs);
    get_if(s, "steps_per_epoch", &c.loop.steps_per_epoch);
    get_if(s, "rollout_starts", &c.loop.rollout_starts);
    get_if(s, "policy_updates", &c.loop.policy_updates);
    get_if(s, "rollout_horizon", &c.loop.rollout_horizon);
    get_if(s, "model_retrain_every", &c.loop.model_retrain_every);
    get_if(s, "cap_env", &c.loop.cap_env);
    get_if(s, "cap_model", &c.loop.cap_model);
    get_if(s, "eval_every", &c.loop.eval_every);
    get_if(s, "eval_episodes", &c.loop.eval_episodes);
    get_if(s, "checkpoint_every", &c.loop.checkpoint_every);
    get_if(s, "ablation", &c.loop.ablation);
    get_if(s, "full_state_checkpoints", &c.loop.full_state_checkpoints);
    if (s.contains("scenario")) scenario_from(s["scenario"], &c.loop.scenario);
    if (s.contains("eval_scenario"))
      scenario_from(s["eval_scenario"], &c.loop.eval_scenario);
    else
      c.loop.eval_scenario = c.loop.scenario;
    get_if(s, "eval_comfort_margin", &c.loop.eval_comfort_margin);
  }
  return c;
}

AppConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return config_from_json(os.str());
}

}  // namespace socnav
