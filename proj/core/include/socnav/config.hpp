#pragma once

#include <cstdint>
#include <string>

#include "socnav/lidar.hpp"
#include "socnav/obsmap.hpp"
#include "socnav/reward.hpp"
#include "socnav/sim.hpp"

namespace socnav {

// Transition-model architecture and training knobs.
struct ModelConfig {
  int enc_ch1 = 8;        // first conv channels, motion and content encoders
  int enc_ch2 = 16;       // second conv channels (feature maps at H/4 x W/4)
  int lstm_ch = 16;       // recurrent hidden channels
  int embed_hidden = 32;  // scalar embedding hidden width
  int embed_spatial = 4;  // channels of the broadcast scalar embedding
  int fuse_ch = 16;
  int dec_ch = 8;
  int reward_conv = 4;
  int reward_hidden = 64;
  double lr = 1e-3;
  double lambda_r = 0.01;  // weight of the reward term in the loss
  int ensemble = 5;        // bootstrap members
  int batch = 16;
  int pretrain_steps = 2000;
  int retrain_steps = 500;
  double val_fraction = 0.1;
};

// TD3 actor-critic configuration.
struct PolicyConfig {
  int conv1 = 8, conv2 = 16, conv3 = 16;  // 3D conv channel widths
  int fc_embed = 128;
  int scalar_embed = 32;
  int action_embed = 32;
  int head_hidden = 64;
  double gamma = 0.99;
  double tau = 0.005;
  int policy_delay = 2;
  double sigma_act = 0.1;   // exploration noise, normalized action units
  double sigma_tgt = 0.2;   // target smoothing noise
  double noise_clip = 0.5;
  int batch = 128;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double mix_real = 0.1;    // fraction of each batch drawn from D_env
};

// Orchestration loop counts and buffer sizes.
struct LoopConfig {
  int64_t exploration_steps = 2000;  // E
  int epochs = 50;                   // N
  int steps_per_epoch = 500;         // R
  int rollout_starts = 20;           // M, model rollout starts per env step
  int policy_updates = 10;           // P, policy updates per env step
  int rollout_horizon = 5;           // h
  int model_retrain_every = 1000;    // env steps between model retrains
  int64_t cap_env = 100000;
  int64_t cap_model = 400000;
  int eval_every = 500;
  int eval_episodes = 5;
  int checkpoint_every = 0;          // 0: final checkpoint only
  bool ablation = false;             // true: no model, pure model-free TD3
  bool full_state_checkpoints = false;
  Scenario scenario{ScenarioKind::random, 0, 4, 10.0, 0.05};
  Scenario eval_scenario{ScenarioKind::random, 0, 4, 10.0, 0.05};
  double eval_comfort_margin = 0.45;
};

struct AppConfig {
  SimParams sim;
  LidarConfig lidar;
  GridConfig grid;
  NormConfig norm;
  RewardConfig reward;
  ModelConfig model;
  PolicyConfig policy;
  LoopConfig loop;
};

// JSON round-trip; absent keys keep their defaults on load.
std::string config_to_json(const AppConfig& cfg);
AppConfig config_from_json(const std::string& text);
AppConfig load_config_file(const std::string& path);

}  // namespace socnav
