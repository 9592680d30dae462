#pragma once

#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "socnav/config.hpp"
#include "socnav/eval.hpp"
#include "socnav/policy.hpp"
#include "socnav/replay.hpp"
#include "socnav/world_model.hpp"

namespace socnav {

struct EvalPoint {
  int64_t env_step = 0;
  double avg_reward = 0.0;
};

struct TrainResult {
  std::string log_path;
  std::string final_checkpoint;
  std::vector<EvalPoint> eval_history;
  double final_eval_reward = 0.0;
};

// Runs the training loop: seeded random exploration filling D_env, model
// pre-training, then epochs interleaving environment steps, virtual rollouts
// into D_model, periodic model retraining and mixed-batch policy updates.
// Fully reproducible from (config, seed).
class Trainer {
 public:
  Trainer(const AppConfig& cfg, uint64_t seed, std::string out_dir);

  // One environment step plus everything hanging off it (pretraining at the
  // exploration boundary, rollouts, policy updates, retrains, evaluation,
  // logging). Returns false once the configured budget is exhausted.
  bool advance();

  TrainResult run();

  int64_t env_steps() const { return env_step_; }
  int64_t total_env_steps() const;
  const std::vector<EvalPoint>& eval_history() const { return eval_history_; }

  EnvReplay& env_buffer() { return env_buf_; }
  ModelReplay& model_buffer() { return model_buf_; }
  ActorCritic& policy() { return policy_; }
  ModelEnsemble* ensemble() { return ensemble_.get(); }

  // Writes <prefix>.bin (parameters, counters, RNG streams) and, when `full`,
  // <prefix>.state (replay buffers and live world) for bitwise resume.
  void save_checkpoint(const std::string& prefix, bool full) const;
  void load_checkpoint(const std::string& prefix);

  // Deterministic evaluation with the current actor (no exploration noise).
  double evaluate_policy(int episodes);

 private:
  AppConfig cfg_;
  uint64_t seed_;
  std::string out_dir_;

  Rng rng_scenario_, rng_explore_, rng_act_, rng_rollout_, rng_model_, rng_update_;
  ActorCritic policy_;
  std::unique_ptr<ModelEnsemble> ensemble_;
  EnvReplay env_buf_;
  ModelReplay model_buf_;

  WorldState world_;
  std::vector<ObservationBuilder> builders_;
  std::vector<Action> last_actions_;
  bool world_ready_ = false;
  int64_t episode_counter_ = 0;
  int64_t env_step_ = 0;
  bool pretrained_ = false;

  std::ofstream log_;
  std::string log_path_;
  std::vector<EvalPoint> eval_history_;
  double last_eval_reward_ = std::numeric_limits<double>::quiet_NaN();
  double last_model_mse_ = std::numeric_limits<double>::quiet_NaN();
  double last_critic_loss_ = std::numeric_limits<double>::quiet_NaN();
  double last_actor_loss_ = std::numeric_limits<double>::quiet_NaN();

  void reset_world();
  void env_step(bool explore);
  void do_rollouts();
  void do_policy_updates();
  void maybe_retrain();
  void log_row();
  int current_epoch() const;
  TransitionBatch make_mixed_batch(int n);
};

// Convenience wrapper over the whole loop.
TrainResult run_training(const AppConfig& cfg, uint64_t seed,
                         const std::string& out_dir);

}  // namespace socnav
