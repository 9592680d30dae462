#include "socnav/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "socnav/checkpoint.hpp"
#include "socnav/lidar.hpp"

namespace socnav {

namespace {

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void get(std::istream& is, T* v) {
  is.read(reinterpret_cast<char*>(v), sizeof(T));
}

void put_pose(std::ostream& os, const Pose2& p) {
  put(os, p.x);
  put(os, p.y);
  put(os, p.theta);
}
Pose2 get_pose(std::istream& is) {
  double x, y, t;
  get(is, &x);
  get(is, &y);
  get(is, &t);
  return {x, y, t};
}

void save_world(std::ostream& os, const WorldState& w) {
  put(os, w.dt);
  put(os, w.tick);
  put(os, w.main_agent);
  put<uint64_t>(os, w.agents.size());
  for (const auto& a : w.agents) {
    put_pose(os, a.pose);
    put(os, a.vel.v);
    put(os, a.vel.w);
    put(os, a.goal.x);
    put(os, a.goal.y);
    put(os, a.radius);
    put<uint8_t>(os, static_cast<uint8_t>(a.status));
  }
  put<uint64_t>(os, w.obstacles.size());
  for (const auto& o : w.obstacles) {
    if (const auto* c = std::get_if<CircleShape>(&o.shape)) {
      put<uint8_t>(os, 0);
      put(os, c->center.x);
      put(os, c->center.y);
      put(os, c->radius);
    } else if (const auto* s = std::get_if<SegmentShape>(&o.shape)) {
      put<uint8_t>(os, 1);
      put(os, s->a.x);
      put(os, s->a.y);
      put(os, s->b.x);
      put(os, s->b.y);
    } else {
      const auto& r = std::get<RectShape>(o.shape);
      put<uint8_t>(os, 2);
      put(os, r.center.x);
      put(os, r.center.y);
      put(os, r.extents.x);
      put(os, r.extents.y);
      put(os, r.rotation);
    }
  }
}

WorldState load_world(std::istream& is) {
  WorldState w;
  get(is, &w.dt);
  get(is, &w.tick);
  get(is, &w.main_agent);
  uint64_t n = 0;
  get(is, &n);
  w.agents.resize(n);
  for (auto& a : w.agents) {
    a.pose = get_pose(is);
    double v, wv;
    get(is, &v);
    get(is, &wv);
    a.vel = Action(v, wv);
    get(is, &a.goal.x);
    get(is, &a.goal.y);
    get(is, &a.radius);
    uint8_t st = 0;
    get(is, &st);
    a.status = static_cast<AgentStatus>(st);
  }
  uint64_t m = 0;
  get(is, &m);
  w.obstacles.resize(m);
  for (auto& o : w.obstacles) {
    uint8_t tag = 0;
    get(is, &tag);
    if (tag == 0) {
      CircleShape c;
      get(is, &c.center.x);
      get(is, &c.center.y);
      get(is, &c.radius);
      o.shape = c;
    } else if (tag == 1) {
      SegmentShape s;
      get(is, &s.a.x);
      get(is, &s.a.y);
      get(is, &s.b.x);
      get(is, &s.b.y);
      o.shape = s;
    } else {
      RectShape r;
      get(is, &r.center.x);
      get(is, &r.center.y);
      get(is, &r.extents.x);
      get(is, &r.extents.y);
      get(is, &r.rotation);
      o.shape = r;
    }
  }
  return w;
}

void add_paramset(CheckpointWriter& w, const ParamSetT<float>& p,
                  const std::string& prefix) {
  for (const auto& e : p.entries()) w.add(prefix + "/" + e.name, e.value);
}

void read_paramset(const CheckpointReader& r, ParamSetT<float>* p,
                   const std::string& prefix) {
  for (auto& e : p->entries()) {
    Tensor t = r.tensor(prefix + "/" + e.name);
    check_same_shape(e.value, t, "checkpoint load");
    e.value = std::move(t);
  }
}

void add_adam(CheckpointWriter& w, AdamT<float>& adam, const ParamSetT<float>& p,
              const std::string& prefix) {
  for (size_t i = 0; i < p.size(); ++i) {
    w.add(prefix + "/m/" + p.entries()[i].name, adam.moments1()[i]);
    w.add(prefix + "/v/" + p.entries()[i].name, adam.moments2()[i]);
  }
}

void read_adam(const CheckpointReader& r, AdamT<float>* adam,
               const ParamSetT<float>& p, const std::string& prefix) {
  for (size_t i = 0; i < p.size(); ++i) {
    adam->moments1()[i] = r.tensor(prefix + "/m/" + p.entries()[i].name);
    adam->moments2()[i] = r.tensor(prefix + "/v/" + p.entries()[i].name);
  }
}

}  // namespace

Trainer::Trainer(const AppConfig& cfg, uint64_t seed, std::string out_dir)
    : cfg_(cfg),
      seed_(seed),
      out_dir_(std::move(out_dir)),
      policy_(cfg.policy, cfg.grid, seed),
      env_buf_(cfg.loop.cap_env, cfg.lidar),
      model_buf_(cfg.loop.cap_model) {
  if (cfg_.loop.exploration_steps < 0 || cfg_.loop.epochs < 1 ||
      cfg_.loop.steps_per_epoch < 1)
    throw std::invalid_argument("trainer: loop counts out of range");
  if (cfg_.loop.rollout_starts < 0 || cfg_.loop.policy_updates < 0 ||
      cfg_.loop.rollout_horizon < 1)
    throw std::invalid_argument("trainer: rollout/update counts out of range");
  if (cfg_.policy.batch < 1 || cfg_.model.batch < 1)
    throw std::invalid_argument("trainer: batch sizes must be positive");
  if (cfg_.loop.ablation && cfg_.loop.rollout_starts > 0)
    throw std::invalid_argument("trainer: ablation requires rollout_starts == 0");

  Rng master(seed_);
  rng_scenario_ = master.fork("scenario-stream");
  rng_explore_ = master.fork("explore");
  rng_act_ = master.fork("act-noise");
  rng_rollout_ = master.fork("rollout");
  rng_model_ = master.fork("model-train");
  rng_update_ = master.fork("policy-update");

  if (!cfg_.loop.ablation)
    ensemble_ = std::make_unique<ModelEnsemble>(cfg_.model, cfg_.grid,
                                                master.fork("model-init").next_u64());

  std::filesystem::create_directories(out_dir_);
  log_path_ = out_dir_ + "/train_log.csv";
  log_.open(log_path_);
  if (!log_) throw std::runtime_error("trainer: cannot open " + log_path_);
  log_ << "env_step,epoch,avg_reward_eval,model_mse,critic_loss,actor_loss,"
          "d_env_size,d_model_size\n";
  std::ofstream cfg_out(out_dir_ + "/config.json");
  cfg_out << config_to_json(cfg_);
}

int64_t Trainer::total_env_steps() const {
  return cfg_.loop.exploration_steps +
         static_cast<int64_t>(cfg_.loop.epochs) * cfg_.loop.steps_per_epoch;
}

int Trainer::current_epoch() const {
  if (env_step_ <= cfg_.loop.exploration_steps) return 0;
  return static_cast<int>((env_step_ - cfg_.loop.exploration_steps - 1) /
                          cfg_.loop.steps_per_epoch) +
         1;
}

void Trainer::reset_world() {
  Scenario spec = cfg_.loop.scenario;
  spec.seed = (spec.seed ^ (seed_ * 0x9e3779b97f4a7c15ull)) +
              static_cast<uint64_t>(episode_counter_);
  world_ = generate_scenario(spec, cfg_.sim);
  builders_.assign(world_.agents.size(), ObservationBuilder(cfg_.grid));
  last_actions_.assign(world_.agents.size(), Action());
  env_buf_.begin_episode();
  episode_counter_ += 1;

  // Initial scans: the buffer's newest tick always carries the observation
  // the next action will be taken from, so every env step closes exactly one
  // transition.
  const int main = world_.main_agent;
  for (size_t i = 0; i < world_.agents.size(); ++i) {
    LaserScan s = scan(world_, static_cast<int>(i), cfg_.lidar);
    builders_[i].push(s, world_.agents[i].pose);
    if (static_cast<int>(i) == main) {
      EnvTick tick;
      tick.ranges = s.ranges;
      tick.pose = world_.agents[i].pose;
      tick.goal = world_.agents[i].goal;
      tick.vel = last_actions_[i];
      env_buf_.push_tick(std::move(tick));
    }
  }
  world_ready_ = true;
}

void Trainer::env_step(bool explore) {
  if (!world_ready_) reset_world();
  const int n = static_cast<int>(world_.agents.size());
  const int main = world_.main_agent;

  std::vector<Action> actions;
  Action main_action;
  for (int i = 0; i < n; ++i) {
    if (!world_.agents[i].active()) continue;
    Observation obs = builders_[i].build(world_.agents[i].goal, last_actions_[i]);
    Action a = explore ? Action(rng_explore_.uniform(kVMin, kVMax),
                                rng_explore_.uniform(kWMin, kWMax))
                       : act(policy_, obs, cfg_.norm, cfg_.policy.sigma_act,
                             rng_act_);
    actions.push_back(a);
    if (i == main) main_action = a;
  }
  {
    size_t ai = 0;
    for (int i = 0; i < n; ++i)
      if (world_.agents[i].active()) last_actions_[i] = actions[ai++];
  }

  AgentSnapshot prev{world_.agents[main].pose, world_.agents[main].goal,
                     world_.agents[main].status};
  step_world(world_, actions, cfg_.sim);
  Clearances cl = min_clearances(world_, main, cfg_.lidar.max_range);
  AgentSnapshot cur{world_.agents[main].pose, world_.agents[main].goal,
                    world_.agents[main].status};
  StepOutcome outcome = compute_reward(prev, cur, cl, cfg_.reward);
  env_buf_.complete_last_tick(main_action, static_cast<float>(outcome.reward),
                              outcome.terminal, outcome.kind);

  // Post-step scans: live observations for the next step and the buffer tick
  // closing this transition.
  for (int i = 0; i < n; ++i) {
    const bool is_main = i == main;
    if (!world_.agents[i].active() && !is_main) continue;
    LaserScan s = scan(world_, i, cfg_.lidar);
    if (world_.agents[i].active()) builders_[i].push(s, world_.agents[i].pose);
    if (is_main) {
      EnvTick tick;
      tick.ranges = s.ranges;
      tick.pose = world_.agents[i].pose;
      tick.goal = world_.agents[i].goal;
      tick.vel = last_actions_[i];
      env_buf_.push_tick(std::move(tick));
    }
  }

  if (outcome.terminal) {
    env_buf_.end_episode();
    world_ready_ = false;
  }
  env_step_ += 1;
}

void Trainer::do_rollouts() {
  if (!ensemble_ || cfg_.loop.rollout_starts <= 0 || env_buf_.size() == 0) return;
  std::vector<int64_t> ids = env_buf_.sample_ids(cfg_.loop.rollout_starts, rng_rollout_);
  std::vector<Observation> starts;
  starts.reserve(ids.size());
  for (int64_t id : ids) starts.push_back(env_buf_.observation_at(id, cfg_.grid));

  RolloutParams params;
  params.horizon = cfg_.loop.rollout_horizon;
  params.dt = cfg_.sim.dt;
  params.arrive_reward_threshold = 0.8 * cfg_.reward.r_arrival;
  params.collide_reward_threshold = 0.8 * cfg_.reward.r_collision;
  BatchActionFn fn = [this](const std::vector<Observation>& obs, Rng& rng) {
    return act_batch(policy_, obs, cfg_.norm, cfg_.policy.sigma_act, rng);
  };
  auto rollouts = rollout_model(*ensemble_, starts, fn, params, cfg_.norm, rng_rollout_);
  for (const auto& r : rollouts) model_buf_.push_rollout(r);
}

TransitionBatch Trainer::make_mixed_batch(int n) {
  int n_real = static_cast<int>(std::lround(cfg_.policy.mix_real * n));
  n_real = std::clamp(n_real, 0, n);
  if (cfg_.loop.ablation || model_buf_.size() == 0) n_real = n;
  if (n_real == 0) n_real = 1;  // keep at least one grounded sample per batch
  const int n_virt = n - n_real;

  BatchBuilder builder(n, cfg_.grid, cfg_.norm, cfg_.sim.dt);
  std::vector<int64_t> real_ids = env_buf_.sample_ids(n_real, rng_update_);
  for (int i = 0; i < n_real; ++i)
    builder.set_row(i, env_buf_.sample_at(real_ids[i], cfg_.grid));
  if (n_virt > 0) {
    std::vector<int64_t> virt_ids = model_buf_.sample_ids(n_virt, rng_update_);
    for (int i = 0; i < n_virt; ++i)
      builder.set_row(n_real + i,
                      model_buf_.sample_at(virt_ids[i], cfg_.grid, cfg_.sim.dt));
  }
  return builder.take();
}

void Trainer::do_policy_updates() {
  if (cfg_.loop.policy_updates <= 0 || env_buf_.size() == 0) return;
  double closs = 0.0, aloss = 0.0;
  int aupd = 0;
  for (int p = 0; p < cfg_.loop.policy_updates; ++p) {
    TransitionBatch batch = make_mixed_batch(cfg_.policy.batch);
    TD3Diagnostics d = td3_update(policy_, batch, rng_update_);
    closs += d.critic_loss;
    if (d.actor_updated) {
      aloss += d.actor_loss;
      ++aupd;
    }
  }
  last_critic_loss_ = closs / cfg_.loop.policy_updates;
  if (aupd > 0) last_actor_loss_ = aloss / aupd;
}

void Trainer::maybe_retrain() {
  if (!ensemble_ || cfg_.loop.model_retrain_every <= 0) return;
  if (env_step_ <= cfg_.loop.exploration_steps) return;
  if (env_step_ % cfg_.loop.model_retrain_every != 0) return;
  if (env_buf_.size() < cfg_.model.batch) return;
  auto rep = train_model(*ensemble_, env_buf_, cfg_.grid, cfg_.norm, cfg_.sim.dt,
                         cfg_.model.retrain_steps, rng_model_);
  double mse = 0.0;
  for (double v : rep.val_mse) mse += v;
  last_model_mse_ = mse / rep.val_mse.size();
}

double Trainer::evaluate_policy(int episodes) {
  EpisodeConfig ecfg = EpisodeConfig::from(cfg_);
  PolicyFn fn = [this](const Observation& obs, Rng& rng) {
    return act(policy_, obs, cfg_.norm, 0.0, rng);
  };
  double total = 0.0;
  for (int i = 0; i < episodes; ++i) {
    EpisodeTrace tr = run_episode(cfg_.loop.eval_scenario, ecfg, fn,
                                  cfg_.loop.eval_scenario.seed + 7777 +
                                      static_cast<uint64_t>(i));
    total += tr.total_reward();
  }
  return total / episodes;
}

void Trainer::log_row() {
  std::ostringstream os;
  os << std::setprecision(10);
  os << env_step_ << ',' << current_epoch() << ',' << last_eval_reward_ << ','
     << last_model_mse_ << ',' << last_critic_loss_ << ',' << last_actor_loss_
     << ',' << env_buf_.size() << ',' << model_buf_.size() << '\n';
  log_ << os.str();
  log_.flush();
}

bool Trainer::advance() {
  if (env_step_ >= total_env_steps()) return false;
  const bool explore = env_step_ < cfg_.loop.exploration_steps;

  if (!explore && !pretrained_) {
    if (ensemble_ && env_buf_.size() >= cfg_.model.batch) {
      auto rep = train_model(*ensemble_, env_buf_, cfg_.grid, cfg_.norm,
                             cfg_.sim.dt, cfg_.model.pretrain_steps, rng_model_);
      double mse = 0.0;
      for (double v : rep.val_mse) mse += v;
      last_model_mse_ = mse / rep.val_mse.size();
    }
    pretrained_ = true;
  }

  env_step(explore);
  if (!explore) {
    do_rollouts();
    do_policy_updates();
    maybe_retrain();
  }
  if (cfg_.loop.eval_every > 0 && env_step_ % cfg_.loop.eval_every == 0) {
    last_eval_reward_ = evaluate_policy(cfg_.loop.eval_episodes);
    eval_history_.push_back({env_step_, last_eval_reward_});
  }
  log_row();
  if (cfg_.loop.checkpoint_every > 0 &&
      env_step_ % cfg_.loop.checkpoint_every == 0) {
    save_checkpoint(out_dir_ + "/ckpt_" + std::to_string(env_step_),
                    cfg_.loop.full_state_checkpoints);
  }
  return true;
}

TrainResult Trainer::run() {
  while (advance()) {
  }
  TrainResult res;
  res.log_path = log_path_;
  res.final_checkpoint = out_dir_ + "/ckpt_final";
  save_checkpoint(res.final_checkpoint, cfg_.loop.full_state_checkpoints);
  res.eval_history = eval_history_;
  res.final_eval_reward = last_eval_reward_;
  return res;
}

void Trainer::save_checkpoint(const std::string& prefix, bool full) const {
  CheckpointWriter w;
  add_paramset(w, policy_.actor.params(), "actor");
  add_paramset(w, policy_.actor_tgt.params(), "actor_tgt");
  add_paramset(w, policy_.critic1.params(), "critic1");
  add_paramset(w, policy_.critic2.params(), "critic2");
  add_paramset(w, policy_.critic1_tgt.params(), "critic1_tgt");
  add_paramset(w, policy_.critic2_tgt.params(), "critic2_tgt");
  auto& self = const_cast<Trainer&>(*this);
  add_adam(w, self.policy_.adam_actor, policy_.actor.params(), "adam/actor");
  add_adam(w, self.policy_.adam_critic1, policy_.critic1.params(), "adam/critic1");
  add_adam(w, self.policy_.adam_critic2, policy_.critic2.params(), "adam/critic2");
  if (ensemble_) {
    for (size_t i = 0; i < ensemble_->members.size(); ++i)
      add_paramset(w, ensemble_->members[i].params(),
                   "model" + std::to_string(i));
  }

  nlohmann::json meta;
  meta["seed"] = seed_;
  meta["env_step"] = env_step_;
  meta["episode_counter"] = episode_counter_;
  meta["update_count"] = policy_.update_count;
  meta["pretrained"] = pretrained_;
  meta["adam_t_actor"] = self.policy_.adam_actor.steps_taken();
  meta["adam_t_critic1"] = self.policy_.adam_critic1.steps_taken();
  meta["adam_t_critic2"] = self.policy_.adam_critic2.steps_taken();
  meta["last_eval_reward"] = last_eval_reward_;
  meta["last_model_mse"] = last_model_mse_;
  meta["last_critic_loss"] = last_critic_loss_;
  meta["last_actor_loss"] = last_actor_loss_;
  meta["ensemble"] = ensemble_ ? static_cast<int>(ensemble_->members.size()) : 0;
  meta["grid_height"] = cfg_.grid.height;
  meta["grid_width"] = cfg_.grid.width;
  w.set_meta(meta.dump());
  w.set_rng_state({rng_scenario_.state(), rng_explore_.state(), rng_act_.state(),
                   rng_rollout_.state(), rng_model_.state(), rng_update_.state()});
  w.save(prefix + ".bin");

  if (full) {
    std::ofstream os(prefix + ".state", std::ios::binary);
    if (!os) throw std::runtime_error("trainer: cannot open " + prefix + ".state");
    env_buf_.save(os);
    model_buf_.save(os);
    put<uint8_t>(os, world_ready_ ? 1 : 0);
    if (world_ready_) {
      save_world(os, world_);
      put<uint64_t>(os, builders_.size());
      for (const auto& b : builders_) {
        put<uint64_t>(os, b.scans().size());
        for (size_t k = 0; k < b.scans().size(); ++k) {
          const auto& s = b.scans()[k];
          put<uint64_t>(os, s.ranges.size());
          os.write(reinterpret_cast<const char*>(s.ranges.data()),
                   static_cast<std::streamsize>(s.ranges.size() * sizeof(float)));
          put_pose(os, b.poses()[k]);
        }
      }
      put<uint64_t>(os, last_actions_.size());
      for (const auto& a : last_actions_) {
        put(os, a.v);
        put(os, a.w);
      }
    }
  }
}

void Trainer::load_checkpoint(const std::string& prefix) {
  CheckpointReader r(prefix + ".bin");
  read_paramset(r, &policy_.actor.params(), "actor");
  read_paramset(r, &policy_.actor_tgt.params(), "actor_tgt");
  read_paramset(r, &policy_.critic1.params(), "critic1");
  read_paramset(r, &policy_.critic2.params(), "critic2");
  read_paramset(r, &policy_.critic1_tgt.params(), "critic1_tgt");
  read_paramset(r, &policy_.critic2_tgt.params(), "critic2_tgt");
  read_adam(r, &policy_.adam_actor, policy_.actor.params(), "adam/actor");
  read_adam(r, &policy_.adam_critic1, policy_.critic1.params(), "adam/critic1");
  read_adam(r, &policy_.adam_critic2, policy_.critic2.params(), "adam/critic2");

  nlohmann::json meta = nlohmann::json::parse(r.meta_json());
  env_step_ = meta.at("env_step").get<int64_t>();
  episode_counter_ = meta.at("episode_counter").get<int64_t>();
  policy_.update_count = meta.at("update_count").get<int64_t>();
  pretrained_ = meta.at("pretrained").get<bool>();
  policy_.adam_actor.set_steps_taken(meta.at("adam_t_actor").get<int64_t>());
  policy_.adam_critic1.set_steps_taken(meta.at("adam_t_critic1").get<int64_t>());
  policy_.adam_critic2.set_steps_taken(meta.at("adam_t_critic2").get<int64_t>());
  last_eval_reward_ = meta.at("last_eval_reward").get<double>();
  last_model_mse_ = meta.at("last_model_mse").get<double>();
  last_critic_loss_ = meta.at("last_critic_loss").get<double>();
  last_actor_loss_ = meta.at("last_actor_loss").get<double>();
  if (ensemble_) {
    for (size_t i = 0; i < ensemble_->members.size(); ++i)
      read_paramset(r, &ensemble_->members[i].params(),
                    "model" + std::to_string(i));
  }
  const auto& rng = r.rng_state();
  if (rng.size() == 6) {
    rng_scenario_.set_state(rng[0]);
    rng_explore_.set_state(rng[1]);
    rng_act_.set_state(rng[2]);
    rng_rollout_.set_state(rng[3]);
    rng_model_.set_state(rng[4]);
    rng_update_.set_state(rng[5]);
  }

  world_ready_ = false;
  std::ifstream is(prefix + ".state", std::ios::binary);
  if (is) {
    env_buf_.load(is);
    model_buf_.load(is);
    uint8_t ready = 0;
    get(is, &ready);
    if (ready) {
      world_ = load_world(is);
      uint64_t nb = 0;
      get(is, &nb);
      builders_.assign(nb, ObservationBuilder(cfg_.grid));
      for (auto& b : builders_) {
        uint64_t ns = 0;
        get(is, &ns);
        std::vector<LaserScan> scans(ns);
        std::vector<Pose2> poses(ns);
        for (uint64_t k = 0; k < ns; ++k) {
          uint64_t nr = 0;
          get(is, &nr);
          scans[k].ranges.resize(nr);
          is.read(reinterpret_cast<char*>(scans[k].ranges.data()),
                  static_cast<std::streamsize>(nr * sizeof(float)));
          scans[k].config = cfg_.lidar;
          poses[k] = get_pose(is);
          scans[k].pose_at_scan = poses[k];
        }
        b.restore(std::move(scans), std::move(poses));
      }
      uint64_t na = 0;
      get(is, &na);
      last_actions_.resize(na);
      for (auto& a : last_actions_) {
        double v, wv;
        get(is, &v);
        get(is, &wv);
        a = Action(v, wv);
      }
      world_ready_ = true;
    }
    if (!is) throw std::runtime_error("trainer: truncated state file");
  }
}

TrainResult run_training(const AppConfig& cfg, uint64_t seed,
                         const std::string& out_dir) {
  Trainer trainer(cfg, seed, out_dir);
  return trainer.run();
}

}  // namespace socnav
