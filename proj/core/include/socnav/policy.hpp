#pragma once

#include <algorithm>

#include "socnav/autodiff.hpp"
#include "socnav/config.hpp"
#include "socnav/optim.hpp"
#include "socnav/world_model.hpp"

namespace socnav {

// 3D-convolutional embedding over the ten-frame map stack plus dense layers
// over the goal/velocity scalars; instantiated separately (no weight sharing)
// for the actor and each critic.
template <typename T>
class PolicyNetT {
 public:
  // `with_action` adds the action-embedding branch and a scalar Q output;
  // without it the net is an actor emitting [N,2] in [0,1].
  PolicyNetT(const PolicyConfig& cfg, const GridConfig& grid, bool with_action,
             uint64_t seed);

  // maps4 is a tape node of shape [N,10,H,W]; scalars4 [N,4]; action2 [N,2]
  // (critics only, normalized).
  Val forward(TapeT<T>& tp, Val maps4, Val scalars4, bool train);
  Val forward(TapeT<T>& tp, Val maps4, Val scalars4, Val action2, bool train);

  ParamSetT<T>& params() { return params_; }
  const ParamSetT<T>& params() const { return params_; }

 private:
  PolicyConfig cfg_;
  GridConfig grid_;
  bool with_action_;
  ParamSetT<T> params_;
  int fd_ = 0, fh_ = 0, fw_ = 0;  // conv stack output dims

  Val embed(TapeT<T>& tp, Val maps4, Val scalars4, Val action2, bool train);
};

// TD3 actor-critic with twin critics and target copies.
template <typename T>
struct ActorCriticT {
  PolicyConfig cfg;
  GridConfig grid;
  PolicyNetT<T> actor, actor_tgt;
  PolicyNetT<T> critic1, critic2, critic1_tgt, critic2_tgt;
  AdamT<T> adam_actor, adam_critic1, adam_critic2;
  int64_t update_count = 0;

  ActorCriticT(const PolicyConfig& c, const GridConfig& g, uint64_t seed)
      : cfg(c),
        grid(g),
        actor(c, g, false, seed * 2654435761ull + 1),
        actor_tgt(c, g, false, seed * 2654435761ull + 1),
        critic1(c, g, true, seed * 2654435761ull + 2),
        critic2(c, g, true, seed * 2654435761ull + 3),
        critic1_tgt(c, g, true, seed * 2654435761ull + 2),
        critic2_tgt(c, g, true, seed * 2654435761ull + 3),
        adam_actor(AdamConfig{c.lr_actor}),
        adam_critic1(AdamConfig{c.lr_critic}),
        adam_critic2(AdamConfig{c.lr_critic}) {
    actor_tgt.params().copy_values_from(actor.params());
    critic1_tgt.params().copy_values_from(critic1.params());
    critic2_tgt.params().copy_values_from(critic2.params());
    adam_actor.attach(actor.params());
    adam_critic1.attach(critic1.params());
    adam_critic2.attach(critic2.params());
  }
};

using ActorCritic = ActorCriticT<float>;

// Critic regression target: y = r + gamma * (1 - done) * min(q1, q2).
inline double td3_target(double reward, double gamma, bool done, double q1,
                         double q2) {
  return reward + gamma * (done ? 0.0 : 1.0) * std::min(q1, q2);
}

// Deterministic actor output plus Gaussian exploration noise (normalized
// units), clamped to bounds. sigma = 0 gives the evaluation policy.
Action act(ActorCritic& policy, const Observation& obs, const NormConfig& norm,
           double sigma, Rng& rng);

// Batched actor inference for rollout generation.
std::vector<Action> act_batch(ActorCritic& policy,
                              const std::vector<Observation>& obs,
                              const NormConfig& norm, double sigma, Rng& rng);

struct TD3Diagnostics {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  bool actor_updated = false;
};

// One TD3 update on a mixed batch: twin-critic regression to the smoothed
// target, delayed actor ascent on critic1, soft target blending.
TD3Diagnostics td3_update(ActorCritic& policy, const TransitionBatch& batch,
                          Rng& rng);

// ----------------------------------------------------------------------
// Template implementation
// ----------------------------------------------------------------------

template <typename T>
PolicyNetT<T>::PolicyNetT(const PolicyConfig& cfg, const GridConfig& grid,
                          bool with_action, uint64_t seed)
    : cfg_(cfg), grid_(grid), with_action_(with_action) {
  fd_ = detail::conv_out(detail::conv_out(kStackDepth, 3, 1, 1), 3, 2, 1);
  fd_ = detail::conv_out(fd_, 3, 2, 1);
  int h1 = detail::conv_out(grid.height, 3, 2, 1);
  int w1 = detail::conv_out(grid.width, 3, 2, 1);
  fh_ = detail::conv_out(detail::conv_out(h1, 3, 2, 1), 3, 2, 1);
  fw_ = detail::conv_out(detail::conv_out(w1, 3, 2, 1), 3, 2, 1);

  Rng rng(seed);
  rng = rng.fork("policy-init");
  auto add = [&](const std::string& name, std::vector<int> shape, int fan_in) {
    auto& e = params_.add(name, shape);
    if (fan_in > 0) init_uniform_fanin(e.value, fan_in, rng);
  };
  const int c1 = cfg.conv1, c2 = cfg.conv2, c3 = cfg.conv3;
  add("conv1_w", {c1, 1, 3, 3, 3}, 27);
  add("conv1_b", {c1}, 0);
  add("conv2_w", {c2, c1, 3, 3, 3}, c1 * 27);
  add("conv2_b", {c2}, 0);
  add("conv3_w", {c3, c2, 3, 3, 3}, c2 * 27);
  add("conv3_b", {c3}, 0);
  const int flat = c3 * fd_ * fh_ * fw_;
  add("fc_w", {flat, cfg.fc_embed}, flat);
  add("fc_b", {cfg.fc_embed}, 0);
  add("sc_w", {4, cfg.scalar_embed}, 4);
  add("sc_b", {cfg.scalar_embed}, 0);
  int head_in = cfg.fc_embed + cfg.scalar_embed;
  if (with_action) {
    add("ac_w", {2, cfg.action_embed}, 2);
    add("ac_b", {cfg.action_embed}, 0);
    head_in += cfg.action_embed;
  }
  add("h1_w", {head_in, cfg.head_hidden}, head_in);
  add("h1_b", {cfg.head_hidden}, 0);
  add("h2_w", {cfg.head_hidden, with_action ? 1 : 2}, cfg.head_hidden);
  add("h2_b", {with_action ? 1 : 2}, 0);
}

template <typename T>
Val PolicyNetT<T>::embed(TapeT<T>& tp, Val maps4, Val scalars4, Val action2,
                         bool train) {
  detail::ParamNodes<T> P(tp, params_, train);
  const auto& mshape = tp.value(maps4).shape();
  const int n = mshape[0];
  Val x = ops::reshape(tp, maps4, {n, 1, kStackDepth, mshape[2], mshape[3]});
  x = ops::leaky_relu(tp, ops::conv3d(tp, x, P("conv1_w"), P("conv1_b"), 1, 2, 2, 1, 1, 1));
  x = ops::leaky_relu(tp, ops::conv3d(tp, x, P("conv2_w"), P("conv2_b"), 2, 2, 2, 1, 1, 1));
  x = ops::leaky_relu(tp, ops::conv3d(tp, x, P("conv3_w"), P("conv3_b"), 2, 2, 2, 1, 1, 1));
  x = ops::reshape(tp, x, {n, static_cast<int>(tp.value(x).size() / n)});
  Val feat = ops::leaky_relu(tp, ops::dense(tp, x, P("fc_w"), P("fc_b")));
  Val sc = ops::leaky_relu(tp, ops::dense(tp, scalars4, P("sc_w"), P("sc_b")));
  std::vector<Val> parts{feat, sc};
  if (with_action_) {
    Val ae = ops::leaky_relu(tp, ops::dense(tp, action2, P("ac_w"), P("ac_b")));
    parts.push_back(ae);
  }
  Val cat = ops::concat_axis1(tp, parts);
  Val h = ops::leaky_relu(tp, ops::dense(tp, cat, P("h1_w"), P("h1_b")));
  return ops::dense(tp, h, P("h2_w"), P("h2_b"));
}

template <typename T>
Val PolicyNetT<T>::forward(TapeT<T>& tp, Val maps4, Val scalars4, bool train) {
  if (with_action_) throw std::logic_error("policy net: critic needs an action");
  Val out = embed(tp, maps4, scalars4, Val{}, train);
  // Squash then map into [0,1]^2; bounds hold for any parameter values.
  return ops::mul_scalar(tp, ops::add_scalar(tp, ops::tanh_op(tp, out), 1.0), 0.5);
}

template <typename T>
Val PolicyNetT<T>::forward(TapeT<T>& tp, Val maps4, Val scalars4, Val action2,
                           bool train) {
  if (!with_action_) throw std::logic_error("policy net: actor takes no action");
  return embed(tp, maps4, scalars4, action2, train);
}

}  // namespace socnav
