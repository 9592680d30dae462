#include "socnav/policy.hpp"

#include <cmath>

namespace socnav {

std::vector<Action> act_batch(ActorCritic& policy,
                              const std::vector<Observation>& obs,
                              const NormConfig& norm, double sigma, Rng& rng) {
  const GridConfig& grid = policy.grid;
  const int n = static_cast<int>(obs.size());
  const int hw = grid.cells();
  Tensor maps({n, kStackDepth, grid.height, grid.width});
  Tensor scalars({n, 4});
  for (int i = 0; i < n; ++i) {
    NormalizedObs no = normalize_observation(obs[i], norm);
    std::copy(no.maps.begin(), no.maps.end(),
              maps.data() + static_cast<int64_t>(i) * kStackDepth * hw);
    float* sc = scalars.data() + static_cast<int64_t>(i) * 4;
    sc[0] = no.goal_dist;
    sc[1] = no.goal_bearing;
    sc[2] = no.v;
    sc[3] = no.w;
  }
  TapeT<float> tape;
  Val m = tape.input(std::move(maps));
  Val s = tape.input(std::move(scalars));
  Val av = policy.actor.forward(tape, m, s, false);
  const Tensor& out = tape.value(av);
  std::vector<Action> actions(n);
  for (int i = 0; i < n; ++i) {
    double a0 = out[i * 2 + 0];
    double a1 = out[i * 2 + 1];
    if (sigma > 0.0) {
      a0 += rng.normal(0.0, sigma);
      a1 += rng.normal(0.0, sigma);
    }
    a0 = std::clamp(a0, 0.0, 1.0);
    a1 = std::clamp(a1, 0.0, 1.0);
    actions[i] = Action(a0 * (kVMax - kVMin) + kVMin, a1 * (kWMax - kWMin) + kWMin);
  }
  return actions;
}

Action act(ActorCritic& policy, const Observation& obs, const NormConfig& norm,
           double sigma, Rng& rng) {
  return act_batch(policy, {obs}, norm, sigma, rng)[0];
}

TD3Diagnostics td3_update(ActorCritic& policy, const TransitionBatch& batch,
                          Rng& rng) {
  const PolicyConfig& cfg = policy.cfg;
  const int n = batch.n;
  TD3Diagnostics diag;

  // Smoothed target actions and the regression target, outside any gradient
  // path.
  Tensor y({n, 1});
  {
    TapeT<float> tp;
    Val nmaps = tp.input(batch.next_obs_maps);
    Val nsc = tp.input(batch.next_obs_scalars);
    Val at = policy.actor_tgt.forward(tp, nmaps, nsc, false);
    Tensor a2 = tp.value(at);
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < 2; ++d) {
        double eps = std::clamp(rng.normal(0.0, cfg.sigma_tgt), -cfg.noise_clip,
                                cfg.noise_clip);
        double v = std::clamp(static_cast<double>(a2[i * 2 + d]) + eps, 0.0, 1.0);
        a2[i * 2 + d] = static_cast<float>(v);
      }
    }
    Val a2v = tp.input(std::move(a2));
    Val q1 = policy.critic1_tgt.forward(tp, nmaps, nsc, a2v, false);
    Val q2 = policy.critic2_tgt.forward(tp, nmaps, nsc, a2v, false);
    for (int i = 0; i < n; ++i) {
      y[i] = static_cast<float>(td3_target(batch.rewards[i], cfg.gamma,
                                           batch.dones[i] != 0.0f,
                                           tp.value(q1)[i], tp.value(q2)[i]));
    }
  }

  // Twin-critic regression.
  {
    TapeT<float> tp;
    Val maps = tp.input(batch.obs_maps);
    Val sc = tp.input(batch.obs_scalars);
    Val act = tp.input(batch.actions);
    Val yv = tp.input(y);
    Val q1 = policy.critic1.forward(tp, maps, sc, act, true);
    Val q2 = policy.critic2.forward(tp, maps, sc, act, true);
    Val loss = ops::add(tp, ops::mse(tp, q1, yv), ops::mse(tp, q2, yv));
    diag.critic_loss = tp.value(loss)[0];
    if (!std::isfinite(diag.critic_loss))
      throw std::runtime_error("td3_update: non-finite critic loss");
    tp.backward(loss);
    policy.adam_critic1.step(policy.critic1.params());
    policy.adam_critic2.step(policy.critic2.params());
  }

  // Delayed actor ascent on critic1 and target blending.
  policy.update_count += 1;
  if (policy.update_count % cfg.policy_delay == 0) {
    TapeT<float> tp;
    Val maps = tp.input(batch.obs_maps);
    Val sc = tp.input(batch.obs_scalars);
    Val a = policy.actor.forward(tp, maps, sc, true);
    Val q = policy.critic1.forward(tp, maps, sc, a, false);
    Val loss = ops::mul_scalar(tp, ops::mean_all(tp, q), -1.0);
    diag.actor_loss = tp.value(loss)[0];
    if (!std::isfinite(diag.actor_loss))
      throw std::runtime_error("td3_update: non-finite actor loss");
    tp.backward(loss);
    policy.adam_actor.step(policy.actor.params());
    soft_update(policy.actor_tgt.params(), policy.actor.params(), cfg.tau);
    soft_update(policy.critic1_tgt.params(), policy.critic1.params(), cfg.tau);
    soft_update(policy.critic2_tgt.params(), policy.critic2.params(), cfg.tau);
    diag.actor_updated = true;
  }
  return diag;
}

}  // namespace socnav
