#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "socnav/policy.hpp"
#include "socnav/replay.hpp"

using namespace socnav;

namespace {

GridConfig tiny_grid() {
  GridConfig g;
  g.width = 16;
  g.height = 16;
  g.resolution = 0.2;
  return g;
}

PolicyConfig tiny_policy_cfg() {
  PolicyConfig cfg;
  cfg.conv1 = 2;
  cfg.conv2 = 3;
  cfg.conv3 = 4;
  cfg.fc_embed = 16;
  cfg.scalar_embed = 8;
  cfg.action_embed = 8;
  cfg.head_hidden = 12;
  cfg.batch = 8;
  return cfg;
}

Observation random_observation(const GridConfig& grid, Rng& rng) {
  Observation obs;
  for (auto& f : obs.maps.frames) {
    f = OccupancyGrid(grid);
    for (auto& v : f.cells) v = rng.uniform01() < 0.15 ? 1.0f : 0.0f;
  }
  obs.goal_dist = rng.uniform(0.2, 9.0);
  obs.goal_bearing = rng.uniform(-3.1, 3.1);
  obs.vel = Action(rng.uniform(0, 1), rng.uniform(-1.5, 1.5));
  return obs;
}

TransitionBatch random_batch(int n, const GridConfig& grid, Rng& rng) {
  BatchBuilder builder(n, grid, NormConfig{}, 0.1);
  for (int i = 0; i < n; ++i) {
    TransitionSample s;
    s.obs = random_observation(grid, rng);
    s.next_obs = random_observation(grid, rng);
    s.action = Action(rng.uniform(0, 1), rng.uniform(-1.5, 1.5));
    s.reward = rng.uniform(-1, 1);
    s.done = rng.uniform01() < 0.2;
    builder.set_row(i, s);
  }
  return builder.take();
}

// Censored-normal moments for clamp(mu + sigma Z, 0, 1).
double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }
double Phi(double z) { return 0.5 * (1.0 + std::erf(z / std::sqrt(2.0))); }
double censored_variance(double mu, double sigma) {
  const double a = (0.0 - mu) / sigma, b = (1.0 - mu) / sigma;
  const double pa = Phi(a), pb = Phi(b);
  const double mean = mu * (pb - pa) + sigma * (phi(a) - phi(b)) + (1.0 - pb);
  const double second = (1.0 - pb) + (mu * mu + sigma * sigma) * (pb - pa) +
                        2.0 * mu * sigma * (phi(a) - phi(b)) +
                        sigma * sigma * (a * phi(a) - b * phi(b));
  return second - mean * mean;
}

}  // namespace

TEST_CASE("act stays in bounds and is deterministic without noise") {
  GridConfig grid = tiny_grid();
  ActorCritic policy(tiny_policy_cfg(), grid, 17);
  NormConfig norm;
  Rng rng(18);
  for (int t = 0; t < 10; ++t) {
    Observation obs = random_observation(grid, rng);
    Action a = act(policy, obs, norm, 0.0, rng);
    CHECK(a.v >= 0.0);
    CHECK(a.v <= 1.0);
    CHECK(a.w >= -1.5);
    CHECK(a.w <= 1.5);
    Action b = act(policy, obs, norm, 0.0, rng);
    CHECK(a.v == b.v);
    CHECK(a.w == b.w);
    Action noisy = act(policy, obs, norm, 0.7, rng);
    CHECK(noisy.v >= 0.0);
    CHECK(noisy.v <= 1.0);
    CHECK(noisy.w >= -1.5);
    CHECK(noisy.w <= 1.5);
  }
}

TEST_CASE("bounds hold for extreme parameter values by construction") {
  GridConfig grid = tiny_grid();
  ActorCritic policy(tiny_policy_cfg(), grid, 19);
  for (auto& e : policy.actor.params().entries())
    for (int64_t i = 0; i < e.value.size(); ++i) e.value[i] = 1000.0f;
  NormConfig norm;
  Rng rng(20);
  Observation obs = random_observation(grid, rng);
  Action a = act(policy, obs, norm, 0.0, rng);
  CHECK(a.v >= 0.0);
  CHECK(a.v <= 1.0);
  CHECK(a.w >= -1.5);
  CHECK(a.w <= 1.5);
}

TEST_CASE("exploration noise matches clipped-normal moments") {
  GridConfig grid = tiny_grid();
  ActorCritic policy(tiny_policy_cfg(), grid, 23);
  NormConfig norm;
  Rng rng(24);
  Observation obs = random_observation(grid, rng);

  const double sigma = 0.5;
  Action det = act(policy, obs, norm, 0.0, rng);
  const double mu_v = det.v;  // normalized v equals physical v

  const int n = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    Action a = act(policy, obs, norm, sigma, rng);
    sum += a.v;
    sum2 += a.v * a.v;
  }
  const double var = sum2 / n - (sum / n) * (sum / n);
  const double expect = censored_variance(mu_v, sigma);
  CHECK(var == doctest::Approx(expect).epsilon(0.2));
}

TEST_CASE("td3 target arithmetic") {
  CHECK(td3_target(1.0, 0.99, false, 2.0, 1.5) == doctest::Approx(2.485));
  CHECK(td3_target(3.25, 0.99, true, 2.0, 1.5) == 3.25);
  CHECK(td3_target(-1.0, 0.5, false, -2.0, 5.0) == doctest::Approx(-2.0));
}

TEST_CASE("td3_update mechanics") {
  GridConfig grid = tiny_grid();
  PolicyConfig pcfg = tiny_policy_cfg();
  pcfg.policy_delay = 2;
  pcfg.batch = 6;
  ActorCritic policy(pcfg, grid, 29);
  Rng rng(30);
  TransitionBatch batch = random_batch(6, grid, rng);

  const double actor0 = policy.actor.params().checksum();
  const double critic0 = policy.critic1.params().checksum();

  SUBCASE("critics move every update, the actor only on schedule") {
    Rng urng(31);
    TD3Diagnostics d1 = td3_update(policy, batch, urng);
    CHECK(!d1.actor_updated);
    CHECK(policy.actor.params().checksum() == actor0);
    CHECK(policy.critic1.params().checksum() != critic0);

    TD3Diagnostics d2 = td3_update(policy, batch, urng);
    CHECK(d2.actor_updated);
    CHECK(policy.actor.params().checksum() != actor0);
  }

  SUBCASE("targets blend exactly with rate tau on actor updates") {
    Rng urng(33);
    td3_update(policy, batch, urng);  // critic-only step: targets frozen
    std::vector<float> tgt_before;
    for (auto& e : policy.critic1_tgt.params().entries())
      for (int64_t i = 0; i < e.value.size(); ++i) tgt_before.push_back(e.value[i]);

    td3_update(policy, batch, urng);  // actor step: targets blended
    size_t k = 0;
    size_t idx = 0;
    for (auto& e : policy.critic1_tgt.params().entries()) {
      auto& online = policy.critic1.params().entries()[idx++];
      for (int64_t i = 0; i < e.value.size(); ++i, ++k) {
        float expect = static_cast<float>((1.0 - pcfg.tau) * tgt_before[k] +
                                          pcfg.tau * online.value[i]);
        CHECK(e.value[i] == expect);
      }
    }
  }

  SUBCASE("done=1 rows regress to the raw reward") {
    // With all-done rows the target is independent of the target nets.
    for (int i = 0; i < batch.n; ++i) batch.dones[i] = 1.0f;
    Rng urng(35);
    TD3Diagnostics d = td3_update(policy, batch, urng);
    CHECK(std::isfinite(d.critic_loss));
  }
}

TEST_CASE("composed critic and actor losses pass 64-bit finite differences") {
  GridConfig grid;
  grid.width = 8;
  grid.height = 8;
  grid.resolution = 0.2;
  PolicyConfig pcfg = tiny_policy_cfg();
  pcfg.conv1 = 2;
  pcfg.conv2 = 2;
  pcfg.conv3 = 2;
  pcfg.fc_embed = 6;
  pcfg.scalar_embed = 4;
  pcfg.action_embed = 4;
  pcfg.head_hidden = 6;

  PolicyNetT<double> actor(pcfg, grid, false, 41);
  PolicyNetT<double> critic(pcfg, grid, true, 42);

  Rng rng(43);
  // Nudge every parameter off zero so no activation sits exactly on a kink.
  for (auto* net : {&actor, &critic})
    for (auto& e : net->params().entries())
      for (int64_t i = 0; i < e.value.size(); ++i)
        e.value[i] += rng.uniform(-0.05, 0.05);
  TensorT<double> maps({2, kStackDepth, 8, 8});
  for (int64_t i = 0; i < maps.size(); ++i)
    maps[i] = rng.uniform01() < 0.2 ? 1.0 : 0.0;
  TensorT<double> scalars({2, 4});
  for (int64_t i = 0; i < scalars.size(); ++i) scalars[i] = rng.uniform01();
  TensorT<double> actions({2, 2}, {0.3, 0.7, 0.9, 0.1});
  TensorT<double> y({2, 1}, {0.5, -0.25});

  auto fd_check = [&](ParamSetT<double>& params,
                      const std::function<Val(TapeT<double>&)>& build) {
    params.zero_grads();
    {
      TapeT<double> tape;
      Val loss = build(tape);
      tape.backward(loss);
    }
    auto eval = [&]() {
      TapeT<double> tape;
      return tape.value(build(tape))[0];
    };
    const double eps = 1e-5;  // kink-safe step for composed graphs
    int failures = 0;
    Rng pick(44);
    for (auto& e : params.entries()) {
      const int samples = static_cast<int>(std::min<int64_t>(e.value.size(), 5));
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
        if (std::abs(fd - an) / denom >= 1e-3 && std::abs(fd - an) > 1e-8) ++failures;
      }
    }
    return failures;
  };

  SUBCASE("critic regression loss") {
    int failures = fd_check(critic.params(), [&](TapeT<double>& tp) {
      Val q = critic.forward(tp, tp.input(maps), tp.input(scalars),
                             tp.input(actions), true);
      return ops::mse(tp, q, tp.input(y));
    });
    CHECK(failures == 0);
  }

  SUBCASE("actor ascent loss through a frozen critic") {
    int failures = fd_check(actor.params(), [&](TapeT<double>& tp) {
      Val m = tp.input(maps);
      Val s = tp.input(scalars);
      Val a = actor.forward(tp, m, s, true);
      Val q = critic.forward(tp, m, s, a, false);
      return ops::mul_scalar(tp, ops::mean_all(tp, q), -1.0);
    });
    CHECK(failures == 0);
  }
}

TEST_CASE("batched and single-shot actor inference agree") {
  GridConfig grid = tiny_grid();
  ActorCritic policy(tiny_policy_cfg(), grid, 51);
  NormConfig norm;
  Rng rng(52);
  std::vector<Observation> obs;
  for (int i = 0; i < 4; ++i) obs.push_back(random_observation(grid, rng));
  Rng r1(7), r2(7);
  auto batch = act_batch(policy, obs, norm, 0.0, r1);
  for (int i = 0; i < 4; ++i) {
    Action single = act(policy, obs[i], norm, 0.0, r2);
    CHECK(batch[i].v == doctest::Approx(single.v).epsilon(1e-6));
    CHECK(batch[i].w == doctest::Approx(single.w).epsilon(1e-6));
  }
}
