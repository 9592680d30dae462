#include "socnav/world_model.hpp"

#include <algorithm>
#include <cmath>

#include "socnav/replay.hpp"

namespace socnav {

ModelInputs make_model_inputs(const TransitionBatch& batch) {
  ModelInputs in;
  in.maps = batch.obs_maps;
  in.affines = batch.affines;
  const int n = batch.n;
  in.scalars6 = Tensor({n, 6});
  for (int i = 0; i < n; ++i) {
    const float* os = batch.obs_scalars.data() + static_cast<int64_t>(i) * 4;
    const float* act = batch.actions.data() + static_cast<int64_t>(i) * 2;
    float* dst = in.scalars6.data() + static_cast<int64_t>(i) * 6;
    dst[0] = os[0];
    dst[1] = os[1];
    dst[2] = os[2];
    dst[3] = os[3];
    dst[4] = act[0];
    dst[5] = act[1];
  }
  return in;
}

Prediction predict(TransitionModel& model, const Observation& obs,
                   const Action& action, const NormConfig& norm, double dt) {
  const GridConfig& grid = model.grid();
  NormalizedObs no = normalize_observation(obs, norm);
  Tensor maps({1, kStackDepth, grid.height, grid.width});
  std::copy(no.maps.begin(), no.maps.end(), maps.data());
  Tensor scalars({1, 6});
  scalars[0] = no.goal_dist;
  scalars[1] = no.goal_bearing;
  scalars[2] = no.v;
  scalars[3] = no.w;
  scalars[4] = static_cast<float>((action.v - kVMin) / (kVMax - kVMin));
  scalars[5] = static_cast<float>((action.w - kWMin) / (kWMax - kWMin));
  std::vector<CellAffine> affines{
      ego_motion_affine(step_agent(Pose2{}, action, dt), grid)};

  TapeT<float> tape;
  ModelOutput<float> out = model.forward(tape, maps, scalars, affines, false);
  Prediction pred;
  pred.next_map = OccupancyGrid(grid);
  const Tensor& m = tape.value(out.map);
  std::copy(m.data(), m.data() + m.size(), pred.next_map.cells.begin());
  pred.reward = static_cast<double>(tape.value(out.reward)[0]);
  return pred;
}

Observation advance_virtual(const Observation& obs, const Action& action,
                            const OccupancyGrid& predicted_map,
                            const GridConfig& grid, double dt) {
  Observation next;
  Pose2 ego = step_agent(Pose2{}, action, dt);
  for (int i = 0; i + 1 < kStackDepth; ++i)
    next.maps.frames[i] = affine_warp(obs.maps.frames[i + 1], ego, grid);
  next.maps.frames[kStackDepth - 1] = predicted_map;
  next.goal_dist = obs.goal_dist;
  next.goal_bearing = obs.goal_bearing;
  next.vel = obs.vel;
  propagate_proprioception(&next.goal_dist, &next.goal_bearing, &next.vel, action, dt);
  return next;
}

std::vector<VirtualRollout> rollout_model(ModelEnsemble& ensemble,
                                          const std::vector<Observation>& starts,
                                          const BatchActionFn& policy,
                                          const RolloutParams& params,
                                          const NormConfig& norm, Rng& rng) {
  const size_t m = starts.size();
  std::vector<VirtualRollout> out(m);
  std::vector<Observation> state(starts);
  std::vector<bool> alive(m, true);
  for (size_t i = 0; i < m; ++i) out[i].start = starts[i];

  const int b = static_cast<int>(ensemble.members.size());
  const GridConfig& grid = ensemble.members[0].grid();
  const int hw = grid.cells();

  for (int step = 0; step < params.horizon; ++step) {
    std::vector<int> live;
    for (size_t i = 0; i < m; ++i)
      if (alive[i]) live.push_back(static_cast<int>(i));
    if (live.empty()) break;
    std::vector<Observation> live_states;
    live_states.reserve(live.size());
    for (int i : live) live_states.push_back(state[i]);
    std::vector<Action> live_actions = policy(live_states, rng);

    // Actions in rollout order, then one member draw per live rollout.
    std::vector<Action> actions(m);
    std::vector<std::vector<int>> by_member(b);
    for (size_t k = 0; k < live.size(); ++k) {
      const int i = live[k];
      actions[i] = live_actions[k];
      int mb = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(b)));
      by_member[mb].push_back(i);
    }

    for (int mb = 0; mb < b; ++mb) {
      const auto& idx = by_member[mb];
      if (idx.empty()) continue;
      const int n = static_cast<int>(idx.size());
      Tensor maps({n, kStackDepth, grid.height, grid.width});
      Tensor scalars({n, 6});
      std::vector<CellAffine> affines(n);
      for (int k = 0; k < n; ++k) {
        const Observation& o = state[idx[k]];
        NormalizedObs no = normalize_observation(o, norm);
        std::copy(no.maps.begin(), no.maps.end(),
                  maps.data() + static_cast<int64_t>(k) * kStackDepth * hw);
        float* sc = scalars.data() + static_cast<int64_t>(k) * 6;
        sc[0] = no.goal_dist;
        sc[1] = no.goal_bearing;
        sc[2] = no.v;
        sc[3] = no.w;
        const Action& a = actions[idx[k]];
        sc[4] = static_cast<float>((a.v - kVMin) / (kVMax - kVMin));
        sc[5] = static_cast<float>((a.w - kWMin) / (kWMax - kWMin));
        affines[k] = ego_motion_affine(step_agent(Pose2{}, a, params.dt), grid);
      }
      TapeT<float> tape;
      ModelOutput<float> res =
          ensemble.members[mb].forward(tape, maps, scalars, affines, false);
      const Tensor& pm = tape.value(res.map);
      const Tensor& pr = tape.value(res.reward);
      for (int k = 0; k < n; ++k) {
        const int i = idx[k];
        VirtualStep vs;
        vs.action = actions[i];
        vs.reward = pr[static_cast<int64_t>(k)];
        vs.predicted_map = OccupancyGrid(grid);
        std::copy(pm.data() + static_cast<int64_t>(k) * hw,
                  pm.data() + static_cast<int64_t>(k + 1) * hw,
                  vs.predicted_map.cells.begin());
        if (vs.reward >= params.arrive_reward_threshold) {
          vs.done = true;
          vs.kind = OutcomeKind::arrived;
        } else if (vs.reward <= params.collide_reward_threshold) {
          vs.done = true;
          vs.kind = OutcomeKind::collided;
        }
        state[i] = advance_virtual(state[i], vs.action, vs.predicted_map, grid, params.dt);
        if (vs.done) alive[i] = false;
        out[i].steps.push_back(std::move(vs));
      }
    }
  }
  return out;
}

ModelTrainReport train_model(ModelEnsemble& ensemble, const EnvReplay& buffer,
                             const GridConfig& grid, const NormConfig& norm,
                             double dt, int steps, Rng& rng) {
  const ModelConfig& cfg = ensemble.members[0].config();
  const int64_t total = buffer.size();
  if (total < cfg.batch)
    throw std::runtime_error("train_model: buffer smaller than batch size");

  const int64_t val_size =
      std::max<int64_t>(1, static_cast<int64_t>(std::floor(total * cfg.val_fraction)));
  const int64_t train_size = std::max<int64_t>(1, total - val_size);

  ModelTrainReport report;
  for (size_t b = 0; b < ensemble.members.size(); ++b) {
    auto& model = ensemble.members[b];
    Rng member_rng = rng.fork(static_cast<uint64_t>(b) + 1);

    // With-replacement bootstrap resample over the training slice.
    std::vector<int64_t> resample(train_size);
    for (int64_t i = 0; i < train_size; ++i)
      resample[i] = static_cast<int64_t>(
          member_rng.uniform_index(static_cast<uint64_t>(train_size)));

    AdamT<float> adam(AdamConfig{cfg.lr});
    adam.attach(model.params());
    double last_loss = 0.0;
    for (int step = 0; step < steps; ++step) {
      std::vector<int64_t> ids(cfg.batch);
      for (int i = 0; i < cfg.batch; ++i)
        ids[i] = resample[member_rng.uniform_index(static_cast<uint64_t>(train_size))];
      TransitionBatch batch = buffer.make_batch(ids, grid, norm, dt);
      ModelInputs in = make_model_inputs(batch);
      TapeT<float> tape;
      Val loss = model_loss(tape, model, in.maps, in.scalars6, in.affines,
                            batch.next_map, batch.rewards, true);
      last_loss = static_cast<double>(tape.value(loss)[0]);
      if (!std::isfinite(last_loss))
        throw std::runtime_error("train_model: non-finite loss");
      tape.backward(loss);
      adam.step(model.params());
    }
    report.final_loss.push_back(last_loss);

    // Held-out pixel MSE on the validation slice.
    const int64_t n_eval = std::min<int64_t>(val_size, 256);
    double se = 0.0;
    int64_t cells = 0;
    for (int64_t start = 0; start < n_eval; start += cfg.batch) {
      const int n = static_cast<int>(std::min<int64_t>(cfg.batch, n_eval - start));
      std::vector<int64_t> ids(n);
      for (int i = 0; i < n; ++i) ids[i] = train_size + start + i;
      TransitionBatch batch = buffer.make_batch(ids, grid, norm, dt);
      ModelInputs in = make_model_inputs(batch);
      TapeT<float> tape;
      ModelOutput<float> outp =
          model.forward(tape, in.maps, in.scalars6, in.affines, false);
      const Tensor& pm = tape.value(outp.map);
      for (int64_t i = 0; i < pm.size(); ++i) {
        const double d = static_cast<double>(pm[i]) - batch.next_map[i];
        se += d * d;
      }
      cells += pm.size();
    }
    report.val_mse.push_back(se / static_cast<double>(cells));
  }
  return report;
}

}  // namespace socnav
