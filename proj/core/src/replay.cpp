#include "socnav/replay.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace socnav {

std::vector<uint8_t> quantize_grid(const OccupancyGrid& g) {
  std::vector<uint8_t> out(g.cells.size());
  for (size_t i = 0; i < out.size(); ++i) {
    float v = std::clamp(g.cells[i], 0.0f, 1.0f);
    out[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

OccupancyGrid dequantize_grid(const std::vector<uint8_t>& q, int h, int w) {
  OccupancyGrid g(h, w);
  for (size_t i = 0; i < q.size(); ++i)
    g.cells[i] = static_cast<float>(q[i]) * (1.0f / 255.0f);
  return g;
}

// ----- EnvReplay ---------------------------------------------------------

void EnvReplay::begin_episode() {
  if (open_) end_episode();
  episodes_.emplace_back();
  open_ = true;
}

void EnvReplay::push_tick(EnvTick tick) {
  if (!open_) throw std::logic_error("env replay: push without open episode");
  auto& ep = episodes_.back();
  ep.ticks.push_back(std::move(tick));
  if (ep.ticks.size() > 1) {
    ++total_;
    evict();
  }
}

void EnvReplay::complete_last_tick(const Action& action, float reward, bool done,
                                   OutcomeKind kind) {
  if (!open_ || episodes_.back().ticks.empty())
    throw std::logic_error("env replay: no tick to complete");
  EnvTick& t = episodes_.back().ticks.back();
  t.action = action;
  t.reward = reward;
  t.done = done;
  t.kind = kind;
}

void EnvReplay::end_episode() {
  if (!open_) return;
  open_ = false;
  if (episodes_.back().ticks.size() < 2) episodes_.pop_back();
}

void EnvReplay::evict() {
  while (total_ > capacity_ && episodes_.size() > 1) {
    total_ -= episodes_.front().n_transitions();
    episodes_.pop_front();
  }
}

std::vector<int64_t> EnvReplay::sample_ids(int n, Rng& rng) const {
  std::vector<int64_t> ids(n);
  for (int i = 0; i < n; ++i)
    ids[i] = static_cast<int64_t>(rng.uniform_index(static_cast<uint64_t>(total_)));
  return ids;
}

std::pair<const EnvEpisode*, int> EnvReplay::locate(int64_t id) const {
  if (id < 0 || id >= total_) throw std::out_of_range("env replay: bad id");
  for (const auto& ep : episodes_) {
    int64_t n = ep.n_transitions();
    if (id < n) return {&ep, static_cast<int>(id)};
    id -= n;
  }
  throw std::logic_error("env replay: index accounting broken");
}

namespace {

Observation build_episode_observation(const EnvEpisode& ep, int t,
                                      const LidarConfig& lidar,
                                      const GridConfig& grid) {
  std::array<LaserScan, kStackDepth> scans;
  std::array<Pose2, kStackDepth> poses;
  for (int i = 0; i < kStackDepth; ++i) {
    int src = std::max(0, t - (kStackDepth - 1) + i);
    const EnvTick& tick = ep.ticks[src];
    scans[i].ranges = tick.ranges;
    scans[i].config = lidar;
    scans[i].pose_at_scan = tick.pose;
    poses[i] = tick.pose;
  }
  Observation obs;
  obs.maps = build_stack(scans, poses, grid);
  const EnvTick& cur = ep.ticks[t];
  Vec2 g = cur.pose.inverse_transform(cur.goal);
  obs.goal_dist = g.norm();
  obs.goal_bearing = (obs.goal_dist > 0.0) ? std::atan2(g.y, g.x) : 0.0;
  obs.vel = cur.vel;
  return obs;
}

}  // namespace

Observation EnvReplay::observation_at(int64_t id, const GridConfig& grid) const {
  auto [ep, t] = locate(id);
  return build_episode_observation(*ep, t, lidar_, grid);
}

TransitionSample EnvReplay::sample_at(int64_t id, const GridConfig& grid) const {
  auto [ep, t] = locate(id);
  TransitionSample s;
  s.obs = build_episode_observation(*ep, t, lidar_, grid);
  s.next_obs = build_episode_observation(*ep, t + 1, lidar_, grid);
  const EnvTick& tick = ep->ticks[t];
  s.action = tick.action;
  s.reward = tick.reward;
  s.done = tick.done;
  s.kind = tick.kind;
  s.model_origin = false;
  return s;
}

TransitionBatch EnvReplay::make_batch(const std::vector<int64_t>& ids,
                                      const GridConfig& grid, const NormConfig& norm,
                                      double dt) const {
  BatchBuilder builder(static_cast<int>(ids.size()), grid, norm, dt);
  for (size_t i = 0; i < ids.size(); ++i)
    builder.set_row(static_cast<int>(i), sample_at(ids[i], grid));
  return builder.take();
}

// ----- ModelReplay -------------------------------------------------------

void ModelReplay::push_rollout(const VirtualRollout& rollout) {
  if (rollout.steps.empty()) return;
  StoredRollout sr;
  const OccupancyGrid& f0 = rollout.start.maps.frames[0];
  sr.height = f0.height;
  sr.width = f0.width;
  sr.start_frames.reserve(static_cast<size_t>(kStackDepth) * f0.cells.size());
  for (const auto& frame : rollout.start.maps.frames) {
    auto q = quantize_grid(frame);
    sr.start_frames.insert(sr.start_frames.end(), q.begin(), q.end());
  }
  sr.goal_dist = static_cast<float>(rollout.start.goal_dist);
  sr.goal_bearing = static_cast<float>(rollout.start.goal_bearing);
  sr.vel = rollout.start.vel;
  for (const auto& st : rollout.steps) {
    StoredStep ss;
    ss.action = st.action;
    ss.reward = st.reward;
    ss.done = st.done;
    ss.kind = static_cast<uint8_t>(st.kind);
    ss.map = quantize_grid(st.predicted_map);
    sr.steps.push_back(std::move(ss));
  }
  total_ += static_cast<int64_t>(sr.steps.size());
  rollouts_.push_back(std::move(sr));
  evict();
}

void ModelReplay::evict() {
  while (total_ > capacity_ && rollouts_.size() > 1) {
    total_ -= static_cast<int64_t>(rollouts_.front().steps.size());
    rollouts_.pop_front();
  }
}

std::vector<int64_t> ModelReplay::sample_ids(int n, Rng& rng) const {
  std::vector<int64_t> ids(n);
  for (int i = 0; i < n; ++i)
    ids[i] = static_cast<int64_t>(rng.uniform_index(static_cast<uint64_t>(total_)));
  return ids;
}

std::pair<const ModelReplay::StoredRollout*, int> ModelReplay::locate(int64_t id) const {
  if (id < 0 || id >= total_) throw std::out_of_range("model replay: bad id");
  for (const auto& r : rollouts_) {
    int64_t n = static_cast<int64_t>(r.steps.size());
    if (id < n) return {&r, static_cast<int>(id)};
    id -= n;
  }
  throw std::logic_error("model replay: index accounting broken");
}

TransitionSample ModelReplay::sample_at(int64_t id, const GridConfig& grid,
                                        double dt) const {
  auto [r, k] = locate(id);
  const int hw = r->height * r->width;

  Observation state;
  for (int f = 0; f < kStackDepth; ++f) {
    std::vector<uint8_t> q(r->start_frames.begin() + static_cast<size_t>(f) * hw,
                           r->start_frames.begin() + static_cast<size_t>(f + 1) * hw);
    state.maps.frames[f] = dequantize_grid(q, r->height, r->width);
  }
  state.goal_dist = r->goal_dist;
  state.goal_bearing = r->goal_bearing;
  state.vel = r->vel;

  for (int i = 0; i < k; ++i) {
    const StoredStep& st = r->steps[i];
    state = advance_virtual(state, st.action,
                            dequantize_grid(st.map, r->height, r->width), grid, dt);
  }
  const StoredStep& st = r->steps[k];
  TransitionSample s;
  s.obs = state;
  s.action = st.action;
  s.reward = st.reward;
  s.done = st.done;
  s.kind = static_cast<OutcomeKind>(st.kind);
  s.model_origin = true;
  s.next_obs = advance_virtual(state, st.action,
                               dequantize_grid(st.map, r->height, r->width), grid, dt);
  return s;
}

// ----- BatchBuilder ------------------------------------------------------

BatchBuilder::BatchBuilder(int n, const GridConfig& grid, const NormConfig& norm,
                           double dt)
    : grid_(grid), norm_(norm), dt_(dt) {
  batch_.n = n;
  batch_.height = grid.height;
  batch_.width = grid.width;
  const int hw = grid.height * grid.width;
  batch_.obs_maps = Tensor({n, kStackDepth, grid.height, grid.width});
  batch_.obs_scalars = Tensor({n, 4});
  batch_.actions = Tensor({n, 2});
  batch_.affines.resize(n);
  batch_.rewards = Tensor({n, 1});
  batch_.dones = Tensor({n, 1});
  batch_.next_map = Tensor({n, 1, grid.height, grid.width});
  batch_.next_obs_maps = Tensor({n, kStackDepth, grid.height, grid.width});
  batch_.next_obs_scalars = Tensor({n, 4});
  (void)hw;
}

void BatchBuilder::set_row(int i, const TransitionSample& s) {
  const int hw = grid_.height * grid_.width;
  NormalizedObs no = normalize_observation(s.obs, norm_);
  NormalizedObs nn = normalize_observation(s.next_obs, norm_);
  std::copy(no.maps.begin(), no.maps.end(),
            batch_.obs_maps.data() + static_cast<int64_t>(i) * kStackDepth * hw);
  std::copy(nn.maps.begin(), nn.maps.end(),
            batch_.next_obs_maps.data() + static_cast<int64_t>(i) * kStackDepth * hw);
  float* os = batch_.obs_scalars.data() + static_cast<int64_t>(i) * 4;
  os[0] = no.goal_dist;
  os[1] = no.goal_bearing;
  os[2] = no.v;
  os[3] = no.w;
  float* ns = batch_.next_obs_scalars.data() + static_cast<int64_t>(i) * 4;
  ns[0] = nn.goal_dist;
  ns[1] = nn.goal_bearing;
  ns[2] = nn.v;
  ns[3] = nn.w;
  float* act = batch_.actions.data() + static_cast<int64_t>(i) * 2;
  act[0] = static_cast<float>((s.action.v - kVMin) / (kVMax - kVMin));
  act[1] = static_cast<float>((s.action.w - kWMin) / (kWMax - kWMin));
  batch_.affines[i] = ego_motion_affine(step_agent(Pose2{}, s.action, dt_), grid_);
  batch_.rewards[static_cast<int64_t>(i)] = static_cast<float>(s.reward);
  // Time-limit bootstrapping: a timeout ends the episode but does not zero
  // the state's future value.
  const bool absorbing = s.done && s.kind != OutcomeKind::timed_out;
  batch_.dones[static_cast<int64_t>(i)] = absorbing ? 1.0f : 0.0f;
  const OccupancyGrid& next_frame = s.next_obs.maps.frames[kStackDepth - 1];
  std::copy(next_frame.cells.begin(), next_frame.cells.end(),
            batch_.next_map.data() + static_cast<int64_t>(i) * hw);
}

// ----- serialization -----------------------------------------------------

namespace {

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void get(std::istream& is, T* v) {
  is.read(reinterpret_cast<char*>(v), sizeof(T));
}
void put_floats(std::ostream& os, const std::vector<float>& v) {
  put<uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(float)));
}
void get_floats(std::istream& is, std::vector<float>* v) {
  uint64_t n = 0;
  get(is, &n);
  v->resize(n);
  is.read(reinterpret_cast<char*>(v->data()),
          static_cast<std::streamsize>(n * sizeof(float)));
}
void put_bytes(std::ostream& os, const std::vector<uint8_t>& v) {
  put<uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size()));
}
void get_bytes(std::istream& is, std::vector<uint8_t>* v) {
  uint64_t n = 0;
  get(is, &n);
  v->resize(n);
  is.read(reinterpret_cast<char*>(v->data()), static_cast<std::streamsize>(n));
}

}  // namespace

void EnvReplay::save(std::ostream& os) const {
  put<uint64_t>(os, episodes_.size());
  for (const auto& ep : episodes_) {
    put<uint64_t>(os, ep.ticks.size());
    for (const auto& t : ep.ticks) {
      put_floats(os, t.ranges);
      put(os, t.pose.x);
      put(os, t.pose.y);
      put(os, t.pose.theta);
      put(os, t.goal.x);
      put(os, t.goal.y);
      put(os, t.vel.v);
      put(os, t.vel.w);
      put(os, t.action.v);
      put(os, t.action.w);
      put(os, t.reward);
      put<uint8_t>(os, t.done ? 1 : 0);
      put<uint8_t>(os, static_cast<uint8_t>(t.kind));
    }
  }
  put<uint8_t>(os, open_ ? 1 : 0);
}

void EnvReplay::load(std::istream& is) {
  episodes_.clear();
  total_ = 0;
  uint64_t n_eps = 0;
  get(is, &n_eps);
  for (uint64_t e = 0; e < n_eps; ++e) {
    EnvEpisode ep;
    uint64_t n_ticks = 0;
    get(is, &n_ticks);
    ep.ticks.resize(n_ticks);
    for (auto& t : ep.ticks) {
      get_floats(is, &t.ranges);
      get(is, &t.pose.x);
      get(is, &t.pose.y);
      get(is, &t.pose.theta);
      get(is, &t.goal.x);
      get(is, &t.goal.y);
      double v, w;
      get(is, &v);
      get(is, &w);
      t.vel = Action(v, w);
      get(is, &v);
      get(is, &w);
      t.action = Action(v, w);
      get(is, &t.reward);
      uint8_t b = 0;
      get(is, &b);
      t.done = b != 0;
      get(is, &b);
      t.kind = static_cast<OutcomeKind>(b);
    }
    total_ += ep.n_transitions();
    episodes_.push_back(std::move(ep));
  }
  uint8_t open = 0;
  get(is, &open);
  open_ = open != 0;
  if (!is) throw std::runtime_error("env replay: truncated state");
}

void ModelReplay::save(std::ostream& os) const {
  put<uint64_t>(os, rollouts_.size());
  for (const auto& r : rollouts_) {
    put(os, r.height);
    put(os, r.width);
    put_bytes(os, r.start_frames);
    put(os, r.goal_dist);
    put(os, r.goal_bearing);
    put(os, r.vel.v);
    put(os, r.vel.w);
    put<uint64_t>(os, r.steps.size());
    for (const auto& s : r.steps) {
      put(os, s.action.v);
      put(os, s.action.w);
      put(os, s.reward);
      put<uint8_t>(os, s.done ? 1 : 0);
      put(os, s.kind);
      put_bytes(os, s.map);
    }
  }
}

void ModelReplay::load(std::istream& is) {
  rollouts_.clear();
  total_ = 0;
  uint64_t n = 0;
  get(is, &n);
  for (uint64_t i = 0; i < n; ++i) {
    StoredRollout r;
    get(is, &r.height);
    get(is, &r.width);
    get_bytes(is, &r.start_frames);
    get(is, &r.goal_dist);
    get(is, &r.goal_bearing);
    double v, w;
    get(is, &v);
    get(is, &w);
    r.vel = Action(v, w);
    uint64_t n_steps = 0;
    get(is, &n_steps);
    r.steps.resize(n_steps);
    for (auto& s : r.steps) {
      get(is, &v);
      get(is, &w);
      s.action = Action(v, w);
      get(is, &s.reward);
      uint8_t b = 0;
      get(is, &b);
      s.done = b != 0;
      get(is, &s.kind);
      get_bytes(is, &s.map);
    }
    total_ += static_cast<int64_t>(r.steps.size());
    rollouts_.push_back(std::move(r));
  }
  if (!is) throw std::runtime_error("model replay: truncated state");
}

}  // namespace socnav
