#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <vector>

#include "socnav/obsmap.hpp"
#include "socnav/reward.hpp"
#include "socnav/world_model.hpp"

namespace socnav {

// A (observation, action, reward, next observation, done) tuple materialized
// on demand; buffers store compact per-episode records instead.
struct TransitionSample {
  Observation obs;
  Action action;
  double reward = 0.0;
  Observation next_obs;
  bool done = false;
  OutcomeKind kind = OutcomeKind::running;
  bool model_origin = false;
};

// One recorded tick of the main agent. The action/reward fields describe the
// step taken FROM this tick; the final tick of an episode carries none.
struct EnvTick {
  std::vector<float> ranges;  // raw scan
  Pose2 pose;
  Vec2 goal;
  Action vel;  // last commanded action before this tick
  Action action;
  float reward = 0.0f;
  bool done = false;
  OutcomeKind kind = OutcomeKind::running;
};

struct EnvEpisode {
  std::vector<EnvTick> ticks;
  int64_t n_transitions() const {
    return ticks.empty() ? 0 : static_cast<int64_t>(ticks.size()) - 1;
  }
};

// Environment replay: per-episode scan/pose storage; observations are rebuilt
// by aligning the ten newest scans, exactly as the live pipeline does.
// Eviction drops whole episodes, oldest first.
class EnvReplay {
 public:
  EnvReplay(int64_t capacity, const LidarConfig& lidar) : capacity_(capacity), lidar_(lidar) {}

  void begin_episode();
  void push_tick(EnvTick tick);  // appends to the open episode
  // Fills the action/reward fields of the newest tick in place.
  void complete_last_tick(const Action& action, float reward, bool done,
                          OutcomeKind kind);
  void end_episode();

  int64_t size() const { return total_; }
  int64_t capacity() const { return capacity_; }

  // Uniform transition ids over the current contents.
  std::vector<int64_t> sample_ids(int n, Rng& rng) const;

  Observation observation_at(int64_t id, const GridConfig& grid) const;
  TransitionSample sample_at(int64_t id, const GridConfig& grid) const;

  TransitionBatch make_batch(const std::vector<int64_t>& ids, const GridConfig& grid,
                             const NormConfig& norm, double dt) const;

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  int64_t capacity_;
  LidarConfig lidar_;
  std::deque<EnvEpisode> episodes_;
  bool open_ = false;
  int64_t total_ = 0;

  void evict();
  std::pair<const EnvEpisode*, int> locate(int64_t id) const;
};

// Model replay: virtual rollouts stored as a quantized start stack plus the
// per-step predicted frames; sampled transitions are rebuilt by re-running the
// ego-warp chain.
class ModelReplay {
 public:
  explicit ModelReplay(int64_t capacity) : capacity_(capacity) {}

  void push_rollout(const VirtualRollout& rollout);

  int64_t size() const { return total_; }
  int64_t capacity() const { return capacity_; }

  std::vector<int64_t> sample_ids(int n, Rng& rng) const;
  TransitionSample sample_at(int64_t id, const GridConfig& grid, double dt) const;

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  struct StoredStep {
    Action action;
    float reward = 0.0f;
    bool done = false;
    uint8_t kind = 0;
    std::vector<uint8_t> map;  // quantized predicted frame
  };
  struct StoredRollout {
    std::vector<uint8_t> start_frames;  // 10 * H * W
    int height = 0, width = 0;
    float goal_dist = 0.0f, goal_bearing = 0.0f;
    Action vel;
    std::vector<StoredStep> steps;
  };

  int64_t capacity_;
  std::deque<StoredRollout> rollouts_;
  int64_t total_ = 0;

  void evict();
  std::pair<const StoredRollout*, int> locate(int64_t id) const;
};

// Fills a TransitionBatch row from a materialized sample.
class BatchBuilder {
 public:
  BatchBuilder(int n, const GridConfig& grid, const NormConfig& norm, double dt);
  void set_row(int i, const TransitionSample& s);
  TransitionBatch take() { return std::move(batch_); }

 private:
  GridConfig grid_;
  NormConfig norm_;
  double dt_;
  TransitionBatch batch_;
};

std::vector<uint8_t> quantize_grid(const OccupancyGrid& g);
OccupancyGrid dequantize_grid(const std::vector<uint8_t>& q, int h, int w);

}  // namespace socnav
