#pragma once

#include <functional>
#include <vector>

#include "socnav/autodiff.hpp"
#include "socnav/config.hpp"
#include "socnav/obsmap.hpp"
#include "socnav/optim.hpp"

namespace socnav {

// Model-facing view of a batch of transitions. Observations arrive already
// normalized; rewards are raw; affines encode the per-sample ego motion
// implied by the physical action.
struct TransitionBatch {
  int n = 0, height = 0, width = 0;
  Tensor obs_maps;          // [N, 10, H, W]
  Tensor obs_scalars;       // [N, 4] goal_dist, bearing, v, w (normalized)
  Tensor actions;           // [N, 2] normalized
  std::vector<CellAffine> affines;
  Tensor rewards;           // [N, 1]
  Tensor dones;             // [N, 1]
  Tensor next_map;          // [N, 1, H, W] true next frame (model target)
  Tensor next_obs_maps;     // [N, 10, H, W]
  Tensor next_obs_scalars;  // [N, 4]
};

template <typename T>
struct ModelOutput {
  Val map;     // [N, 1, H, W], values in (0,1), already ego-warped
  Val reward;  // [N, 1]
};

// Deep transition model: motion/content encoders, recurrent aggregation over
// the nine adjacent-frame differences, fused decoding to the next obstacle
// map, ego-motion warp, and a reward head on the fused features.
template <typename T>
class TransitionModelT {
 public:
  TransitionModelT(const ModelConfig& cfg, const GridConfig& grid, uint64_t seed);

  // maps [N,10,H,W], scalars6 [N,6] = (goal,bearing,v,w,act_v,act_w).
  ModelOutput<T> forward(TapeT<T>& tp, const TensorT<T>& maps,
                         const TensorT<T>& scalars6,
                         const std::vector<CellAffine>& affines, bool train);

  ParamSetT<T>& params() { return params_; }
  const ParamSetT<T>& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  const GridConfig& grid() const { return grid_; }

  // Debug switch: route the content frame straight to the warp, bypassing the
  // learned decoder. Isolates the warp path in tests.
  bool copy_decoder = false;

 private:
  ModelConfig cfg_;
  GridConfig grid_;
  ParamSetT<T> params_;
  int fh_ = 0, fw_ = 0;  // encoder output spatial size
  int rh_ = 0, rw_ = 0;  // reward-head conv output spatial size
};

using TransitionModel = TransitionModelT<float>;

// Bootstrap ensemble: same architecture, independent seeds and resamples.
template <typename T>
struct ModelEnsembleT {
  std::vector<TransitionModelT<T>> members;

  ModelEnsembleT(const ModelConfig& cfg, const GridConfig& grid, uint64_t seed) {
    int b = std::max(1, cfg.ensemble);
    members.reserve(b);
    for (int i = 0; i < b; ++i)
      members.emplace_back(cfg, grid, seed * 1000003ull + static_cast<uint64_t>(i));
  }
};

using ModelEnsemble = ModelEnsembleT<float>;

// Reconstruction + reward loss over a batch (tape-building).
template <typename T>
Val model_loss(TapeT<T>& tp, TransitionModelT<T>& model, const TensorT<T>& maps,
               const TensorT<T>& scalars6, const std::vector<CellAffine>& affines,
               const TensorT<T>& target_map, const TensorT<T>& target_reward,
               bool train) {
  ModelOutput<T> out = model.forward(tp, maps, scalars6, affines, train);
  Val target_m = tp.input(target_map);
  Val target_r = tp.input(target_reward);
  Val pixel = ops::mse(tp, out.map, target_m);
  Val rew = ops::mse(tp, out.reward, target_r);
  return ops::add(tp, pixel, ops::mul_scalar(tp, rew, model.config().lambda_r));
}

// Float-side helpers --------------------------------------------------

// Assembles the model inputs for a batch.
struct ModelInputs {
  Tensor maps;      // [N,10,H,W]
  Tensor scalars6;  // [N,6]
  std::vector<CellAffine> affines;
};
ModelInputs make_model_inputs(const TransitionBatch& batch);

// Single-observation prediction (inference path).
struct Prediction {
  OccupancyGrid next_map;
  double reward = 0.0;
};
Prediction predict(TransitionModel& model, const Observation& obs,
                   const Action& action, const NormConfig& norm, double dt);

// Pushes a predicted frame into the stack (older frames re-expressed in the
// new pose via the ego warp) and propagates proprioception analytically.
Observation advance_virtual(const Observation& obs, const Action& action,
                            const OccupancyGrid& predicted_map,
                            const GridConfig& grid, double dt);

struct ModelTrainReport {
  std::vector<double> val_mse;       // per member, pixel term only
  std::vector<double> final_loss;    // per member, last training batch
};

// One recorded step of a virtual rollout.
struct VirtualStep {
  Action action;
  float reward = 0.0f;
  bool done = false;
  OutcomeKind kind = OutcomeKind::running;
  OccupancyGrid predicted_map;
};

struct VirtualRollout {
  Observation start;
  std::vector<VirtualStep> steps;
};

struct RolloutParams {
  int horizon = 5;
  double dt = 0.1;
  double arrive_reward_threshold = 16.0;    // 0.8 * r_arrival
  double collide_reward_threshold = -16.0;  // 0.8 * r_collision
};

// Batched action source: one call per rollout step for all live rollouts.
using BatchActionFn =
    std::function<std::vector<Action>(const std::vector<Observation>&, Rng&)>;

// Rolls the ensemble forward from each start state under the given policy.
// Each step of each rollout uses a uniformly drawn ensemble member.
std::vector<VirtualRollout> rollout_model(ModelEnsemble& ensemble,
                                          const std::vector<Observation>& starts,
                                          const BatchActionFn& policy,
                                          const RolloutParams& params,
                                          const NormConfig& norm, Rng& rng);

class EnvReplay;  // replay.hpp

// Trains every member on its own with-replacement resample of the buffer's
// training slice; reports held-out pixel MSE per member.
ModelTrainReport train_model(ModelEnsemble& ensemble, const EnvReplay& buffer,
                             const GridConfig& grid, const NormConfig& norm,
                             double dt, int steps, Rng& rng);

// ----------------------------------------------------------------------
// Template implementation
// ----------------------------------------------------------------------

namespace detail {

inline int conv_out(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

template <typename T>
TensorT<T> to_tensor(const Tensor& src) {
  TensorT<T> out(src.shape());
  for (int64_t i = 0; i < src.size(); ++i) out[i] = static_cast<T>(src[i]);
  return out;
}

template <>
inline TensorT<float> to_tensor<float>(const Tensor& src) {
  return src;
}

// Per-forward cache of parameter nodes: each entry enters the tape once.
template <typename T>
class ParamNodes {
 public:
  ParamNodes(TapeT<T>& tp, ParamSetT<T>& params, bool train)
      : tp_(tp), params_(params), train_(train) {}

  Val operator()(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    auto& entry = params_.at(name);
    Val v = train_ ? tp_.param(entry) : tp_.input(entry.value);
    cache_.emplace(name, v);
    return v;
  }

 private:
  TapeT<T>& tp_;
  ParamSetT<T>& params_;
  bool train_;
  std::unordered_map<std::string, Val> cache_;
};

}  // namespace detail

template <typename T>
TransitionModelT<T>::TransitionModelT(const ModelConfig& cfg, const GridConfig& grid,
                                      uint64_t seed)
    : cfg_(cfg), grid_(grid) {
  const int h1 = detail::conv_out(grid.height, 3, 2, 1);
  const int w1 = detail::conv_out(grid.width, 3, 2, 1);
  fh_ = detail::conv_out(h1, 3, 2, 1);
  fw_ = detail::conv_out(w1, 3, 2, 1);
  rh_ = detail::conv_out(fh_, 3, 2, 1);
  rw_ = detail::conv_out(fw_, 3, 2, 1);
  if ((fh_ - 1) * 2 - 2 + 4 != h1 || (h1 - 1) * 2 - 2 + 4 != grid.height)
    throw std::invalid_argument("transition model: grid size must be divisible by 4");

  Rng rng(seed);
  rng = rng.fork("model-init");
  const int c1 = cfg.enc_ch1, c2 = cfg.enc_ch2, ch = cfg.lstm_ch;
  const int eh = cfg.embed_hidden, ce = cfg.embed_spatial;
  const int cf = cfg.fuse_ch, dc = cfg.dec_ch;
  const int rc = cfg.reward_conv, rh = cfg.reward_hidden;

  auto conv_param = [&](const std::string& name, std::vector<int> shape, int fan_in) {
    auto& e = params_.add(name, shape);
    init_uniform_fanin(e.value, fan_in, rng);
  };
  auto bias_param = [&](const std::string& name, int n) { params_.add(name, {n}); };

  conv_param("menc1_w", {c1, 1, 3, 3}, 9);
  bias_param("menc1_b", c1);
  conv_param("menc2_w", {c2, c1, 3, 3}, c1 * 9);
  bias_param("menc2_b", c2);
  conv_param("lstm_w", {4 * ch, c2 + ch, 3, 3}, (c2 + ch) * 9);
  {
    auto& e = params_.add("lstm_b", {4 * ch});
    for (int i = ch; i < 2 * ch; ++i) e.value[i] = T(1);  // forget gate bias
  }
  conv_param("cenc1_w", {c1, 1, 3, 3}, 9);
  bias_param("cenc1_b", c1);
  conv_param("cenc2_w", {c2, c1, 3, 3}, c1 * 9);
  bias_param("cenc2_b", c2);
  conv_param("emb1_w", {6, eh}, 6);
  bias_param("emb1_b", eh);
  conv_param("emb2_w", {eh, ce * fh_ * fw_}, eh);
  bias_param("emb2_b", ce * fh_ * fw_);
  conv_param("fuse_w", {cf, ch + c2 + ce, 3, 3}, (ch + c2 + ce) * 9);
  bias_param("fuse_b", cf);
  // Decoder with content-encoder skip connections at each scale.
  conv_param("dec1_w", {cf, dc, 4, 4}, cf * 16);
  bias_param("dec1_b", dc);
  conv_param("dec2_w", {dc + c1, dc, 4, 4}, (dc + c1) * 16);
  bias_param("dec2_b", dc);
  conv_param("out_w", {1, dc + 1, 1, 1}, dc + 1);
  {
    // Start near the empty-map prior so sparse occupancy does not drag the
    // shared weights into saturation.
    auto& e = params_.add("out_b", {1});
    e.value[0] = T(-2.5);
  }
  conv_param("rconv_w", {rc, cf, 3, 3}, cf * 9);
  bias_param("rconv_b", rc);
  conv_param("rfc1_w", {rc * rh_ * rw_ + 6, rh}, rc * rh_ * rw_ + 6);
  bias_param("rfc1_b", rh);
  conv_param("rfc2_w", {rh, 1}, rh);
  bias_param("rfc2_b", 1);
}

template <typename T>
ModelOutput<T> TransitionModelT<T>::forward(TapeT<T>& tp, const TensorT<T>& maps,
                                            const TensorT<T>& scalars6,
                                            const std::vector<CellAffine>& affines,
                                            bool train) {
  if (maps.ndim() != 4 || maps.dim(1) != kStackDepth || maps.dim(2) != grid_.height ||
      maps.dim(3) != grid_.width)
    throw std::invalid_argument("model forward: bad maps shape " + maps.shape_str());
  if (scalars6.ndim() != 2 || scalars6.dim(1) != 6 || scalars6.dim(0) != maps.dim(0))
    throw std::invalid_argument("model forward: bad scalars shape " +
                                scalars6.shape_str());
  const int n = maps.dim(0), hh = grid_.height, ww = grid_.width;
  const int64_t hw = static_cast<int64_t>(hh) * ww;
  detail::ParamNodes<T> P(tp, params_, train);

  // Motion/content decomposition of the input stack (host-side: inputs are
  // constants on the tape).
  std::vector<Val> diffs;
  diffs.reserve(kStackDepth - 1);
  for (int s = 0; s + 1 < kStackDepth; ++s) {
    TensorT<T> d({n, 1, hh, ww});
    for (int i = 0; i < n; ++i) {
      const T* a = maps.data() + (static_cast<int64_t>(i) * kStackDepth + s) * hw;
      const T* b = maps.data() + (static_cast<int64_t>(i) * kStackDepth + s + 1) * hw;
      T* dst = d.data() + static_cast<int64_t>(i) * hw;
      for (int64_t k = 0; k < hw; ++k) dst[k] = b[k] - a[k];
    }
    diffs.push_back(tp.input(std::move(d)));
  }
  TensorT<T> content({n, 1, hh, ww});
  for (int i = 0; i < n; ++i) {
    const T* src =
        maps.data() + (static_cast<int64_t>(i) * kStackDepth + kStackDepth - 1) * hw;
    T* dst = content.data() + static_cast<int64_t>(i) * hw;
    for (int64_t k = 0; k < hw; ++k) dst[k] = src[k];
  }
  Val content_in = tp.input(std::move(content));
  Val scalars = tp.input(scalars6);

  // Motion encoder shared across the nine difference frames, aggregated by
  // the recurrent cell.
  ops::RecurrentState<T> state{
      tp.input(TensorT<T>({n, cfg_.lstm_ch, fh_, fw_})),
      tp.input(TensorT<T>({n, cfg_.lstm_ch, fh_, fw_}))};
  for (Val d : diffs) {
    Val m1 = ops::leaky_relu(tp, ops::conv2d(tp, d, P("menc1_w"), P("menc1_b"), 2, 2, 1, 1));
    Val m2 = ops::leaky_relu(tp, ops::conv2d(tp, m1, P("menc2_w"), P("menc2_b"), 2, 2, 1, 1));
    state = ops::conv_recurrent_step(tp, m2, state, P("lstm_w"), P("lstm_b"), 1);
  }

  Val ce1 = ops::leaky_relu(tp, ops::conv2d(tp, content_in, P("cenc1_w"), P("cenc1_b"), 2, 2, 1, 1));
  Val ce2 = ops::leaky_relu(tp, ops::conv2d(tp, ce1, P("cenc2_w"), P("cenc2_b"), 2, 2, 1, 1));

  Val e1 = ops::leaky_relu(tp, ops::dense(tp, scalars, P("emb1_w"), P("emb1_b")));
  Val e2 = ops::leaky_relu(tp, ops::dense(tp, e1, P("emb2_w"), P("emb2_b")));
  Val espat = ops::reshape(tp, e2, {n, cfg_.embed_spatial, fh_, fw_});

  Val fuse_in = ops::concat_axis1(tp, {state.h, ce2, espat});
  Val fused = ops::leaky_relu(tp, ops::conv2d(tp, fuse_in, P("fuse_w"), P("fuse_b"), 1, 1, 1, 1));

  Val map_cur;
  if (copy_decoder) {
    map_cur = content_in;
  } else {
    Val d1 = ops::leaky_relu(tp, ops::deconv2d(tp, fused, P("dec1_w"), P("dec1_b"), 2, 2, 1, 1));
    Val d1s = ops::concat_axis1(tp, {d1, ce1});
    Val d2 = ops::leaky_relu(tp, ops::deconv2d(tp, d1s, P("dec2_w"), P("dec2_b"), 2, 2, 1, 1));
    Val d2s = ops::concat_axis1(tp, {d2, content_in});
    Val logits = ops::conv2d(tp, d2s, P("out_w"), P("out_b"), 1, 1, 0, 0);
    map_cur = ops::sigmoid(tp, logits);
  }
  Val map_out = ops::bilinear_warp(tp, map_cur, affines);

  Val rc1 = ops::leaky_relu(tp, ops::conv2d(tp, fused, P("rconv_w"), P("rconv_b"), 2, 2, 1, 1));
  Val rflat = ops::reshape(tp, rc1, {n, cfg_.reward_conv * rh_ * rw_});
  Val rcat = ops::concat_axis1(tp, {rflat, scalars});
  Val r1 = ops::leaky_relu(tp, ops::dense(tp, rcat, P("rfc1_w"), P("rfc1_b")));
  Val reward = ops::dense(tp, r1, P("rfc2_w"), P("rfc2_b"));

  return {map_out, reward};
}

}  // namespace socnav
