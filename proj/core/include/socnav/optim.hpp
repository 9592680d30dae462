#pragma once

#include <cmath>
#include <stdexcept>

#include "socnav/autodiff.hpp"

namespace socnav {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Gradients are zeroed after every step. Throws
// std::runtime_error when a non-finite gradient is encountered so training
// loops can surface the failure.
template <typename T>
class AdamT {
 public:
  AdamT() = default;
  explicit AdamT(AdamConfig cfg) : cfg_(cfg) {}

  void attach(ParamSetT<T>& params) {
    m_.clear();
    v_.clear();
    for (auto& e : params.entries()) {
      m_.emplace_back(e.value.shape());
      v_.emplace_back(e.value.shape());
    }
    t_ = 0;
  }

  void step(ParamSetT<T>& params) { step(params, cfg_.lr); }

  void step(ParamSetT<T>& params, double lr) {
    if (m_.size() != params.size())
      throw std::logic_error("adam: attach() before step()");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t p = 0; p < params.size(); ++p) {
      auto& e = params.entries()[p];
      auto& m = m_[p];
      auto& v = v_[p];
      for (int64_t i = 0; i < e.value.size(); ++i) {
        const double g = static_cast<double>(e.grad[i]);
        if (!std::isfinite(g)) throw std::runtime_error("adam: non-finite gradient in " + e.name);
        const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        e.value[i] = static_cast<T>(e.value[i] - lr * mhat / (std::sqrt(vhat) + cfg_.eps));
        e.grad[i] = T(0);
      }
    }
  }

  int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  // Serialization hooks for checkpointing.
  std::vector<TensorT<T>>& moments1() { return m_; }
  std::vector<TensorT<T>>& moments2() { return v_; }
  void set_steps_taken(int64_t t) { t_ = t; }

 private:
  AdamConfig cfg_;
  std::vector<TensorT<T>> m_, v_;
  int64_t t_ = 0;
};

// Polyak blend: target <- (1 - tau) * target + tau * online.
template <typename T>
void soft_update(ParamSetT<T>& target, const ParamSetT<T>& online, double tau) {
  if (target.size() != online.size())
    throw std::invalid_argument("soft_update: param set size mismatch");
  for (size_t p = 0; p < target.size(); ++p) {
    auto& t = target.entries()[p].value;
    const auto& o = online.entries()[p].value;
    check_same_shape(t, o, "soft_update");
    for (int64_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<T>((1.0 - tau) * t[i] + tau * o[i]);
  }
}

using Adam = AdamT<float>;

}  // namespace socnav
