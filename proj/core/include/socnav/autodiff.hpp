#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "socnav/kernels.hpp"
#include "socnav/rng.hpp"
#include "socnav/tensor.hpp"
#include "socnav/warp.hpp"

namespace socnav {

// Named trainable parameter collection with paired gradient slots.
template <typename T>
class ParamSetT {
 public:
  struct Entry {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;
  };

  // Entries live in a deque so references stay valid across later adds.
  Entry& add(const std::string& name, std::vector<int> shape) {
    if (index_.count(name))
      throw std::invalid_argument("paramset: duplicate name " + name);
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back({name, TensorT<T>(shape), TensorT<T>(shape)});
    return entries_.back();
  }

  Entry& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw std::invalid_argument("paramset: unknown name " + name);
    return entries_[it->second];
  }
  const Entry& at(const std::string& name) const {
    return const_cast<ParamSetT*>(this)->at(name);
  }
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::deque<Entry>& entries() { return entries_; }
  const std::deque<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  int64_t total_params() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  void zero_grads() {
    for (auto& e : entries_) e.grad.fill(T(0));
  }

  // Order-sensitive value digest; used by tests to detect any change.
  double checksum() const {
    double acc = 0.0;
    double scale = 1.0;
    for (const auto& e : entries_) {
      for (int64_t i = 0; i < e.value.size(); ++i)
        acc += static_cast<double>(e.value[i]) * (1.0 + 1e-6 * ((i * 31 + 7) % 97));
      scale += 1.0;
    }
    return acc;
  }

  ParamSetT clone() const {
    ParamSetT out;
    out.entries_ = entries_;
    out.index_ = index_;
    return out;
  }

  void copy_values_from(const ParamSetT& o) {
    if (o.size() != size())
      throw std::invalid_argument("paramset: size mismatch in copy");
    for (size_t i = 0; i < entries_.size(); ++i) {
      check_same_shape(entries_[i].value, o.entries_[i].value, "paramset copy");
      entries_[i].value = o.entries_[i].value;
    }
  }

 private:
  std::deque<Entry> entries_;  // insertion order = checkpoint order
  std::unordered_map<std::string, int> index_;
};

// Handle to a tape node (or a detached constant when id < 0 and no tape).
struct Val {
  int id = -1;
};

// Reverse-mode tape. Ops append nodes during the forward pass; backward()
// sweeps the recorded sequence exactly once in reverse order.
template <typename T>
class TapeT {
 public:
  struct Node {
    TensorT<T> value;
    TensorT<T> grad;  // allocated lazily during backward
    bool needs_grad = false;
    std::function<void(TapeT&, int)> backward;  // nullable for leaves
    typename ParamSetT<T>::Entry* param = nullptr;
  };

  Val input(TensorT<T> v) {
    nodes_.push_back(Node{std::move(v), {}, false, nullptr, nullptr});
    return {static_cast<int>(nodes_.size()) - 1};
  }

  Val param(typename ParamSetT<T>::Entry& p) {
    Node n;
    n.value = p.value;
    n.needs_grad = true;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
  }

  Val emit(TensorT<T> value, bool needs_grad,
           std::function<void(TapeT&, int)> backward) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
  }

  const TensorT<T>& value(Val v) const { return nodes_[v.id].value; }
  bool needs_grad(Val v) const { return nodes_[v.id].needs_grad; }
  size_t size() const { return nodes_.size(); }

  // Gradient buffer of a node, allocated on first touch.
  TensorT<T>& grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = TensorT<T>(n.value.shape());
    return n.grad;
  }
  bool has_grad(int id) const { return !nodes_[id].grad.empty(); }

  void backward(Val loss) {
    if (nodes_.empty()) throw std::logic_error("backward on empty tape");
    if (loss.id < 0 || loss.id >= static_cast<int>(nodes_.size()))
      throw std::logic_error("backward: invalid loss node");
    if (nodes_[loss.id].value.size() != 1)
      throw std::logic_error("backward: loss must be scalar");
    grad(loss.id)[0] = T(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param) {
        for (int64_t k = 0; k < n.grad.size(); ++k) n.param->grad[k] += n.grad[k];
      }
    }
  }

  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------
// Tape ops. Each computes the forward value eagerly and registers the
// matching adjoint. Shape mismatches throw with both shapes reported.
// ---------------------------------------------------------------------

namespace ops {

template <typename T>
Val dense(TapeT<T>& tp, Val x, Val w, Val b) {
  const auto& xv = tp.value(x);
  const auto& wv = tp.value(w);
  if (xv.ndim() != 2 || wv.ndim() != 2 || xv.dim(1) != wv.dim(0))
    throw std::invalid_argument("dense: shape mismatch " + xv.shape_str() +
                                " vs " + wv.shape_str());
  const int n = xv.dim(0), in = xv.dim(1), out = wv.dim(1);
  TensorT<T> y({n, out});
  const T* bp = b.id >= 0 ? tp.value(b).data() : nullptr;
  kernels::dense_fwd(xv.data(), wv.data(), bp, y.data(), n, in, out);
  bool ng = tp.needs_grad(x) || tp.needs_grad(w) || (b.id >= 0 && tp.needs_grad(b));
  return tp.emit(std::move(y), ng, [x, w, b, n, in, out](TapeT<T>& t, int self) {
    const TensorT<T>& dy = t.grad(self);
    if (t.needs_grad(x))
      kernels::dense_bwd_x(dy.data(), t.value(w).data(), t.grad(x.id).data(), n, in, out);
    if (t.needs_grad(w)) {
      T* db = (b.id >= 0 && t.needs_grad(b)) ? t.grad(b.id).data() : nullptr;
      kernels::dense_bwd_w(t.value(x).data(), dy.data(), t.grad(w.id).data(), db, n, in, out);
    }
  });
}

template <typename T>
Val conv2d(TapeT<T>& tp, Val x, Val w, Val b, int sh, int sw, int ph, int pw) {
  const auto& xv = tp.value(x);
  const auto& wv = tp.value(w);
  if (xv.ndim() != 4 || wv.ndim() != 4 || xv.dim(1) != wv.dim(1))
    throw std::invalid_argument("conv2d: shape mismatch " + xv.shape_str() +
                                " vs " + wv.shape_str());
  kernels::Conv2dShape s{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3),
                         wv.dim(0), wv.dim(2), wv.dim(3), sh, sw, ph, pw};
  TensorT<T> y({s.n, s.f, s.oh(), s.ow()});
  const T* bp = b.id >= 0 ? tp.value(b).data() : nullptr;
  kernels::conv2d_fwd(xv.data(), wv.data(), bp, y.data(), s);
  bool ng = tp.needs_grad(x) || tp.needs_grad(w) || (b.id >= 0 && tp.needs_grad(b));
  return tp.emit(std::move(y), ng, [x, w, b, s](TapeT<T>& t, int self) {
    const TensorT<T>& dy = t.grad(self);
    if (t.needs_grad(x))
      kernels::conv2d_bwd_x(dy.data(), t.value(w).data(), t.grad(x.id).data(), s);
    if (t.needs_grad(w)) {
      T* db = (b.id >= 0 && t.needs_grad(b)) ? t.grad(b.id).data() : nullptr;
      kernels::conv2d_bwd_w(t.value(x).data(), dy.data(), t.grad(w.id).data(), db, s);
    }
  });
}

template <typename T>
Val deconv2d(TapeT<T>& tp, Val x, Val w, Val b, int sh, int sw, int ph, int pw) {
  const auto& xv = tp.value(x);
  const auto& wv = tp.value(w);
  if (xv.ndim() != 4 || wv.ndim() != 4 || xv.dim(1) != wv.dim(0))
    throw std::invalid_argument("deconv2d: shape mismatch " + xv.shape_str() +
                                " vs " + wv.shape_str());
  kernels::Deconv2dShape s{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3),
                           wv.dim(1), wv.dim(2), wv.dim(3), sh, sw, ph, pw};
  TensorT<T> y({s.n, s.f, s.oh(), s.ow()});
  const T* bp = b.id >= 0 ? tp.value(b).data() : nullptr;
  kernels::deconv2d_fwd(xv.data(), wv.data(), bp, y.data(), s);
  bool ng = tp.needs_grad(x) || tp.needs_grad(w) || (b.id >= 0 && tp.needs_grad(b));
  return tp.emit(std::move(y), ng, [x, w, b, s](TapeT<T>& t, int self) {
    const TensorT<T>& dy = t.grad(self);
    if (t.needs_grad(x))
      kernels::deconv2d_bwd_x(dy.data(), t.value(w).data(), t.grad(x.id).data(), s);
    if (t.needs_grad(w)) {
      T* db = (b.id >= 0 && t.needs_grad(b)) ? t.grad(b.id).data() : nullptr;
      kernels::deconv2d_bwd_w(t.value(x).data(), dy.data(), t.grad(w.id).data(), db, s);
    }
  });
}

template <typename T>
Val conv3d(TapeT<T>& tp, Val x, Val w, Val b, int sd, int sh, int sw, int pd,
           int ph, int pw) {
  const auto& xv = tp.value(x);
  const auto& wv = tp.value(w);
  if (xv.ndim() != 5 || wv.ndim() != 5 || xv.dim(1) != wv.dim(1))
    throw std::invalid_argument("conv3d: shape mismatch " + xv.shape_str() +
                                " vs " + wv.shape_str());
  kernels::Conv3dShape s{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), xv.dim(4),
                         wv.dim(0), wv.dim(2), wv.dim(3), wv.dim(4),
                         sd, sh, sw, pd, ph, pw};
  TensorT<T> y({s.n, s.f, s.od(), s.oh(), s.ow()});
  const T* bp = b.id >= 0 ? tp.value(b).data() : nullptr;
  kernels::conv3d_fwd(xv.data(), wv.data(), bp, y.data(), s);
  bool ng = tp.needs_grad(x) || tp.needs_grad(w) || (b.id >= 0 && tp.needs_grad(b));
  return tp.emit(std::move(y), ng, [x, w, b, s](TapeT<T>& t, int self) {
    const TensorT<T>& dy = t.grad(self);
    if (t.needs_grad(x))
      kernels::conv3d_bwd_x(dy.data(), t.value(w).data(), t.grad(x.id).data(), s);
    if (t.needs_grad(w)) {
      T* db = (b.id >= 0 && t.needs_grad(b)) ? t.grad(b.id).data() : nullptr;
      kernels::conv3d_bwd_w(t.value(x).data(), dy.data(), t.grad(w.id).data(), db, s);
    }
  });
}

template <typename T, typename FwdFn, typename DerivFn>
Val unary_elementwise(TapeT<T>& tp, Val x, FwdFn f, DerivFn dfdy) {
  const auto& xv = tp.value(x);
  TensorT<T> y(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
  return tp.emit(std::move(y), tp.needs_grad(x), [x, dfdy](TapeT<T>& t, int self) {
    if (!t.needs_grad(x)) return;
    const TensorT<T>& dy = t.grad(self);
    const TensorT<T>& yv = t.value({self});
    const TensorT<T>& xv = t.value(x);
    TensorT<T>& dx = t.grad(x.id);
    for (int64_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * dfdy(xv[i], yv[i]);
  });
}

template <typename T>
Val relu(TapeT<T>& tp, Val x) {
  return unary_elementwise(
      tp, x, [](T v) { return v > T(0) ? v : T(0); },
      [](T xv, T) { return xv > T(0) ? T(1) : T(0); });
}

// Small negative slope keeps units trainable on sparse inputs.
template <typename T>
Val leaky_relu(TapeT<T>& tp, Val x, double slope = 0.01) {
  const T s = static_cast<T>(slope);
  return unary_elementwise(
      tp, x, [s](T v) { return v > T(0) ? v : s * v; },
      [s](T xv, T) { return xv > T(0) ? T(1) : s; });
}

template <typename T>
Val tanh_op(TapeT<T>& tp, Val x) {
  return unary_elementwise(
      tp, x, [](T v) { return std::tanh(v); },
      [](T, T yv) { return T(1) - yv * yv; });
}

template <typename T>
Val sigmoid(TapeT<T>& tp, Val x) {
  return unary_elementwise(
      tp, x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
      [](T, T yv) { return yv * (T(1) - yv); });
}

template <typename T>
Val add(TapeT<T>& tp, Val a, Val b) {
  const auto& av = tp.value(a);
  const auto& bv = tp.value(b);
  check_same_shape(av, bv, "add");
  TensorT<T> y(av.shape());
  for (int64_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  bool ng = tp.needs_grad(a) || tp.needs_grad(b);
  return tp.emit(std::move(y), ng, [a, b](TapeT<T>& t, int self) {
    const TensorT<T>& dy = t.grad(self);
    if (t.needs_grad(a)) {
      TensorT<T>& da = t.grad(a.id);
      for (int64_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
    }
    if (t.needs_grad(b)) {
      TensorT<T>& db = t.grad(b.id);
      for (int64_t i = 0; i < dy.size(); ++i) db[i] += dy[i];
    }
  });
}

template <typename T>
Val sub(TapeT<T>& tp, Val a, Val b) {
  const auto& av = tp.value(a);
  const auto& bv = tp.value(b);
  check_same_shape(av, bv, "sub");
  TensorT<T> y(av.shape());
  for (int64_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  bool ng = tp.needs_grad(a) || tp.needs_grad(b);
  return tp.emit(std::move(y), ng, [a, b](TapeT<T>& t, int self) {
    const TensorT<T>& dy = t.grad(self);
    if (t.needs_grad(a)) {
      TensorT<T>& da = t.grad(a.id);
      for (int64_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
    }
    if (t.needs_grad(b)) {
      TensorT<T>& db = t.grad(b.id);
      for (int64_t i = 0; i < dy.size(); ++i) db[i] -= dy[i];
    }
  });
}

template <typename T>
Val mul(TapeT<T>& tp, Val a, Val b) {
  const auto& av = tp.value(a);
  const auto& bv = tp.value(b);
  check_same_shape(av, bv, "mul");
  TensorT<T> y(av.shape());
  for (int64_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  bool ng = tp.needs_grad(a) || tp.needs_grad(b);
  return tp.emit(std::move(y), ng, [a, b](TapeT<T>& t, int self) {
    const TensorT<T>& dy = t.grad(self);
    const TensorT<T>& av2 = t.value(a);
    const TensorT<T>& bv2 = t.value(b);
    if (t.needs_grad(a)) {
      TensorT<T>& da = t.grad(a.id);
      for (int64_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * bv2[i];
    }
    if (t.needs_grad(b)) {
      TensorT<T>& db = t.grad(b.id);
      for (int64_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * av2[i];
    }
  });
}

template <typename T>
Val mul_scalar(TapeT<T>& tp, Val x, double c) {
  const auto& xv = tp.value(x);
  TensorT<T> y(xv.shape());
  for (int64_t i = 0; i < y.size(); ++i) y[i] = static_cast<T>(xv[i] * c);
  return tp.emit(std::move(y), tp.needs_grad(x), [x, c](TapeT<T>& t, int self) {
    if (!t.needs_grad(x)) return;
    const TensorT<T>& dy = t.grad(self);
    TensorT<T>& dx = t.grad(x.id);
    for (int64_t i = 0; i < dy.size(); ++i) dx[i] += static_cast<T>(dy[i] * c);
  });
}

template <typename T>
Val add_scalar(TapeT<T>& tp, Val x, double c) {
  const auto& xv = tp.value(x);
  TensorT<T> y(xv.shape());
  for (int64_t i = 0; i < y.size(); ++i) y[i] = static_cast<T>(xv[i] + c);
  return tp.emit(std::move(y), tp.needs_grad(x), [x](TapeT<T>& t, int self) {
    if (!t.needs_grad(x)) return;
    const TensorT<T>& dy = t.grad(self);
    TensorT<T>& dx = t.grad(x.id);
    for (int64_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
  });
}

// Concatenation along axis 1 (the channel/feature axis).
template <typename T>
Val concat_axis1(TapeT<T>& tp, const std::vector<Val>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  const auto& first = tp.value(xs[0]);
  std::vector<int> shape = first.shape();
  int64_t inner = 1;
  for (int i = 2; i < first.ndim(); ++i) inner *= first.dim(i);
  int total_c = 0;
  bool ng = false;
  for (Val v : xs) {
    const auto& tv = tp.value(v);
    if (tv.ndim() != first.ndim() || tv.dim(0) != first.dim(0))
      throw std::invalid_argument("concat: shape mismatch " + tv.shape_str() +
                                  " vs " + first.shape_str());
    for (int i = 2; i < first.ndim(); ++i)
      if (tv.dim(i) != first.dim(i))
        throw std::invalid_argument("concat: shape mismatch " + tv.shape_str() +
                                    " vs " + first.shape_str());
    total_c += tv.dim(1);
    ng = ng || tp.needs_grad(v);
  }
  shape[1] = total_c;
  TensorT<T> y(shape);
  const int n = first.dim(0);
  int64_t offset = 0;
  for (Val v : xs) {
    const auto& tv = tp.value(v);
    const int64_t chunk = tv.dim(1) * inner;
    for (int i = 0; i < n; ++i) {
      const T* src = tv.data() + i * chunk;
      T* dst = y.data() + static_cast<int64_t>(i) * total_c * inner + offset;
      for (int64_t k = 0; k < chunk; ++k) dst[k] = src[k];
    }
    offset += chunk;
  }
  auto xs_copy = xs;
  return tp.emit(std::move(y), ng, [xs_copy, n, inner, total_c](TapeT<T>& t, int self) {
    const TensorT<T>& dy = t.grad(self);
    int64_t offset = 0;
    for (Val v : xs_copy) {
      const int64_t chunk = t.value(v).dim(1) * inner;
      if (t.needs_grad(v)) {
        TensorT<T>& dx = t.grad(v.id);
        for (int i = 0; i < n; ++i) {
          const T* src = dy.data() + static_cast<int64_t>(i) * total_c * inner + offset;
          T* dst = dx.data() + i * chunk;
          for (int64_t k = 0; k < chunk; ++k) dst[k] += src[k];
        }
      }
      offset += chunk;
    }
  });
}

// Slice along axis 1: channels [start, start+len).
template <typename T>
Val slice_axis1(TapeT<T>& tp, Val x, int start, int len) {
  const auto& xv = tp.value(x);
  if (xv.ndim() < 2 || start < 0 || start + len > xv.dim(1))
    throw std::invalid_argument("slice: bad range on " + xv.shape_str());
  std::vector<int> shape = xv.shape();
  shape[1] = len;
  int64_t inner = 1;
  for (int i = 2; i < xv.ndim(); ++i) inner *= xv.dim(i);
  const int n = xv.dim(0), c = xv.dim(1);
  TensorT<T> y(shape);
  for (int i = 0; i < n; ++i) {
    const T* src = xv.data() + (static_cast<int64_t>(i) * c + start) * inner;
    T* dst = y.data() + static_cast<int64_t>(i) * len * inner;
    for (int64_t k = 0; k < static_cast<int64_t>(len) * inner; ++k) dst[k] = src[k];
  }
  return tp.emit(std::move(y), tp.needs_grad(x),
                 [x, start, len, n, c, inner](TapeT<T>& t, int self) {
                   if (!t.needs_grad(x)) return;
                   const TensorT<T>& dy = t.grad(self);
                   TensorT<T>& dx = t.grad(x.id);
                   for (int i = 0; i < n; ++i) {
                     const T* src = dy.data() + static_cast<int64_t>(i) * len * inner;
                     T* dst = dx.data() + (static_cast<int64_t>(i) * c + start) * inner;
                     for (int64_t k = 0; k < static_cast<int64_t>(len) * inner; ++k)
                       dst[k] += src[k];
                   }
                 });
}

template <typename T>
Val reshape(TapeT<T>& tp, Val x, std::vector<int> shape) {
  const auto& xv = tp.value(x);
  if (TensorT<T>::count(shape) != xv.size())
    throw std::invalid_argument("reshape: size mismatch for " + xv.shape_str());
  TensorT<T> y(shape, xv.raw());
  return tp.emit(std::move(y), tp.needs_grad(x), [x](TapeT<T>& t, int self) {
    if (!t.needs_grad(x)) return;
    const TensorT<T>& dy = t.grad(self);
    TensorT<T>& dx = t.grad(x.id);
    for (int64_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
  });
}

template <typename T>
Val sum_all(TapeT<T>& tp, Val x) {
  const auto& xv = tp.value(x);
  double acc = 0.0;
  for (int64_t i = 0; i < xv.size(); ++i) acc += static_cast<double>(xv[i]);
  TensorT<T> y({1});
  y[0] = static_cast<T>(acc);
  return tp.emit(std::move(y), tp.needs_grad(x), [x](TapeT<T>& t, int self) {
    if (!t.needs_grad(x)) return;
    const T g = t.grad(self)[0];
    TensorT<T>& dx = t.grad(x.id);
    for (int64_t i = 0; i < dx.size(); ++i) dx[i] += g;
  });
}

template <typename T>
Val mean_all(TapeT<T>& tp, Val x) {
  const int64_t n = tp.value(x).size();
  return mul_scalar(tp, sum_all(tp, x), 1.0 / static_cast<double>(n));
}

template <typename T>
Val square(TapeT<T>& tp, Val x) {
  return mul(tp, x, x);
}

template <typename T>
Val mse(TapeT<T>& tp, Val a, Val b) {
  return mean_all(tp, square(tp, sub(tp, a, b)));
}

// Per-sample rigid resampling of [N, C, H, W] grids; the affines are
// constants, so only the image gradient flows.
template <typename T>
Val bilinear_warp(TapeT<T>& tp, Val x, std::vector<CellAffine> affines) {
  const auto& xv = tp.value(x);
  if (xv.ndim() != 4 || static_cast<size_t>(xv.dim(0)) != affines.size())
    throw std::invalid_argument("bilinear_warp: need [N,C,H,W] and one affine per sample, got " +
                                xv.shape_str());
  const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  TensorT<T> y(xv.shape());
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const int64_t off = (static_cast<int64_t>(i) * c + ch) * h * w;
      warp_bilinear(xv.data() + off, y.data() + off, h, w, affines[i]);
    }
  return tp.emit(std::move(y), tp.needs_grad(x),
                 [x, affines, n, c, h, w](TapeT<T>& t, int self) {
                   if (!t.needs_grad(x)) return;
                   const TensorT<T>& dy = t.grad(self);
                   TensorT<T>& dx = t.grad(x.id);
                   for (int i = 0; i < n; ++i)
                     for (int ch = 0; ch < c; ++ch) {
                       const int64_t off = (static_cast<int64_t>(i) * c + ch) * h * w;
                       warp_bilinear_backward(dy.data() + off, dx.data() + off, h, w,
                                              affines[i]);
                     }
                 });
}

// Gated convolutional recurrent cell over grid-shaped features.
// Weight layout: w [4*Ch, Cx+Ch, K, K], bias [4*Ch]; gate order i, f, o, g.
template <typename T>
struct RecurrentState {
  Val h;
  Val c;
};

template <typename T>
RecurrentState<T> conv_recurrent_step(TapeT<T>& tp, Val x, RecurrentState<T> state,
                                      Val w, Val b, int pad) {
  const int ch = tp.value(state.h).dim(1);
  Val xc = concat_axis1(tp, {x, state.h});
  Val gates = conv2d(tp, xc, w, b, 1, 1, pad, pad);
  Val gi = sigmoid(tp, slice_axis1(tp, gates, 0, ch));
  Val gf = sigmoid(tp, slice_axis1(tp, gates, ch, ch));
  Val go = sigmoid(tp, slice_axis1(tp, gates, 2 * ch, ch));
  Val gg = tanh_op(tp, slice_axis1(tp, gates, 3 * ch, ch));
  Val c_new = add(tp, mul(tp, gf, state.c), mul(tp, gi, gg));
  Val h_new = mul(tp, go, tanh_op(tp, c_new));
  return {h_new, c_new};
}

}  // namespace ops

// Fan-in-scaled uniform initialization.
template <typename T>
void init_uniform_fanin(TensorT<T>& t, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace socnav
