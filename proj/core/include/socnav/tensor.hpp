#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace socnav {

// Dense n-dimensional value array, row-major.
template <typename T>
class TensorT {
 public:
  TensorT() = default;
  explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(count(shape_), T(0));
  }
  TensorT(std::vector<int> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != count(shape_))
      throw std::invalid_argument("tensor: data length does not match shape");
  }

  static int64_t count(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
      n *= d;
    }
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[i]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](int64_t i) { return data_[i]; }
  const T& operator[](int64_t i) const { return data_[i]; }

  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ']';
    return os.str();
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
}

using Tensor = TensorT<float>;

}  // namespace socnav
