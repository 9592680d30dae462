#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "socnav/tensor.hpp"

namespace socnav {

// Single-file checkpoint: u32 header length, JSON header (entry names,
// shapes, hyperparameters, RNG state), then raw little-endian f32 arrays in
// header order.
class CheckpointWriter {
 public:
  void add(const std::string& name, const std::vector<int>& shape,
           const float* data);
  void add(const std::string& name, const Tensor& t) {
    add(name, t.shape(), t.data());
  }
  // Free-form metadata (hyperparameters, counters) stored as JSON text.
  void set_meta(const std::string& json_text);
  void set_rng_state(const std::vector<uint64_t>& states);

  void save(const std::string& path) const;

 private:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
  };
  std::vector<Entry> entries_;
  std::string meta_ = "{}";
  std::vector<uint64_t> rng_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path);

  bool has(const std::string& name) const;
  const std::vector<int>& shape(const std::string& name) const;
  const std::vector<float>& data(const std::string& name) const;
  Tensor tensor(const std::string& name) const;
  std::vector<std::string> names() const;

  const std::string& meta_json() const { return meta_; }
  const std::vector<uint64_t>& rng_state() const { return rng_; }

 private:
  struct Entry {
    std::vector<int> shape;
    std::vector<float> data;
  };
  std::vector<std::pair<std::string, Entry>> entries_;
  std::string meta_;
  std::vector<uint64_t> rng_;

  const Entry& find(const std::string& name) const;
};

}  // namespace socnav
