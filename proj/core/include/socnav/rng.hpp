#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace socnav {

// Deterministic counter-free PRNG (splitmix64 core). Self-contained so that
// sampled sequences are identical across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n) { return n ? next_u64() % n : 0; }

  // Box-Muller, cosine branch only: exactly two draws per sample.
  double normal(double mu = 0.0, double sigma = 1.0) {
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mu + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

  // Named substream derivation for reproducible independent streams.
  Rng fork(std::string_view name) const {
    uint64_t h = 1469598103934665603ull;
    for (char c : name) {
      h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
      h *= 1099511628211ull;
    }
    Rng out(state_ ^ h);
    out.next_u64();
    return out;
  }

  Rng fork(uint64_t salt) const {
    Rng out(state_ ^ (salt * 0x9e3779b97f4a7c15ull + 0x632be59bd9b4e019ull));
    out.next_u64();
    return out;
  }

 private:
  uint64_t state_;
};

}  // namespace socnav
