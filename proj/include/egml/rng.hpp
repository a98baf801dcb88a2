#pragma once

#include <cmath>
#include <cstdint>

namespace egml {

// Counter-based pseudo-random stream (SplitMix64 finalizer over a per-path
// offset). Draw k of path p depends only on (seed, p, k), so paths are
// independent of the total path count and of thread scheduling.
class DrawStream {
 public:
  DrawStream(std::uint64_t seed, std::uint64_t path)
      : base_(mix(seed ^ mix(path + 0x9E3779B97F4A7C15ull))), counter_(0) {}

  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::uint64_t next_u64() { return mix(base_ + counter_++ * 0xD1B54A32D192ED03ull); }

  // Uniform on (0,1), never returning an endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; consumes two uniforms per draw.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t base_;
  std::uint64_t counter_;
};

}  // namespace egml
