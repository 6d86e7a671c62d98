#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace lobkit {

// Deterministic 64-bit stream (SplitMix64). Every draw consumes exactly one
// state step, so a seed fully determines the stream on any platform; the
// simulator documents how many draws each event consumes (see simulate.hpp)
// which makes event logs reproducible bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1), 53-bit mantissa.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Exponential with the given rate; uses -log(1-U) so the argument of log
  // is in (0, 1].
  double next_exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential rate must be > 0");
    return -std::log1p(-next_unit()) / rate;
  }

  // Index drawn proportionally to `weights` (sum given by `total`).
  // Walks the cumulative sum; any residual due to rounding lands on the
  // last strictly positive weight.
  std::size_t next_index(std::span<const double> weights, double total) {
    if (weights.empty() || !(total > 0.0))
      throw std::invalid_argument("categorical draw needs positive total weight");
    const double x = next_unit() * total;
    double acc = 0.0;
    std::size_t last_positive = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) last_positive = i;
      acc += weights[i];
      if (x < acc) return i;
    }
    if (last_positive == weights.size())
      throw std::invalid_argument("categorical draw with all-zero weights");
    return last_positive;
  }

  // Independent derived stream, e.g. for parallel replicas: replica i of a
  // run seeded s uses substream(s, i).
  static Rng substream(std::uint64_t seed, std::uint64_t index) {
    Rng mixer(seed ^ (0xA3EC647659359ACDull * (index + 1)));
    return Rng(mixer.next_u64());
  }

 private:
  std::uint64_t state_;
};

}  // namespace lobkit
