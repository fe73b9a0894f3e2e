#pragma once

#include <cstdint>

namespace navp {

// splitmix64: used only to expand a 64-bit seed into generator state.
//   z = (x += 0x9E3779B97F4A7C15)
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
std::uint64_t splitmix64(std::uint64_t& state);

// xoshiro256** with splitmix64 seeding. Every derived draw below is defined
// in integer arithmetic (or exact binary fractions) so that a port to another
// language reproduces the same stream bit for bit. See docs/RNG.md.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  // floor(next() * n / 2^64), no rejection step. n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Inclusive integer range [lo, hi].
  std::int64_t range(std::int64_t lo, std::int64_t hi);

  // (next() >> 11) * 2^-53, in [0, 1).
  double uniform();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t s_[4];
};

// Combines two integers into one seed; used to derive per-frame and
// per-link streams from a run seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace navp
