#pragma once
// counter-based random numbers.
//
// every stream is a pure function of (key, counter): no state, O(1) random
// access, and bit-identical values no matter how many other streams exist or
// in what order anything is evaluated. this is what makes noise-path shifts
// pure reindexing and lets a stored path be extended past its horizon
// without perturbing existing increments.

#include <cmath>
#include <cstdint>

namespace spde {

// splitmix64 finalizer: full-avalanche mixing of a 64-bit word
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// n-th raw word of the substream identified by key (n may be "negative":
// wrapping arithmetic keeps the map injective either side of zero)
inline std::uint64_t stream_word(std::uint64_t key, std::uint64_t n) {
  return mix64(key + n * kGolden);
}

// derive a well-spread substream key from a user seed and a stream id
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t id) {
  return mix64(mix64(seed + kGolden) + id * 0xd1342543de82ef95ull);
}

// uniform in (0,1): 53 random bits, nudged off zero so log() is safe
inline double uniform01(std::uint64_t word) {
  return (word >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// n-th standard normal of a substream via Box-Muller (cos branch only,
// two words per draw). deterministic and counter-addressable.
inline double normal_at(std::uint64_t key, std::int64_t n) {
  std::uint64_t m = 2ull * static_cast<std::uint64_t>(n);
  double u1 = uniform01(stream_word(key, m));
  double u2 = uniform01(stream_word(key, m + 1ull));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// convenience for sequential draws where random access is not needed
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t id) : key_(stream_key(seed, id)) {}
  double normal() { return normal_at(key_, n_++); }
  double uniform() { return uniform01(stream_word(key_, 0x8000000000000000ull + n_++)); }
  // uniform integer in [0, m) by rejection-free scaling (m small in practice)
  std::uint64_t below(std::uint64_t m) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(m)) % m;
  }

 private:
  std::uint64_t key_;
  std::uint64_t n_ = 0;
};

}  // namespace spde
