#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace snd {

// Counter-based pseudo-random generator built on the splitmix64 finalizer.
// Every draw is a pure function of (seed, stream, counter), so streams can be
// re-derived from 64-bit tags and results do not depend on platform, thread
// schedule, or call interleaving across streams.
class Rng {
public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream ^ 0x9e3779b97f4a7c15ull))) {}

  // Derives an independent stream keyed by `tag`.
  Rng derive(std::uint64_t tag) const { return Rng(key_, mix(tag + 0x632be59bd9b4e019ull)); }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ull); }

  // Uniform double in [0, 1), 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive. Multiply-shift reduction keeps the
  // mapping identical on every platform; the tiny modulo bias is irrelevant at
  // our range sizes and keeps the draw count deterministic.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const auto wide = static_cast<unsigned __int128>(next_u64()) * span;
    return lo + static_cast<std::int64_t>(wide >> 64);
  }

private:
  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

inline void shuffle(std::vector<int>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

// Uniform subset of {0, .., n-1} of size m without replacement, returned in
// ascending order.
inline std::vector<int> sample_without_replacement(int n, int m, Rng& rng) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  shuffle(pool, rng);
  pool.resize(static_cast<std::size_t>(std::min(m, n)));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace snd
