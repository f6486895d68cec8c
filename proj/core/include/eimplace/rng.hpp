#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace eim::rng {

// splitmix64 finalizer; used to derive independent stream seeds from a base
// seed plus a stream tag so that consumers never share generator state.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream ^ 0x51ed2701a3c5f9b7ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

// Draws are hand-rolled (not <random> distributions) so results do not
// depend on the standard library implementation.
inline double uniform_real(Engine& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Inclusive [lo, hi].
inline std::int64_t uniform_int(Engine& g, std::int64_t lo, std::int64_t hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t v = g();
  while (v >= limit) v = g();
  return lo + static_cast<std::int64_t>(v % span);
}

template <class T>
void shuffle(std::vector<T>& v, Engine& g) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(g, 0, static_cast<std::int64_t>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

// First k elements of a seeded shuffle of `pool`; sampling without
// replacement. k must be <= pool.size().
template <class T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k, Engine& g) {
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(
        uniform_int(g, static_cast<std::int64_t>(i), static_cast<std::int64_t>(pool.size()) - 1));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace eim::rng
