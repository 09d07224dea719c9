#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace esdtrace {

// splitmix64 (Steele/Lea/Flood), the fixed pseudo-random source for every
// generator in this toolkit. All derived quantities (index, unit double,
// shuffle) are defined here so corpora regenerate identically everywhere.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n). Modulo reduction; the bias at n << 2^64 is irrelevant
  // for corpus generation and keeps the mapping trivially portable.
  std::uint64_t index(std::uint64_t n) { return n ? next() % n : 0; }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// FNV-1a over bytes; content-derived identifiers are built on this.
inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace esdtrace
