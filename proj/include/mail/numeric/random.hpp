#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "mail/numeric/tensor.hpp"

namespace mail::numeric {

// 64-bit FNV-1a; stable across platforms, used to derive per-identifier seeds.
constexpr std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis = 14695981039346656037ULL) {
  std::uint64_t hash = basis;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ULL;
  }
  return hash;
}

// Thin wrapper over mt19937_64 that produces doubles from raw engine bits so
// streams are identical on every standard library (the <random>
// distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform in [0, n).
  std::size_t index(std::size_t n);

  template <typename Container>
  void shuffle(Container& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

Tensor uniform_tensor(Shape shape, double bound, Rng& rng);

// Deterministic unit-scale vector for an identifier: the same (identifier,
// seed, dim) always yields the same vector.
Tensor hashed_vector(std::string_view identifier, std::uint64_t seed, std::size_t dim);

}  // namespace mail::numeric
