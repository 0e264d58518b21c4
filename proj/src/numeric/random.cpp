#include "mail/numeric/random.hpp"

#include <cmath>

namespace mail::numeric {

std::size_t Rng::index(std::size_t n) {
  if (n <= 1) return 0;
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor hashed_vector(std::string_view identifier, std::uint64_t seed, std::size_t dim) {
  Rng rng(fnv1a64(identifier) ^ (seed * 0x9E3779B97F4A7C15ULL));
  // Uniform(-sqrt(3), sqrt(3)) has unit variance; scaling by 1/sqrt(dim)
  // gives vectors of roughly unit norm.
  const double bound = std::sqrt(3.0 / static_cast<double>(dim));
  return uniform_tensor(Shape{dim}, bound, rng);
}

}  // namespace mail::numeric
