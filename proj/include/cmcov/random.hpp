#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace cmcov {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based child seed; independent of evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) noexcept {
  return mix64(mix64(mix64(mix64(root) ^ a) ^ b) ^ c);
}

inline Eigen::VectorXd standard_normal_vector(Eigen::Index size, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(size);
  for (Eigen::Index i = 0; i < size; ++i) z[i] = normal(rng);
  return z;
}

}  // namespace cmcov
