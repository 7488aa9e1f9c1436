#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace synaudit {

using Rng = std::mt19937_64;

/// splitmix64 finalizer over (base, stream). Used to give every member,
/// seed and sub-task its own independent generator.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> normal_matrix(Rng& rng, Eigen::Index rows,
                                                                    Eigen::Index cols, Scalar sd = 1) {
  std::normal_distribution<Scalar> dist(Scalar(0), sd);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(rows, cols);
  // fill row by row so the draw order matches the row-major file layout
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = dist(rng);
  return out;
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> normal_vector(Rng& rng, Eigen::Index n, Scalar sd = 1) {
  std::normal_distribution<Scalar> dist(Scalar(0), sd);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = dist(rng);
  return out;
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace synaudit
