// SPDX-License-Identifier: Apache-2.0
//
// Seeded random draws with fully specified bit streams. std::mt19937_64 is
// pinned by the standard, but std::*_distribution is not, so uniform and
// normal variates are generated explicitly here. Same seed, same numbers,
// any toolchain.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace mtopt {

// Uniform double in [0, 1): top 53 bits of the engine output.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Standard normal via Box-Muller. One variate per call; the cosine branch
// only, so draws are independent of call pairing.
inline double gaussian(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);  // avoid log(0)
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

inline Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = gaussian(rng);
  return v;
}

inline Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows,
                                       Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)      // column-major fill order
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gaussian(rng);
  return m;
}

// Unbiased draw from {0, ..., n-1} by rejection (std::shuffle and the
// std distributions are implementation-defined; these are not).
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

// Fisher-Yates permutation of {0, ..., n-1}.
inline std::vector<Eigen::Index> shuffled_indices(std::mt19937_64& rng,
                                                  Eigen::Index n) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(
        bounded(rng, static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

}  // namespace mtopt
