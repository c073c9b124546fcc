// Copyright 2026 The SFR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SFR_RANDOM_HPP
#define SFR_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace sfr {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& gen, double lo, double hi) { return lo + (hi - lo) * uniform01(gen); }

/// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& gen, std::size_t n) {
  return static_cast<std::size_t>(uniform01(gen) * static_cast<double>(n));
}

/// Standard normal by Box-Muller, so draws are identical across standard libraries.
inline double standard_normal(Rng& gen) {
  const double u1 = 1.0 - uniform01(gen);
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// First k entries of a Fisher-Yates shuffle of 0..n-1.
inline std::vector<std::size_t> partial_shuffle(std::size_t n, std::size_t k, Rng& gen) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    const std::size_t j = i + uniform_index(gen, n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

inline std::vector<std::size_t> permutation(std::size_t n, Rng& gen) {
  return partial_shuffle(n, n, gen);
}

}  // namespace sfr

#endif  // SFR_RANDOM_HPP
