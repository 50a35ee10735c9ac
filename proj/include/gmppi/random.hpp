// Copyright 2026 The gmppi Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Counter-based random numbers (Philox4x32-10, Salmon et al., SC'11).
//
// Every draw is a pure function of (seed, domain, iteration, rollout, block),
// so rollouts can be generated in any order on any number of threads and
// still see the same numbers.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace gmppi {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

inline Philox4x32Counter philox4x32_10(Philox4x32Counter ctr, Philox4x32Key key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Purpose tag folded into the counter so independent consumers never
/// share a block.
enum class RngDomain : std::uint32_t {
  kCommandNoise = 1,
  kGainNoise = 2,
  kTest = 0xFFFF,
};

/// One addressable stream per (seed, domain, iteration, rollout).
class RolloutStream {
 public:
  RolloutStream(std::uint64_t seed, RngDomain domain, std::uint64_t iteration,
                std::uint32_t rollout)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        rollout_(rollout),
        iteration_lo_(static_cast<std::uint32_t>(iteration)),
        // Upper iteration bits share a word with the domain tag; 2^16
        // domains and 2^48 iterations are both far beyond any run length.
        iteration_hi_domain_((static_cast<std::uint32_t>(iteration >> 32) << 16) ^
                             static_cast<std::uint32_t>(domain)) {}

  std::array<std::uint32_t, 4> raw(std::uint32_t block) const {
    return philox4x32_10({block, rollout_, iteration_lo_, iteration_hi_domain_}, key_);
  }

  /// Four standard normals from block `block` (two Box-Muller pairs).
  std::array<double, 4> normals(std::uint32_t block) const {
    const auto r = raw(block);
    std::array<double, 4> out{};
    for (int pair = 0; pair < 2; ++pair) {
      const double u1 = to_open_unit(r[2 * pair]);
      const double u2 = to_open_unit(r[2 * pair + 1]);
      const double radius = std::sqrt(-2.0 * std::log(u1));
      const double angle = 6.283185307179586 * u2;
      out[2 * pair] = radius * std::cos(angle);
      out[2 * pair + 1] = radius * std::sin(angle);
    }
    return out;
  }

  /// Uniform in (0, 1).
  static double to_open_unit(std::uint32_t x) {
    return (static_cast<double>(x) + 0.5) * (1.0 / 4294967296.0);
  }

 private:
  Philox4x32Key key_;
  std::uint32_t rollout_;
  std::uint32_t iteration_lo_;
  std::uint32_t iteration_hi_domain_;
};

}  // namespace gmppi
