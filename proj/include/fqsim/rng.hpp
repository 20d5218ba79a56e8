// Copyright 2026 The fqsim Authors
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

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fqsim {

/**
 * Counter-based generator: draw n of stream (key) is splitmix64(key ^ mix(n)).
 *
 * Every draw is a pure function of (key, counter), so a trial seeded with
 * `CounterRng::derive(seed, trial)` reproduces bit-for-bit regardless of
 * which thread runs it or in what order trials are scheduled. Consumers draw
 * exactly one uniform per sampled measurement, in the order the measurements
 * are performed.
 */
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key = 0) : key_(key) {}

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Key for sub-stream `index` of `seed`.
    static constexpr std::uint64_t derive(std::uint64_t seed,
                                          std::uint64_t index) {
        return mix(mix(seed) ^ (index * 0xd1b54a32d192ed03ULL + 1));
    }

    std::uint64_t next_u64() { return mix(key_ ^ mix(counter_++)); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; consumes two draws.
    double normal() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0.0) {
            u1 = 0x1.0p-53;
        }
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    [[nodiscard]] std::uint64_t key() const { return key_; }
    [[nodiscard]] std::uint64_t counter() const { return counter_; }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace fqsim
