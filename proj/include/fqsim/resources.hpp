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

/**
 * @file
 * Resource counters and the modeled gate-cost constants.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace fqsim {

/**
 * Modeled gate costs. Only slopes are ever asserted, so the constants are
 * deliberately simple.
 */
struct CostModel {
    /// one controlled-M rotation or single-register rotation
    std::int64_t rotation = 1;
    /// gates per bit of a register addition, subtraction or comparison
    std::int64_t arithmetic_per_bit = 5;

    [[nodiscard]] std::int64_t arithmetic(int bits) const {
        return arithmetic_per_bit * std::max(bits, 1);
    }

    [[nodiscard]] std::string describe() const {
        return "rotation=" + std::to_string(rotation) +
               ";arithmetic_per_bit=" + std::to_string(arithmetic_per_bit);
    }
};

/// Bits needed to hold values 0..n-1.
inline int bits_for(std::int64_t n) {
    int b = 0;
    while ((std::int64_t{1} << b) < n) {
        ++b;
    }
    return std::max(b, 1);
}

struct ResourceTally {
    std::int64_t queries = 0;
    std::int64_t correction_queries = 0;
    std::int64_t modeled_gates = 0;
    std::int64_t registers_high_water = 0;
    std::int64_t correction_attempts = 0;
    std::int64_t segments = 0;
    std::int64_t flag_failures = 0;
    std::int64_t walk_failures = 0;

    void note_qubits(std::int64_t live) {
        registers_high_water = std::max(registers_high_water, live);
    }

    ResourceTally &operator+=(const ResourceTally &o) {
        queries += o.queries;
        correction_queries += o.correction_queries;
        modeled_gates += o.modeled_gates;
        registers_high_water = std::max(registers_high_water, o.registers_high_water);
        correction_attempts += o.correction_attempts;
        segments += o.segments;
        flag_failures += o.flag_failures;
        walk_failures += o.walk_failures;
        return *this;
    }
};

} // namespace fqsim
