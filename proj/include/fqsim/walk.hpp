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
 * Segment programs and the undo/redo walk shared by the uncompressed and
 * compressed runners.
 *
 * A program is one attempt at a segment: the direction of the fractional
 * query (+1 forward, -1 for the inverted construction), whether the drive
 * windows run backwards, and classical phase corrections e^{i phi Q} merged
 * in at known positions. An attempt that reports ones at positions S has
 * applied a known unitary; undoing it runs the inverse program, whose
 * corrections cancel the old ones and turn each e^{-i s pi/4 Q} error back
 * into the ideal step.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <vector>

#include "fqsim/errors.hpp"
#include "fqsim/resources.hpp"

namespace fqsim {

/// Positions are 0-based; position p sits at grid time p + 1.
struct SegmentProgram {
    int direction = +1;
    bool reversed = false;
    std::map<int, double> corrections;

    friend bool operator==(const SegmentProgram &, const SegmentProgram &) = default;
};

/// A program that ran and the ones it reported.
struct WalkLevel {
    SegmentProgram program;
    std::vector<int> errors;
};

/**
 * The program that exactly inverts `level` when it succeeds. `theta` is the
 * success-step angle atan(beta^2 / alpha^2).
 */
inline SegmentProgram inverse_program(const WalkLevel &level, double theta) {
    SegmentProgram inv;
    inv.direction = -level.program.direction;
    inv.reversed = !level.program.reversed;
    for (const auto &[p, phi] : level.program.corrections) {
        inv.corrections[p] -= phi;
    }
    const double fix = level.program.direction * (theta + std::numbers::pi / 4.0);
    for (int p : level.errors) {
        inv.corrections[p] += fix;
    }
    for (auto it = inv.corrections.begin(); it != inv.corrections.end();) {
        if (it->second == 0.0) {
            it = inv.corrections.erase(it);
        } else {
            ++it;
        }
    }
    return inv;
}

/// What an attempt reports back to the walk.
struct AttemptReport {
    bool success = false;
    std::vector<int> errors;
};

struct WalkOutcome {
    bool success = false;
    /// programs run by the walk, excluding the failed attempt that started it
    int attempts = 0;
};

/**
 * Biased random walk starting from a failed attempt of `forward`.
 * `attempt` runs a program on the caller's state. Gives up after
 * `max_attempts` programs.
 */
inline WalkOutcome correction_walk_generic(const SegmentProgram &forward,
                                           std::vector<int> first_errors, double theta,
                                           const std::function<AttemptReport(const SegmentProgram &)> &attempt,
                                           int max_attempts) {
    WalkOutcome out;
    if (first_errors.empty()) {
        out.success = true;
        return out;
    }
    std::vector<WalkLevel> stack{{forward, std::move(first_errors)}};
    while (!stack.empty()) {
        if (out.attempts >= max_attempts) {
            return out;
        }
        const SegmentProgram prog = inverse_program(stack.back(), theta);
        AttemptReport r = attempt(prog);
        ++out.attempts;
        if (!r.success) {
            stack.push_back({prog, std::move(r.errors)});
            continue;
        }
        stack.pop_back();
        if (stack.empty()) {
            if (out.attempts >= max_attempts) {
                return out;
            }
            AttemptReport again = attempt(forward);
            ++out.attempts;
            if (again.success) {
                out.success = true;
                return out;
            }
            stack.push_back({forward, std::move(again.errors)});
        }
    }
    out.success = true;
    return out;
}

} // namespace fqsim
