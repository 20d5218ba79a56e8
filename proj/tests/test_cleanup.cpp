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

#include <gtest/gtest.h>

#include <cmath>

#include "fqsim/cleanup.hpp"
#include "fqsim/preparation.hpp"

using namespace fqsim;

namespace {

struct Amp {
    double alpha;
    double beta;
};

Amp pinned(int m) {
    const double t = std::tan(1.0 / (8.0 * m));
    const double b2 = t / (1 + t);
    return {std::sqrt(1 - b2), std::sqrt(b2)};
}

} // namespace

TEST(Preparation, NormAndClosedFormAmplitudes) {
    const auto [a, b] = pinned(8);
    const auto u = prepare_controls(8, 3, 1024, a, b);
    EXPECT_NEAR(u.squared_norm(), 1.0, 1e-12);
    // the encoded zero string carries alpha^{2m} up to the overlap deficit
    const double z = std::norm(u.clean.at(Slots{8, 8, 8, 8}));
    EXPECT_NEAR(z, std::pow(a, 16) * std::pow(overlap_phi(1024, 8, a, b), 2), 1e-14);
    EXPECT_NEAR(z / std::pow(a, 16), 1.0, 1e-3);
}

TEST(Preparation, CleanComponentMatchesOverlapDeficit) {
    const auto [a, b] = pinned(8);
    for (double eps : {1e-3, 1e-4}) {
        const long q = q_bound(8, b, eps);
        const auto u = prepare_controls(8, 3, q, a, b);
        EXPECT_LE(slot_distance(u.clean, ideal_succinct_state(8, 3, a, b)), 10 * eps);
        EXPECT_LE(u.dirty_weight(), 10 * eps);
    }
}

TEST(Preparation, ResidualsReproduceCascadeOverlaps) {
    const auto [a, b] = pinned(8);
    const long q = 64;
    PhiCascade c(q, a, b);
    for (int t = 0; t <= 8; ++t) {
        Vector v = phi_closed_form(q - t, a, b, c.dim());
        c.apply_adjoint(v);
        EXPECT_NEAR(v(0).real(), overlap_phi(q, t, a, b), 1e-13);
        EXPECT_NEAR(v(0).imag(), 0.0, 1e-15);
    }
}

TEST(Preparation, NuPrimeSectorIsWeightKPlusOne) {
    const auto [a, b] = pinned(8);
    const auto nu = nu_prime_sector(8, 2, a, b);
    EXPECT_EQ(nu.size(), 56u); // C(8, 3) strings with three ones
    for (const auto &[s, amp] : nu) {
        EXPECT_EQ(encoded_weight(s, 8), 3);
        EXPECT_TRUE(is_valid_c(s, 8));
    }
    EXPECT_TRUE(nu_prime_sector(4, 4, a, b).empty());
}

TEST(Preparation, GateCostGrowsLogarithmically) {
    const int k = 2;
    std::int64_t prev = 0;
    for (int m : {8, 16, 32, 64}) {
        const auto [a, b] = pinned(m);
        const auto g = preparation_gate_cost(m, k, q_bound(m, b, 1e-3));
        EXPECT_GT(g, prev);
        prev = g;
    }
}

// The literal six-step route and the closed form agree on the clean-flag
// component exactly and on the slot density with the flag traced out.
TEST(Cleanup, LiteralRouteMatchesClosedForm) {
    struct Case {
        int n;
        int k;
        long q;
        double b2;
    };
    for (const Case &c : {Case{4, 1, 8, 0.1}, Case{4, 2, 8, 0.2}, Case{8, 2, 16, 0.05},
                          Case{2, 2, 4, 0.3}}) {
        const double a = std::sqrt(1 - c.b2);
        const double b = std::sqrt(c.b2);
        const CleanupLayout lay{c.n, c.k, c.q};
        const SparseState lit = prepare_literal(c.n, c.k, c.q, a, b);
        const auto u = prepare_controls(c.n, c.k, c.q, a, b);
        EXPECT_NEAR(lit.squared_norm(), 1.0, 1e-12);
        EXPECT_LT(slot_distance(clean_component(lit, lay), u.clean), 1e-12)
            << c.n << " " << c.k << " " << c.q;
        const auto keys = legal_keys(c.n, c.k);
        EXPECT_LT((slot_density(lit, lay, keys) - slot_density(u, keys)).norm(), 1e-12);
    }
}

TEST(Cleanup, ZeroTrailingSectorIsExact) {
    // a string ending in a one has t = 0 and an exact clean flag
    const double a = std::sqrt(0.8);
    const double b = std::sqrt(0.2);
    const CleanupLayout lay{4, 2, 8};
    const SparseState lit = prepare_literal(4, 2, 8, a, b);
    const Slots key = encode_c(bits_from_string("0101"), 2);
    const auto clean = clean_component(lit, lay);
    EXPECT_NEAR(std::abs(clean.at(key) - a * a * b * b), 0.0, 1e-12);
    for (const auto &[d, amp] : lit.amps()) {
        if (Slots(d.begin(), d.begin() + 3) == key && d[3] != 0) {
            EXPECT_LT(std::abs(amp), 1e-12);
        }
    }
}

TEST(Cleanup, NuPrimePassesThrough) {
    const double a = std::sqrt(0.7);
    const double b = std::sqrt(0.3);
    const CleanupLayout lay{4, 1, 8};
    const SparseState lit = prepare_literal(4, 1, 8, a, b);
    const auto clean = clean_component(lit, lay);
    for (const auto &[s, amp] : nu_prime_sector(4, 1, a, b)) {
        EXPECT_NEAR(std::abs(clean.at(s) - amp), 0.0, 1e-12);
    }
}

TEST(Cleanup, RejectsSmallQ) {
    const CleanupLayout lay{8, 1, 4};
    EXPECT_THROW(cleanup_convert(encoded_zero(lay), lay, 0.9, std::sqrt(0.19)),
                 ContractViolation);
}

TEST(Perturbation, KeepsNormAndMovesByEps) {
    const auto [a, b] = pinned(8);
    const auto u = prepare_controls(8, 3, 1024, a, b);
    for (double eps : {1e-4, 1e-2}) {
        const auto v = perturb_preparation(u, eps, 17);
        EXPECT_NEAR(v.squared_norm(), 1.0, 1e-12);
        EXPECT_NEAR(slot_distance(v.clean, u.clean), 2 * std::sin(eps / 2), 1e-6);
        for (const auto &[s, amp] : v.clean) {
            EXPECT_TRUE(is_valid_c(s, 8));
        }
    }
}
