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
#include <map>
#include <set>

#include <unsupported/Eigen/KroneckerProduct>

#include "fqsim/uncompressed.hpp"

using namespace fqsim;

namespace {

double phase_free_distance(const Vector &a, const Vector &b) {
    const cplx overlap = b.dot(a);
    const cplx phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : cplx(1.0);
    return (a - phase * b).norm();
}

PureState random_target(std::size_t dim, std::uint64_t seed) {
    CounterRng rng(seed);
    return PureState(target_layout(dim), random_state(static_cast<Eigen::Index>(dim), rng));
}

} // namespace

TEST(SegmentParams, PinnedBetaGivesExactStepAngle) {
    for (int m : {1, 2, 8, 64}) {
        auto p = SegmentParams::pinned_for(m);
        EXPECT_NO_THROW(p.validate());
        EXPECT_NEAR(p.theta(), 1.0 / (8.0 * m), 1e-15);
    }
    EXPECT_THROW(SegmentParams::pinned_for(3), ContractViolation);
}

TEST(SegmentParams, ForcedSuccessProbability) {
    auto p = SegmentParams::with_success_probability(8, 0.75);
    EXPECT_NEAR(p.segment_success(), 0.75, 1e-12);
    EXPECT_NEAR(p.alpha * p.alpha + p.beta * p.beta, 1.0, 1e-15);
    EXPECT_THROW(SegmentParams::with_success_probability(8, 1.5), ContractViolation);
}

TEST(Kraus, ProportionalToUnitariesWithStateIndependentWeights) {
    auto params = SegmentParams::with_success_probability(4, 0.6);
    auto x = OracleString::parse("0110");
    SegmentContext ctx(params, builtin_drives::zero(4, 1.0), x);
    for (int dir : {+1, -1}) {
        const Matrix k0 = ctx.kraus(dir, 0);
        const Matrix k1 = ctx.kraus(dir, 1);
        const double w0 = std::sqrt(params.step_success());
        const double w1 = std::sqrt(2.0) * params.alpha * params.beta;
        EXPECT_LT((k0 - w0 * ctx.step_unitary(dir, 0)).norm(), 1e-14);
        EXPECT_LT((k1 - w1 * ctx.step_unitary(dir, 1)).norm(), 1e-14);
        const Matrix sum = k0.adjoint() * k0 + k1.adjoint() * k1;
        EXPECT_LT((sum - Matrix::Identity(4, 4)).norm(), 1e-14);
    }
}

// Hand-built m = 2 circuit on one control pair and a one-bit oracle, using
// plain 2x2 algebra, against the generic dense circuit.
TEST(DenseSegment, TwoStepsAgainstHandBuiltCircuit) {
    const double a = 0.8;
    const double b = 0.6;
    SegmentParams params;
    params.m = 2;
    params.alpha = a;
    params.beta = b;
    params.pinned = false;
    auto x = OracleString::parse("1");
    SegmentContext ctx(params, builtin_drives::zero(1, 1.0), x);
    Vector target(1);
    target(0) = 1.0;
    auto branches = dense_segment_branches(target, ctx, {});
    ASSERT_EQ(branches.size(), 4u);
    // Q = -1: per control the state is a|0> - i b|1> after P R and the
    // controlled phase; final R gives <0| = a^2 - i b^2 ... sign by hand:
    // (a, -i b) -> R -> (a*a + b*(-i b), b*a - a*(-i b)) = (a^2 - i b^2, a b + i a b)
    const cplx amp0(a * a, -b * b);
    const cplx amp1(a * b, a * b);
    const cplx expect[4] = {amp0 * amp0, amp0 * amp1, amp1 * amp0, amp1 * amp1};
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(std::abs(branches[static_cast<std::size_t>(i)](0) - expect[i]), 0.0, 1e-14)
            << i;
    }
}

TEST(DenseSegment, MatchesStreamedBranchesAndSamples) {
    auto params = SegmentParams::with_success_probability(4, 0.7, 0.25);
    auto x = OracleString::parse("0110");
    auto drive = builtin_drives::random_constant(4, 2.0, 11, 1.0);
    SegmentContext ctx(params, drive, x);
    const auto tgt = random_target(4, 5);
    for (bool reversed : {false, true}) {
        SegmentProgram prog;
        prog.reversed = reversed;
        prog.direction = reversed ? -1 : 1;
        prog.corrections[1] = 0.3;
        auto dense = dense_segment_branches(tgt.amps(), ctx, prog);
        double total = 0.0;
        for (std::size_t i = 0; i < dense.size(); ++i) {
            std::vector<std::uint8_t> bs(4);
            for (int p = 0; p < 4; ++p) {
                bs[static_cast<std::size_t>(p)] = (i >> (3 - p)) & 1U;
            }
            auto streamed = segment_branch_target(tgt.amps(), ctx, prog, bs);
            EXPECT_LT((streamed - dense[i]).norm(), 1e-12);
            total += dense[i].squaredNorm();
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CounterRng r1(seed);
        CounterRng r2(seed);
        auto a = run_segment_dense(tgt.amps(), ctx, {}, r1);
        auto b = run_segment_streamed(tgt.amps(), ctx, {}, r2);
        EXPECT_EQ(a.b, b.b);
        EXPECT_LT(phase_free_distance(a.post_state.amps(), b.post_state.amps()), 1e-10);
    }
}

TEST(Segment, SuccessBranchAtZeroDriveIsFractionalPower) {
    const int m = 8;
    auto params = SegmentParams::pinned_for(m);
    auto x = OracleString::parse("0110");
    SegmentContext ctx(params, builtin_drives::zero(4, 1.0), x);
    const auto tgt = random_target(4, 7);
    auto w = segment_branch_target(tgt.amps(), ctx, {}, std::vector<std::uint8_t>(m, 0));
    const Matrix step = x.linear_combination(params.alpha * params.alpha,
                                             kI * params.beta * params.beta);
    Vector expect = tgt.amps();
    for (int p = 0; p < m; ++p) {
        expect = step * expect;
    }
    EXPECT_LT((w - expect).norm(), 1e-14);
    // and up to normalization this is exp(-i H_Q / 4)
    auto exact = exact_total_evolution(tgt, "target", builtin_drives::zero(4, 1.0), x, 0.25);
    EXPECT_LT(phase_free_distance(w / w.norm(), exact.amps()), 1e-12);
}

TEST(Segment, SuccessFrequencyMatchesClosedForm) {
    auto params = SegmentParams::with_success_probability(8, 0.75);
    auto x = OracleString::parse("01");
    SegmentContext ctx(params, builtin_drives::walk(2, 1.0, 1.0), x);
    const auto tgt = random_target(2, 1);
    CounterRng rng(99);
    int ok = 0;
    const int trials = 4000;
    for (int i = 0; i < trials; ++i) {
        ok += run_segment_streamed(tgt.amps(), ctx, {}, rng).success ? 1 : 0;
    }
    const double sd = std::sqrt(0.75 * 0.25 / trials);
    EXPECT_NEAR(ok / static_cast<double>(trials), 0.75, 5 * sd);
}

TEST(Segment, PublicEntryPointIsSeedDeterministic) {
    auto params = SegmentParams::pinned_for(4);
    auto x = OracleString::parse("0110");
    auto drive = builtin_drives::random_constant(4, 1.0, 3, 1.0);
    auto tgt = random_target(4, 2);
    auto a = run_segment_uncompressed(tgt, params, drive, x, 42);
    auto b = run_segment_uncompressed(tgt, params, drive, x, 42);
    EXPECT_EQ(a.b, b.b);
    EXPECT_EQ(a.post_state.amps(), b.post_state.amps());
    EXPECT_EQ(a.resources.queries, 4);
}

TEST(InverseProgram, UndoesAnyOutcomeOnSuccess) {
    auto params = SegmentParams::with_success_probability(4, 0.6);
    auto x = OracleString::parse("0110");
    SegmentContext ctx(params, builtin_drives::random_constant(4, 1.5, 8, 1.0), x);
    const auto tgt = random_target(4, 3);
    for (unsigned mask = 0; mask < 16; ++mask) {
        std::vector<std::uint8_t> bs(4);
        std::vector<int> errs;
        for (int p = 0; p < 4; ++p) {
            bs[static_cast<std::size_t>(p)] = (mask >> p) & 1U;
            if (bs[static_cast<std::size_t>(p)]) {
                errs.push_back(p);
            }
        }
        SegmentProgram fwd;
        fwd.corrections[2] = 0.4;
        Vector after = segment_branch_target(tgt.amps(), ctx, fwd, bs);
        after.normalize();
        auto inv = inverse_program({fwd, errs}, params.theta());
        EXPECT_EQ(inv.direction, -1);
        EXPECT_TRUE(inv.reversed);
        Vector back = segment_branch_target(after, ctx, inv, std::vector<std::uint8_t>(4, 0));
        back.normalize();
        EXPECT_LT(phase_free_distance(back, tgt.amps()), 1e-12) << mask;
    }
}

TEST(Walk, EmptyErrorSetNeedsNoAttempts) {
    int calls = 0;
    auto out = correction_walk_generic({}, {}, 0.1,
                                       [&](const SegmentProgram &) {
                                           ++calls;
                                           return AttemptReport{true, {}};
                                       },
                                       64);
    EXPECT_TRUE(out.success);
    EXPECT_EQ(out.attempts, 0);
    EXPECT_EQ(calls, 0);
}

TEST(Walk, ScriptedSequenceFollowsStack) {
    // fail, fail, succeed (undo inner), succeed (undo first), succeed (redo)
    std::vector<AttemptReport> script = {{false, {1}}, {true, {}}, {true, {}}, {true, {}}};
    std::size_t i = 0;
    std::vector<SegmentProgram> seen;
    auto out = correction_walk_generic({}, {0}, 0.1,
                                       [&](const SegmentProgram &p) {
                                           seen.push_back(p);
                                           return script.at(i++);
                                       },
                                       64);
    EXPECT_TRUE(out.success);
    EXPECT_EQ(out.attempts, 4);
    ASSERT_EQ(seen.size(), 4u);
    EXPECT_EQ(seen[0].direction, -1);
    EXPECT_EQ(seen[1].direction, +1); // inverse of an inverse
    EXPECT_EQ(seen[2].direction, -1);
    EXPECT_EQ(seen[3], SegmentProgram{});
}

TEST(Walk, GivesUpAtBudget) {
    auto out = correction_walk_generic({}, {0}, 0.1,
                                       [](const SegmentProgram &) {
                                           return AttemptReport{false, {0}};
                                       },
                                       5);
    EXPECT_FALSE(out.success);
    EXPECT_EQ(out.attempts, 5);
}

TEST(Walk, RecoversIdealStateAtZeroDrive) {
    const int m = 8;
    auto params = SegmentParams::with_success_probability(m, 0.6);
    auto x = OracleString::parse("0110");
    auto drive = builtin_drives::zero(4, 1.0);
    SegmentContext ctx(params, drive, x);
    const auto tgt = random_target(4, 4);
    Vector ideal = segment_branch_target(tgt.amps(), ctx, {}, std::vector<std::uint8_t>(m, 0));
    ideal.normalize();
    int repaired = 0;
    for (std::uint64_t seed = 0; seed < 200 && repaired < 20; ++seed) {
        CounterRng rng(seed);
        auto first = run_segment_streamed(tgt.amps(), ctx, {}, rng);
        if (first.success) {
            continue;
        }
        auto w = correction_walk(first.post_state, ctx, first.ones(), rng, 200);
        ASSERT_TRUE(w.success);
        EXPECT_GE(w.attempts, 2);
        EXPECT_LT(phase_free_distance(w.state.amps(), ideal), 1e-9);
        ++repaired;
    }
    EXPECT_EQ(repaired, 20);
}

TEST(Walk, RecoversIdealStateWithNonCommutingDrive) {
    const int m = 4;
    auto params = SegmentParams::with_success_probability(m, 0.6, 0.5);
    auto x = OracleString::parse("01");
    auto drive = builtin_drives::walk(2, 1.3, 1.0);
    SegmentContext ctx(params, drive, x);
    const auto tgt = random_target(2, 9);
    Vector ideal = segment_branch_target(tgt.amps(), ctx, {}, std::vector<std::uint8_t>(m, 0));
    ideal.normalize();
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        CounterRng rng(seed);
        auto first = run_segment_streamed(tgt.amps(), ctx, {}, rng);
        if (first.success) {
            continue;
        }
        auto w = correction_walk(first.post_state, ctx, first.ones(), rng, 400);
        ASSERT_TRUE(w.success);
        EXPECT_LT(phase_free_distance(w.state.amps(), ideal), 1e-9);
    }
}

TEST(Walk, MeanAttemptsAtThreeQuarters) {
    // 1 + walk attempts has mean 1 / (2p - 1) = 2 for p = 3/4 when counted
    // over all segments (first attempt included).
    const int m = 4;
    auto params = SegmentParams::with_success_probability(m, 0.75);
    auto x = OracleString::parse("01");
    SegmentContext ctx(params, builtin_drives::zero(2, 1.0), x);
    const auto tgt = random_target(2, 1);
    CounterRng rng(2024);
    const int trials = 20000;
    double total = 0.0;
    for (int i = 0; i < trials; ++i) {
        auto first = run_segment_streamed(tgt.amps(), ctx, {}, rng);
        int n = 1;
        if (!first.success) {
            n += correction_walk(first.post_state, ctx, first.ones(), rng, 10000).attempts;
        }
        total += n;
    }
    const double sd = std::sqrt(6.0 / trials);
    EXPECT_NEAR(total / trials, 2.0, 5 * sd);
}

TEST(RecursiveMeasurement, MatchesDirectProductMeasurement) {
    const double a = std::sqrt(0.7);
    const double b = std::sqrt(0.3);
    const int n = 4;
    std::vector<Register> regs;
    std::vector<std::string> block;
    for (int i = 0; i < n; ++i) {
        block.push_back("c" + std::to_string(i));
        regs.push_back({block.back(), 2, RegisterRole::ControlUncompressed});
    }
    regs.push_back({"target", 3, RegisterRole::Target});
    RegisterLayout layout(regs);
    CounterRng rng(77);
    PureState joint(layout, random_state(static_cast<Eigen::Index>(layout.total_dim()), rng));
    auto leaves = recursive_measure_uncompressed_exhaustive(joint, block, a, b);
    // oracle: project controls onto R^{⊗n}|bits>
    const Matrix r = r_gate(a, b);
    Matrix rn = Matrix::Identity(1, 1);
    for (int i = 0; i < n; ++i) {
        rn = Eigen::kroneckerProduct(rn, r).eval();
    }
    std::map<unsigned, Vector> expect;
    for (unsigned bits = 0; bits < (1U << n); ++bits) {
        const Vector col = rn.col(bits);
        Matrix proj = col * col.adjoint();
        Matrix full = Eigen::kroneckerProduct(proj, Matrix::Identity(3, 3)).eval();
        expect[bits] = full * joint.amps();
    }
    double total = 0.0;
    std::set<unsigned> seen;
    for (const auto &leaf : leaves) {
        unsigned bits = 0;
        for (int p : leaf.trace.ones) {
            bits |= 1U << (n - 1 - p);
        }
        EXPECT_TRUE(seen.insert(bits).second);
        EXPECT_LT((leaf.state.amps() - expect[bits]).norm(), 1e-12) << bits;
        EXPECT_TRUE(leaf.trace.within_step_bound(n));
        total += leaf.state.norm_tag() * leaf.state.norm_tag();
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(RecursiveMeasurement, SampledFollowsExhaustiveAndTruncates) {
    const double a = std::sqrt(0.6);
    const double b = std::sqrt(0.4);
    std::vector<Register> regs;
    std::vector<std::string> block;
    for (int i = 0; i < 4; ++i) {
        block.push_back("c" + std::to_string(i));
        regs.push_back({block.back(), 2, RegisterRole::ControlUncompressed});
    }
    RegisterLayout layout(regs);
    CounterRng rng(5);
    PureState joint(layout, random_state(16, rng));
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        CounterRng r(seed);
        auto [trace, state] = recursive_measure_uncompressed(joint, block, a, b, r, 2);
        EXPECT_LE(trace.ones.size(), 2u);
        if (trace.ones.size() == 2) {
            EXPECT_TRUE(trace.truncated);
        }
        EXPECT_GT(state.norm_tag(), 0.0);
    }
    auto leaves = recursive_measure_uncompressed_exhaustive(joint, block, a, b, 2);
    double total = 0.0;
    for (const auto &leaf : leaves) {
        total += leaf.state.norm_tag() * leaf.state.norm_tag();
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(FullRun, ZeroDriveMatchesExactEvolution) {
    auto x = OracleString::parse("0110");
    auto drive = builtin_drives::zero(4, 1.0);
    auto tgt = random_target(4, 6);
    FullRunOptions opts;
    opts.m = 16;
    auto out = run_full_uncompressed(tgt, drive, x, 1.0, 0.1, 1234, opts);
    EXPECT_TRUE(out.completed);
    EXPECT_EQ(out.resources.segments, 4);
    auto exact = exact_total_evolution(tgt, "target", drive, x, 1.0);
    EXPECT_LT(phase_free_distance(out.state.amps(), exact.amps()), 1e-6);
}

TEST(FullRun, DriveErrorShrinksWithM) {
    auto x = OracleString::parse("0110");
    auto drive = builtin_drives::random_constant(4, 1.0, 21, 1.0);
    auto tgt = random_target(4, 8);
    auto exact = exact_total_evolution(tgt, "target", drive, x, 1.0);
    double prev = 1.0;
    for (int m : {4, 16, 64}) {
        FullRunOptions opts;
        opts.m = m;
        auto out = run_full_uncompressed(tgt, drive, x, 1.0, 0.1, 55, opts);
        ASSERT_TRUE(out.completed);
        const double err = phase_free_distance(out.state.amps(), exact.amps());
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 0.02);
}

TEST(FullRun, RejectsNonQuarterTime) {
    auto x = OracleString::parse("01");
    auto drive = builtin_drives::zero(2, 1.0);
    auto tgt = random_target(2, 1);
    EXPECT_THROW(run_full_uncompressed(tgt, drive, x, 0.3, 0.1, 1), ContractViolation);
}

TEST(ChooseM, PowerOfTwoCeiling) {
    EXPECT_EQ(choose_m(1.0, 1.0, 0.1), 16);
    EXPECT_EQ(choose_m(1.0, 1.0, 0.25), 4);
    EXPECT_EQ(choose_m(0.0, 1.0, 0.1), 1);
}
