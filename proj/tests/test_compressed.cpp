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

#include "fqsim/compressed.hpp"

using namespace fqsim;

namespace {

double phase_free_distance(const Vector &a, const Vector &b) {
    const cplx overlap = b.dot(a);
    const cplx phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : cplx(1.0);
    return (a - phase * b).norm();
}

Vector random_vec(Eigen::Index dim, std::uint64_t seed) {
    CounterRng rng(seed);
    return random_state(dim, rng);
}

// <b|R^{⊗n}|x> with R = [[a, b], [b, -a]]
double r_product(const BitString &b, const BitString &x, double alpha, double beta) {
    double v = 1.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i] == 0 && x[i] == 0) {
            v *= alpha;
        } else if (b[i] == 1 && x[i] == 1) {
            v *= -alpha;
        } else {
            v *= beta;
        }
    }
    return v;
}

BitString bits_of(std::uint32_t mask, int m) {
    BitString x(static_cast<std::size_t>(m), 0);
    for (int p = 0; p < m; ++p) {
        x[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>((mask >> (m - 1 - p)) & 1U);
    }
    return x;
}

std::vector<int> ones_of(const BitString &x) {
    std::vector<int> out;
    for (std::size_t p = 0; p < x.size(); ++p) {
        if (x[p]) {
            out.push_back(static_cast<int>(p));
        }
    }
    return out;
}

} // namespace

TEST(CompressionParams, ChooseParamsDeskExample) {
    const ChosenParams c = choose_params(1.0, 1.0, 0.1);
    EXPECT_EQ(c.params.m, 16);
    EXPECT_EQ(c.params.k, 2);
    EXPECT_EQ(c.params.kprime, 1);
    EXPECT_EQ(c.params.q, 1024);
    EXPECT_EQ(c.segments, 4);
    EXPECT_NEAR(c.params.eps_prime, 0.025, 1e-15);
    EXPECT_NEAR(c.params.eps, 0.025 / 4.0, 1e-15);
    const double b2 = c.params.beta * c.params.beta;
    EXPECT_LE(TailDecomposition::of(16, c.params.k, c.params.alpha, c.params.beta).mu_sq,
              c.params.eps);
    EXPECT_GT(binomial_tail(16, b2, c.params.k - 1), c.params.eps);
}

TEST(CompressionParams, Monotone) {
    for (double h : {0.5, 1.0, 2.0}) {
        const auto a = choose_params(1.0, h, 0.1);
        const auto b = choose_params(1.0, 2.0 * h, 0.1);
        EXPECT_GE(b.params.m, 2 * a.params.m);
        const auto c = choose_params(1.0, h, 0.05);
        EXPECT_LE(c.params.eps_prime, a.params.eps_prime / 2.0 + 1e-15);
        EXPECT_LE(c.params.eps, a.params.eps / 2.0 + 1e-15);
    }
    EXPECT_THROW(choose_params(1.0, 1.0, 0.0), ContractViolation);
    EXPECT_THROW(choose_params(1.0, 100.0, 0.01), InfeasibleParams);
}

TEST(CompressedPhase, MatchesProductOfPhaseGates) {
    const int m = 8;
    const int k = 3;
    const Matrix p = p_gate(+1);
    for (const auto &x : strings_up_to_weight(m, k)) {
        Branch b;
        Vector t(1);
        t(0) = 1.0;
        b.amps.emplace(to_key(encode_c(x, k)), t);
        b.pending.push_back({0, m});
        apply_phase_compressed(b, k + 1);
        cplx expect = 1.0;
        for (auto bit : x) {
            expect *= p(bit, bit);
        }
        EXPECT_LT(std::abs(b.amps.begin()->second(0) - expect), 1e-15);
    }
}

TEST(CompressedDrive, SentinelsGiveOneWindowAndOneOneGivesOneQuery) {
    const auto x = OracleString::parse("0110");
    const auto params = CompressionParams::pinned(8, 2, 2, 64);
    const auto h = builtin_drives::random_constant(4, 1.0, 3, 1.0);
    CompressedContext ctx(params, h, x, nullptr);
    const Matrix whole = drive_query_unitary(ctx, {}, {});
    EXPECT_LT(operator_norm(whole - expm_hermitian(h.at(0.0), 0.25)), 1e-10);

    CompressedContext flat(params, builtin_drives::zero(4, 1.0), x, nullptr);
    const Matrix q = x.linear_combination(0.0, 1.0);
    for (int p = 0; p < 8; ++p) {
        EXPECT_LT(operator_norm(drive_query_unitary(flat, {}, {p}) - q), 1e-15);
    }
    // with a drive the single query sits between windows E(0, p+1) and E(p+1, m)
    const Matrix u = drive_query_unitary(ctx, {}, {2});
    const Matrix expect = expm_hermitian(h.at(0.0), 5.0 / 32.0) * q *
                          expm_hermitian(h.at(0.0), 3.0 / 32.0);
    EXPECT_LT(operator_norm(u - expect), 1e-10);
}

TEST(CompressedDrive, IllegalSlotsAreEncoderBugs) {
    const auto x = OracleString::parse("01");
    CompressedContext ctx(CompressionParams::pinned(4, 1, 2, 8), builtin_drives::zero(2, 1.0), x,
                          nullptr);
    Branch b;
    b.amps.emplace(to_key({4, 0}), Vector::Ones(2));
    b.pending.push_back({0, 4});
    EXPECT_THROW(apply_drive_queries_compressed(b, ctx, {}), EncoderBug);
}

TEST(CompressedMeasurement, EncodedZeroGivesNoOnes) {
    const auto params = CompressionParams::pinned(8, 3, 3, 2048);
    ControlBank bank(params);
    Vector t = random_vec(3, 4);
    Branch start = prepared_branch(bank.at(8).clean, t, 8);
    const auto e = measure_compressed_exhaustive(start, bank, params);
    double empty = 0.0;
    for (const auto &leaf : e.leaves) {
        if (leaf.trace.ones.empty() && !leaf.trace.flag_dirty) {
            empty += leaf.squared_norm();
            EXPECT_EQ(leaf.trace.steps, 1);
        }
    }
    EXPECT_NEAR(empty, start.squared_norm(), 1e-12);
}

// Algorithm-level equivalence: compressed recursive measurement with k = m
// against the R^{⊗m} projections of an arbitrary joint state.
TEST(CompressedMeasurement, ExactlyMatchesUncompressedProjections) {
    const int m = 8;
    const auto params = CompressionParams::pinned(m, m, m, 2048);
    ControlBank bank(params);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        CounterRng rng(seed + 100);
        std::map<std::uint32_t, Vector> w;
        Branch start;
        start.pending.push_back({0, m});
        double norm2 = 0.0;
        for (std::uint32_t mask = 0; mask < (1U << m); ++mask) {
            Vector v = random_gaussian_matrix(2, 1, rng).col(0);
            w[mask] = v;
            norm2 += v.squaredNorm();
            start.amps.emplace(to_key(encode_c(bits_of(mask, m), m)), v);
        }
        for (auto &[key, v] : start.amps) {
            v /= std::sqrt(norm2);
        }
        const auto e = measure_compressed_exhaustive(start, bank, params);
        const auto got = ensemble_of(e.leaves, m, m);
        OutcomeEnsemble ref;
        ref.alphabet = outcome_alphabet(m, m);
        for (std::uint32_t bm = 0; bm < (1U << m); ++bm) {
            const BitString b = bits_of(bm, m);
            Vector t = Vector::Zero(2);
            for (const auto &[xm, v] : w) {
                t += r_product(b, bits_of(xm, m), params.alpha, params.beta) * v;
            }
            t /= std::sqrt(norm2);
            ref.add(outcome_label(ones_of(b), m, m), t * t.adjoint());
        }
        for (const auto &[label, a] : ref.weighted) {
            const double pu = a.trace().real();
            const double pc = got.probability(label);
            EXPECT_NEAR(pu, pc, 1e-9) << label;
            if (pu > 1e-6) {
                EXPECT_LT(trace_distance(a / pu, got.weighted.at(label) / pc), 1e-9) << label;
            }
        }
        EXPECT_NEAR(got.total(), 1.0, 1e-10);
    }
}

TEST(CompressedSegment, MatchesUncompressedSegmentExactly) {
    const int m = 8;
    const auto params = CompressionParams::pinned(m, m, m, 2048);
    const auto x = OracleString::parse("0110");
    const auto h = builtin_drives::random_constant(4, 1.0, 9, 1.0);
    const Vector t = random_vec(4, 17);
    CompressedContext cctx(params, h, x, nullptr);
    SegmentContext uctx(params.segment(0.0), h, x);
    SegmentProgram inv;
    inv.direction = -1;
    inv.reversed = true;
    inv.corrections = {{1, 0.3}, {6, -0.2}};
    for (const SegmentProgram &prog : {SegmentProgram{}, inv}) {
        double dropped = 0.0;
        const auto c = compressed_segment_ensemble(t, cctx, prog, &dropped);
        const auto u = uncompressed_segment_ensemble(t, uctx, prog, m);
        const ErrorMetrics e = compute_error_metrics(u, c);
        EXPECT_LT(e.d_av, 1e-9);
        EXPECT_LE(dropped, kCompressedDiscardBudget);
    }
}

// Truncation after k' ones costs O(eps') in D_av; c = 50 is the measured
// constant with headroom.
TEST(CompressedSegment, TruncatedEnsembleErrorTracksTail) {
    const int m = 8;
    const auto x = OracleString::parse("1010");
    const auto h = builtin_drives::random_constant(4, 1.0, 10, 1.0);
    const Vector t = random_vec(4, 18);
    double prev = 1.0;
    for (int kp : {2, 3, 4}) {
        const auto params = CompressionParams::pinned(m, 4, kp, 1024);
        CompressedContext cctx(params, h, x, nullptr);
        SegmentContext uctx(params.segment(0.0), h, x);
        const auto c = compressed_segment_ensemble(t, cctx);
        const auto u = uncompressed_segment_ensemble(t, uctx, {}, kp);
        const ErrorMetrics e = compute_error_metrics(u, c);
        EXPECT_LE(e.delta_p, e.d_av + 1e-10);
        EXPECT_LE(e.d_bar, e.d_av + 1e-10);
        EXPECT_LT(e.d_av, prev);
        EXPECT_LE(e.d_av, 50.0 * (params.eps_prime + params.eps * kp * std::log2(m)));
        prev = e.d_av;
    }
}

TEST(CompressedSegment, SampledTracesRespectStepBoundAndQueryCap) {
    const auto params = CompressionParams::pinned(16, 3, 2, 1024);
    const auto x = OracleString::parse("0111");
    const auto h = builtin_drives::random_constant(4, 1.0, 11, 1.0);
    CompressedContext ctx(params, h, x, nullptr);
    const Vector t = random_vec(4, 19);
    int successes = 0;
    double ones = 0.0;
    const int trials = 400;
    for (int i = 0; i < trials; ++i) {
        CounterRng rng(CounterRng::derive(5, static_cast<std::uint64_t>(i)));
        const auto r = run_segment_compressed(t, ctx, {}, rng);
        EXPECT_TRUE(r.trace.within_step_bound(params.m));
        EXPECT_LE(r.issued_queries, params.kprime);
        EXPECT_EQ(r.resources.queries, params.kprime);
        if (r.trace.truncated) {
            EXPECT_EQ(static_cast<int>(r.trace.ones.size()), params.kprime);
        }
        successes += r.success ? 1 : 0;
        ones += static_cast<double>(r.trace.ones.size());
        EXPECT_NEAR(r.post_state.amps().norm(), 1.0, 1e-12);
    }
    const double p = static_cast<double>(successes) / trials;
    EXPECT_GE(p, 0.75 - 3.0 * std::sqrt(0.75 * 0.25 / trials));
    EXPECT_LE(ones / trials, 4.0 * params.beta * params.beta * params.m + 0.2);
}

TEST(CompressedSegment, DeterministicForSeed) {
    const auto params = CompressionParams::pinned(8, 2, 2, 256);
    const auto x = OracleString::parse("01");
    const auto h = builtin_drives::random_constant(2, 1.0, 12, 1.0);
    CompressedContext ctx(params, h, x, nullptr);
    const Vector t = random_vec(2, 20);
    for (int i = 0; i < 20; ++i) {
        CounterRng a(i);
        CounterRng b(i);
        const auto ra = run_segment_compressed(t, ctx, {}, a);
        const auto rb = run_segment_compressed(t, ctx, {}, b);
        EXPECT_EQ(ra.trace.d_sequence, rb.trace.d_sequence);
        EXPECT_EQ((ra.post_state.amps() - rb.post_state.amps()).norm(), 0.0);
    }
}

TEST(CompressedFullRun, ZeroDriveRecoversTarget) {
    const auto x = OracleString::parse("0000");
    const auto drive = builtin_drives::zero(4, 0.25);
    const PureState tgt(target_layout(4), random_vec(4, 21));
    const auto params = CompressionParams::pinned(8, 2, 2, 256);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto out = run_full_compressed(tgt, drive, x, 0.25, params, seed);
        EXPECT_EQ(out.resources.segments, 1);
        if (out.completed) {
            EXPECT_LT(phase_free_distance(out.state.amps(), tgt.amps()), 1e-6);
        }
    }
}

TEST(CompressedFullRun, CommutingInstanceFidelity) {
    const auto x = OracleString::parse("0110");
    RealVector d(4);
    d << 0.3, -0.5, 0.9, 0.1;
    const auto drive = builtin_drives::diagonal(d, 1.0);
    const PureState tgt(target_layout(4), random_vec(4, 22));
    const auto exact = exact_total_evolution(tgt, "target", drive, x, 1.0);
    const auto chosen = choose_params(1.0, drive.norm_bound, 0.1);
    int kept = 0;
    double fid = 0.0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto out = run_full_compressed(tgt, drive, x, 1.0, chosen.params, seed);
        EXPECT_LE(out.resources.queries, 8LL * chosen.params.kprime * (4 + out.resources.correction_attempts));
        if (!out.completed) {
            continue;
        }
        ++kept;
        fid += std::norm(exact.amps().dot(out.state.amps()));
    }
    ASSERT_GT(kept, 30);
    EXPECT_GE(fid / kept, 0.9);
}

TEST(ErrorMetrics, HandBuiltTwoOutcomeEnsemble) {
    OutcomeEnsemble u;
    OutcomeEnsemble c;
    u.alphabet = c.alphabet = "toy";
    Matrix zero(2, 2);
    zero << 1, 0, 0, 0;
    Matrix one(2, 2);
    one << 0, 0, 0, 1;
    Matrix plus(2, 2);
    plus << 0.5, 0.5, 0.5, 0.5;
    u.add("a", 0.6 * zero);
    u.add("b", 0.4 * one);
    c.add("a", 0.5 * plus);
    c.add("b", 0.5 * one);
    // 0.6|0><0| - 0.5|+><+| has eigenvalues (0.1 +- sqrt(0.61)) / 2
    const ErrorMetrics e = compute_error_metrics(u, c);
    EXPECT_NEAR(e.d_av, std::sqrt(0.61) + 0.1, 1e-12);
    EXPECT_NEAR(e.delta_p, 0.2, 1e-12);
    EXPECT_NEAR(e.d_bar, 0.5 * std::sqrt(0.5), 1e-12);
    const ErrorMetrics same = compute_error_metrics(u, u);
    EXPECT_EQ(same.d_av, 0.0);
    EXPECT_EQ(same.delta_p, 0.0);
    EXPECT_EQ(same.d_bar, 0.0);
    OutcomeEnsemble other = c;
    other.alphabet = "other";
    EXPECT_THROW(compute_error_metrics(u, other), ContractViolation);
}

TEST(ErrorMetrics, MissingUncompressedOutcomeCountsFully) {
    OutcomeEnsemble u;
    OutcomeEnsemble c;
    u.alphabet = c.alphabet = "toy";
    Matrix one(1, 1);
    one << 1.0;
    u.add("a", one);
    c.add("a", 0.9 * one);
    c.add("b", 0.1 * one);
    const ErrorMetrics e = compute_error_metrics(u, c);
    EXPECT_NEAR(e.d_av, 0.2, 1e-15);
    EXPECT_NEAR(e.d_bar, 0.1, 1e-15);
}

TEST(OutcomeLabel, TruncatesAtKPrime) {
    EXPECT_EQ(outcome_label({}, 4, 2), "0000");
    EXPECT_EQ(outcome_label({2}, 4, 2), "0010");
    EXPECT_EQ(outcome_label({3, 0, 1}, 4, 2), "trunc:0,1");
}
