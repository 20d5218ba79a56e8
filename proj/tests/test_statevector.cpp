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
#include <numeric>

#include "fqsim/statevector.hpp"

using namespace fqsim;

namespace {

RegisterLayout qubits(std::initializer_list<const char *> names) {
    std::vector<Register> regs;
    for (auto *n : names) {
        regs.push_back({n, 2, RegisterRole::Ancilla});
    }
    return RegisterLayout(regs);
}

PureState random_pure(const RegisterLayout &layout, CounterRng &rng) {
    return PureState(layout, random_state(static_cast<Eigen::Index>(layout.total_dim()), rng));
}

// Sum of singular values; independent of the eigenvalue route in the library.
double svd_trace_norm(const Matrix &a) {
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues().sum();
}

} // namespace

TEST(RegisterLayout, RejectsDuplicateNamesAndSmallDims) {
    EXPECT_THROW(RegisterLayout({{"a", 2}, {"a", 3}}), DimensionError);
    EXPECT_THROW(RegisterLayout({{"a", 1}}), DimensionError);
    EXPECT_NO_THROW(RegisterLayout({{"t", 1, RegisterRole::Target}}));
}

TEST(InitBasis, TwoQubitsZero) {
    auto s = init_basis(qubits({"a", "b"}), {0, 0});
    EXPECT_EQ(s.amps(), (Vector(4) << 1, 0, 0, 0).finished());
    EXPECT_DOUBLE_EQ(s.norm_tag(), 1.0);
}

TEST(InitBasis, Qutrit) {
    auto s = init_basis(RegisterLayout({{"q", 3}}), {2});
    EXPECT_EQ(s.amps(), (Vector(3) << 0, 0, 1).finished());
}

TEST(InitBasis, MixedRadixMatchesEnumeration) {
    RegisterLayout layout({{"a", 2}, {"b", 3}});
    // enumerate digits in lexicographic order; position in that order is the index
    std::size_t expected = 0;
    for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 3; ++b, ++expected) {
            auto s = init_basis(layout, {a, b});
            Eigen::Index hit = -1;
            s.amps().cwiseAbs().maxCoeff(&hit);
            EXPECT_EQ(static_cast<std::size_t>(hit), expected);
        }
    }
    auto s = init_basis(layout, {1, 2});
    EXPECT_EQ(s.amps()(5), cplx(1.0));
}

TEST(InitBasis, DigitOutOfRange) {
    EXPECT_THROW(init_basis(RegisterLayout({{"q", 3}}), {3}), DimensionError);
}

TEST(InitBasis, DenseCap) {
    std::vector<Register> regs;
    for (int i = 0; i < 23; ++i) {
        regs.push_back({"q" + std::to_string(i), 2});
    }
    std::vector<std::size_t> digits(23, 0);
    EXPECT_THROW(init_basis(RegisterLayout(regs), digits), InfeasibleParams);
}

TEST(ApplyUnitary, IdentityLeavesStateAlone) {
    CounterRng rng(1);
    auto s = random_pure(RegisterLayout({{"a", 2}, {"b", 3}}), rng);
    auto out = apply_unitary(s, UnitarySpec({"b"}, Matrix::Identity(3, 3)));
    EXPECT_LT((out.amps() - s.amps()).norm(), 1e-15);
}

TEST(ApplyUnitary, XOnAddressedQubit) {
    Matrix x(2, 2);
    x << 0, 1, 1, 0;
    auto s = init_basis(qubits({"a", "b"}), {0, 0});
    EXPECT_EQ(apply_unitary(s, UnitarySpec({"a"}, x)).amps()(2), cplx(1.0)); // |10>
    EXPECT_EQ(apply_unitary(s, UnitarySpec({"b"}, x)).amps()(1), cplx(1.0)); // |01>
}

TEST(ApplyUnitary, RandomThenAdjointRoundTrip) {
    CounterRng rng(2);
    RegisterLayout layout({{"a", 2}, {"b", 3}, {"c", 2}});
    for (int trial = 0; trial < 10; ++trial) {
        auto s = random_pure(layout, rng);
        Matrix u = random_unitary(6, rng);
        auto fwd = apply_unitary(s, UnitarySpec({"c", "b"}, u));
        EXPECT_NEAR(fwd.norm_tag(), 1.0, 1e-12);
        auto back = apply_unitary(fwd, UnitarySpec({"c", "b"}, u.adjoint()));
        EXPECT_LT((back.amps() - s.amps()).norm(), 1e-12);
    }
}

TEST(ApplyUnitary, RegisterOrderMatchesKronecker) {
    CounterRng rng(3);
    RegisterLayout layout({{"a", 2}, {"b", 3}});
    auto s = random_pure(layout, rng);
    Matrix ua = random_unitary(2, rng);
    Matrix ub = random_unitary(3, rng);
    // kron(ua, ub) on the full vector
    Matrix kron(6, 6);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            kron.block(3 * i, 3 * j, 3, 3) = ua(i, j) * ub;
        }
    }
    auto out = apply_unitary(apply_unitary(s, UnitarySpec({"a"}, ua)), UnitarySpec({"b"}, ub));
    EXPECT_LT((out.amps() - kron * s.amps()).norm(), 1e-12);
}

TEST(ApplyUnitary, RejectsNonUnitaryAndBadShapes) {
    Matrix m = Matrix::Ones(2, 2);
    EXPECT_THROW(UnitarySpec({"a"}, m), ContractViolation);
    auto s = init_basis(qubits({"a"}), {0});
    EXPECT_THROW(apply_unitary(s, UnitarySpec({"a"}, Matrix::Identity(3, 3))), DimensionError);
    EXPECT_THROW(apply_unitary(s, UnitarySpec({"z"}, Matrix::Identity(2, 2))), DimensionError);
}

TEST(Measure, ZeroStateGivesOutcomeZero) {
    auto s = init_basis(qubits({"a"}), {0});
    auto r = measure(s, computational_projectors(s.layout(), "a"), 7);
    EXPECT_EQ(r.outcome, 0u);
    EXPECT_DOUBLE_EQ(r.probability, 1.0);
}

TEST(Measure, PlusStateIsFair) {
    Vector v(2);
    v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    PureState s(qubits({"a"}), v);
    auto probs = outcome_probabilities(s, computational_projectors(s.layout(), "a"));
    EXPECT_NEAR(probs[0], 0.5, 1e-15);
    EXPECT_NEAR(probs[1], 0.5, 1e-15);
}

TEST(Measure, CompletenessAndCollapseConsistency) {
    CounterRng rng(4);
    RegisterLayout layout({{"a", 3}, {"b", 2}});
    for (int trial = 0; trial < 20; ++trial) {
        auto s = random_pure(layout, rng);
        // random rank-1 / rank-2 split of the qutrit
        Matrix u = random_unitary(3, rng);
        Matrix p0 = u.col(0) * u.col(0).adjoint();
        Matrix p1 = Matrix::Identity(3, 3) - p0;
        std::vector<ProjectorSpec> projs{ProjectorSpec({"a"}, p0), ProjectorSpec({"a"}, p1)};
        auto probs = outcome_probabilities(s, projs);
        EXPECT_NEAR(probs[0] + probs[1], 1.0, 1e-10);
        auto r = measure(s, projs, rng);
        EXPECT_NEAR(r.collapsed.norm_tag() * r.collapsed.norm_tag(), r.probability, 1e-12);
        auto again = outcome_probabilities(r.collapsed, projs);
        EXPECT_NEAR(again[r.outcome], 1.0, 1e-10);
    }
}

TEST(Measure, DeterministicGivenSeed) {
    CounterRng rng(5);
    auto s = random_pure(qubits({"a", "b", "c"}), rng);
    auto projs = computational_projectors(s.layout(), "b");
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        EXPECT_EQ(measure(s, projs, seed).outcome, measure(s, projs, seed).outcome);
    }
}

TEST(Measure, ProjectorsMustSumToIdentity) {
    auto s = init_basis(qubits({"a"}), {0});
    Matrix p0 = Matrix::Zero(2, 2);
    p0(0, 0) = 1.0;
    EXPECT_THROW(measure(s, {ProjectorSpec({"a"}, p0)}, 1), ContractViolation);
    EXPECT_THROW(ProjectorSpec({"a"}, Matrix::Ones(2, 2)), ContractViolation);
}

TEST(ReducedDensity, ProductStateIsRankOne) {
    CounterRng rng(6);
    auto a = PureState(qubits({"a"}), random_state(2, rng));
    auto b = PureState(RegisterLayout({{"b", 3}}), random_state(3, rng));
    auto rho = reduced_density(tensor(a, b), {"a"});
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
    EXPECT_NEAR(es.eigenvalues()(0), 0.0, 1e-12);
    EXPECT_NEAR(es.eigenvalues()(1), 1.0, 1e-12);
}

TEST(ReducedDensity, BellPairIsMaximallyMixed) {
    Vector v = Vector::Zero(4);
    v(0) = v(3) = 1.0 / std::sqrt(2.0);
    PureState bell(qubits({"a", "b"}), v);
    auto rho = reduced_density(bell, {"b"});
    EXPECT_LT((rho - Matrix::Identity(2, 2) / 2.0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReducedDensity, TraceIsSquaredNormForBranches) {
    CounterRng rng(7);
    RegisterLayout layout({{"a", 2}, {"b", 3}, {"c", 2}});
    for (int trial = 0; trial < 10; ++trial) {
        auto s = random_pure(layout, rng);
        auto r = measure(s, computational_projectors(layout, "b"), rng);
        auto rho = reduced_density(r.collapsed, {"c", "a"});
        EXPECT_NEAR(rho.trace().real(), r.probability, 1e-12);
        Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
        EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12);
    }
}

TEST(ReducedDensity, FullSetIsProjector) {
    CounterRng rng(8);
    RegisterLayout layout({{"a", 2}, {"b", 3}});
    auto s = random_pure(layout, rng);
    auto rho = reduced_density(s, {"a", "b"});
    EXPECT_LT((rho - s.amps() * s.amps().adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(reduced_density(s, {}), ContractViolation);
}

TEST(TraceDistance, Basics) {
    CounterRng rng(9);
    Vector a = random_state(3, rng);
    Matrix rho = a * a.adjoint();
    EXPECT_NEAR(trace_distance(rho, rho), 0.0, 1e-15);
    Matrix p0 = Matrix::Zero(2, 2);
    Matrix p1 = Matrix::Zero(2, 2);
    p0(0, 0) = 1.0;
    p1(1, 1) = 1.0;
    EXPECT_NEAR(trace_distance(p0, p1), 1.0, 1e-15);
    EXPECT_THROW(trace_distance(p0, Matrix::Ones(3, 3)), DimensionError);
    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 1) = 1.0;
    EXPECT_THROW(trace_distance(bad, p0), ContractViolation);
}

TEST(TraceDistance, MatchesSingularValueOracle) {
    CounterRng rng(10);
    for (int trial = 0; trial < 25; ++trial) {
        Matrix a = random_hermitian(4, 1.0 + trial * 0.1, rng);
        Matrix b = random_hermitian(4, 0.5, rng);
        EXPECT_NEAR(trace_distance(a, b), 0.5 * svd_trace_norm(a - b), 1e-12);
        EXPECT_NEAR(trace_distance(a, b), trace_distance(b, a), 1e-14);
    }
}

TEST(Contract, InsertProductRoundTrip) {
    CounterRng rng(11);
    RegisterLayout layout({{"a", 2}, {"t", 3}, {"b", 2}});
    Vector r = random_state(4, rng);
    PureState rest(layout.subset({"t"}), random_state(3, rng));
    auto joint = insert_product(layout, {"a", "b"}, r, rest);
    auto back = contract(joint, {"a", "b"}, r);
    EXPECT_LT((back.amps() - rest.amps()).norm(), 1e-12);
}
