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
 * Dense pure states over ordered registers of arbitrary finite dimension.
 *
 * Indexing is mixed radix with the first register most significant, so for
 * a layout [2, 3] the digits (1, 2) address amplitude 1 * 3 + 2 = 5.
 * Post-measurement branches are not renormalized: `PureState::norm_tag()`
 * carries the branch norm instead.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fqsim/errors.hpp"
#include "fqsim/linalg.hpp"
#include "fqsim/rng.hpp"

namespace fqsim {

enum class RegisterRole {
    ControlCompressed,
    ControlUncompressed,
    Target,
    Time,
    Ancilla,
    ErrorFlag,
    ResultTag,
};

struct Register {
    std::string name;
    std::size_t dim = 2;
    RegisterRole role = RegisterRole::Ancilla;
};

/// Largest total dimension a dense PureState may allocate.
inline constexpr std::size_t kDenseDimensionCap = std::size_t{1} << 22;

/**
 * Ordered list of named registers. Names are unique; every register has
 * dimension >= 2 except target registers, which may be one-dimensional
 * (a length-1 oracle).
 */
class RegisterLayout {
  public:
    RegisterLayout() = default;
    explicit RegisterLayout(std::vector<Register> regs) : regs_(std::move(regs)) {
        std::unordered_set<std::string> seen;
        for (const auto &r : regs_) {
            if (!seen.insert(r.name).second) {
                throw DimensionError("duplicate register name '" + r.name + "'");
            }
            const std::size_t min_dim = r.role == RegisterRole::Target ? 1 : 2;
            if (r.dim < min_dim) {
                throw DimensionError("register '" + r.name +
                                     "' has dimension below the minimum");
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return regs_.size(); }
    [[nodiscard]] const Register &operator[](std::size_t i) const { return regs_[i]; }
    [[nodiscard]] const std::vector<Register> &registers() const { return regs_; }

    [[nodiscard]] std::size_t index_of(const std::string &name) const {
        for (std::size_t i = 0; i < regs_.size(); ++i) {
            if (regs_[i].name == name) {
                return i;
            }
        }
        throw DimensionError("no register named '" + name + "'");
    }
    [[nodiscard]] bool contains(const std::string &name) const {
        return std::any_of(regs_.begin(), regs_.end(),
                           [&](const Register &r) { return r.name == name; });
    }
    [[nodiscard]] std::size_t dim(const std::string &name) const {
        return regs_[index_of(name)].dim;
    }

    /// Product of dims; saturates at SIZE_MAX.
    [[nodiscard]] std::size_t total_dim() const {
        std::size_t total = 1;
        for (const auto &r : regs_) {
            if (total > SIZE_MAX / r.dim) {
                return SIZE_MAX;
            }
            total *= r.dim;
        }
        return total;
    }

    [[nodiscard]] std::vector<std::size_t> strides() const {
        std::vector<std::size_t> s(regs_.size(), 1);
        for (std::size_t i = regs_.size(); i-- > 1;) {
            s[i - 1] = s[i] * regs_[i].dim;
        }
        return s;
    }

    [[nodiscard]] std::size_t flat_index(std::span<const std::size_t> digits) const {
        if (digits.size() != regs_.size()) {
            throw DimensionError("digit count does not match layout");
        }
        std::size_t idx = 0;
        for (std::size_t i = 0; i < regs_.size(); ++i) {
            if (digits[i] >= regs_[i].dim) {
                throw DimensionError("digit out of range for register '" +
                                     regs_[i].name + "'");
            }
            idx = idx * regs_[i].dim + digits[i];
        }
        return idx;
    }

    [[nodiscard]] std::vector<std::size_t> digits_of(std::size_t idx) const {
        std::vector<std::size_t> d(regs_.size());
        for (std::size_t i = regs_.size(); i-- > 0;) {
            d[i] = idx % regs_[i].dim;
            idx /= regs_[i].dim;
        }
        return d;
    }

    /// Names of the registers not in `names`, in layout order.
    [[nodiscard]] std::vector<std::string>
    complement(const std::vector<std::string> &names) const {
        std::vector<std::string> out;
        for (const auto &r : regs_) {
            if (std::find(names.begin(), names.end(), r.name) == names.end()) {
                out.push_back(r.name);
            }
        }
        return out;
    }

    [[nodiscard]] RegisterLayout subset(const std::vector<std::string> &names) const {
        std::vector<Register> out;
        out.reserve(names.size());
        for (const auto &n : names) {
            out.push_back(regs_[index_of(n)]);
        }
        return RegisterLayout(std::move(out));
    }

    /// Flat offset of every sub-index of `names` (mixed radix in the order
    /// given), with all other digits zero.
    [[nodiscard]] std::vector<std::size_t>
    subset_offsets(const std::vector<std::string> &names) const {
        const auto st = strides();
        std::vector<std::size_t> offs{0};
        for (const auto &n : names) {
            const std::size_t i = index_of(n);
            std::vector<std::size_t> next;
            next.reserve(offs.size() * regs_[i].dim);
            for (std::size_t base : offs) {
                for (std::size_t d = 0; d < regs_[i].dim; ++d) {
                    next.push_back(base + d * st[i]);
                }
            }
            offs = std::move(next);
        }
        return offs;
    }

    friend bool operator==(const RegisterLayout &a, const RegisterLayout &b) {
        if (a.regs_.size() != b.regs_.size()) {
            return false;
        }
        for (std::size_t i = 0; i < a.regs_.size(); ++i) {
            if (a.regs_[i].name != b.regs_[i].name || a.regs_[i].dim != b.regs_[i].dim) {
                return false;
            }
        }
        return true;
    }

  private:
    std::vector<Register> regs_;
};

/// Square unitary acting on the listed registers (first most significant).
struct UnitarySpec {
    std::vector<std::string> acting_registers;
    Matrix matrix;

    UnitarySpec(std::vector<std::string> regs, Matrix m)
        : acting_registers(std::move(regs)), matrix(std::move(m)) {
        if (unitarity_defect(matrix) > 1e-10) {
            throw ContractViolation("UnitarySpec matrix is not unitary");
        }
    }
};

/// Hermitian idempotent acting on the listed registers.
struct ProjectorSpec {
    std::vector<std::string> acting_registers;
    Matrix matrix;

    ProjectorSpec(std::vector<std::string> regs, Matrix m)
        : acting_registers(std::move(regs)), matrix(std::move(m)) {
        if (hermiticity_defect(matrix) > 1e-10 ||
            (matrix * matrix - matrix).cwiseAbs().maxCoeff() > 1e-10) {
            throw ContractViolation("ProjectorSpec matrix is not a projector");
        }
    }
};

class PureState {
  public:
    PureState() = default;
    PureState(RegisterLayout layout, Vector amps)
        : layout_(std::move(layout)), amps_(std::move(amps)) {
        const std::size_t total = layout_.total_dim();
        if (total > kDenseDimensionCap) {
            throw InfeasibleParams("layout exceeds the dense dimension cap of 2^22");
        }
        if (static_cast<std::size_t>(amps_.size()) != total) {
            throw DimensionError("amplitude count does not match layout");
        }
        norm_tag_ = amps_.norm();
    }

    [[nodiscard]] const RegisterLayout &layout() const { return layout_; }
    [[nodiscard]] const Vector &amps() const { return amps_; }
    [[nodiscard]] double norm_tag() const { return norm_tag_; }
    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(amps_.size()); }

    [[nodiscard]] cplx amp(std::span<const std::size_t> digits) const {
        return amps_(static_cast<Eigen::Index>(layout_.flat_index(digits)));
    }

    [[nodiscard]] PureState normalized() const {
        if (norm_tag_ == 0.0) {
            throw ContractViolation("cannot normalize a zero-norm branch");
        }
        return PureState(layout_, amps_ / norm_tag_);
    }

  private:
    RegisterLayout layout_;
    Vector amps_;
    double norm_tag_ = 0.0;
};

/// Basis state addressed by one digit per register.
inline PureState init_basis(const RegisterLayout &layout,
                            std::span<const std::size_t> digits) {
    const std::size_t total = layout.total_dim();
    if (total > kDenseDimensionCap) {
        throw InfeasibleParams("layout exceeds the dense dimension cap of 2^22");
    }
    Vector v = Vector::Zero(static_cast<Eigen::Index>(total));
    v(static_cast<Eigen::Index>(layout.flat_index(digits))) = 1.0;
    return PureState(layout, std::move(v));
}

inline PureState init_basis(const RegisterLayout &layout,
                            std::initializer_list<std::size_t> digits) {
    return init_basis(layout, std::span<const std::size_t>(digits.begin(), digits.size()));
}

namespace detail {

inline std::size_t subset_dim(const RegisterLayout &layout,
                              const std::vector<std::string> &names) {
    std::size_t d = 1;
    for (const auto &n : names) {
        d *= layout.dim(n);
    }
    return d;
}

/// In-place (M ⊗ I) on the registers `names`.
inline void apply_matrix_inplace(const RegisterLayout &layout, Vector &amps,
                                 const std::vector<std::string> &names,
                                 const Matrix &m) {
    const auto sub = layout.subset_offsets(names);
    if (static_cast<std::size_t>(m.rows()) != sub.size() || m.rows() != m.cols()) {
        throw DimensionError("operator dimension does not match acting registers");
    }
    const auto comp = layout.subset_offsets(layout.complement(names));
    Vector block(static_cast<Eigen::Index>(sub.size()));
    for (std::size_t base : comp) {
        for (std::size_t a = 0; a < sub.size(); ++a) {
            block(static_cast<Eigen::Index>(a)) = amps(static_cast<Eigen::Index>(base + sub[a]));
        }
        const Vector out = m * block;
        for (std::size_t a = 0; a < sub.size(); ++a) {
            amps(static_cast<Eigen::Index>(base + sub[a])) = out(static_cast<Eigen::Index>(a));
        }
    }
}

} // namespace detail

/// (u ⊗ I)|state>, the identity acting on every register u does not name.
inline PureState apply_unitary(const PureState &state, const UnitarySpec &u) {
    for (const auto &n : u.acting_registers) {
        if (!state.layout().contains(n)) {
            throw DimensionError("unitary acts on unknown register '" + n + "'");
        }
    }
    Vector amps = state.amps();
    detail::apply_matrix_inplace(state.layout(), amps, u.acting_registers, u.matrix);
    return PureState(state.layout(), std::move(amps));
}

/// Same as apply_unitary but with no unitarity check; for projectors and
/// Kraus operators applied to branches.
inline PureState apply_operator(const PureState &state,
                                const std::vector<std::string> &regs,
                                const Matrix &m) {
    Vector amps = state.amps();
    detail::apply_matrix_inplace(state.layout(), amps, regs, m);
    return PureState(state.layout(), std::move(amps));
}

struct MeasurementOutcome {
    std::size_t outcome = 0;
    PureState collapsed;
    double probability = 0.0;
};

/// Probability of each projector, relative to the branch norm.
inline std::vector<double> outcome_probabilities(const PureState &state,
                                                 const std::vector<ProjectorSpec> &projectors) {
    if (projectors.empty()) {
        throw ContractViolation("measurement needs at least one projector");
    }
    const auto &regs = projectors.front().acting_registers;
    Matrix sum = Matrix::Zero(projectors.front().matrix.rows(),
                              projectors.front().matrix.cols());
    for (const auto &p : projectors) {
        if (p.acting_registers != regs || p.matrix.rows() != sum.rows()) {
            throw DimensionError("projectors must act on the same registers");
        }
        sum += p.matrix;
    }
    if ((sum - Matrix::Identity(sum.rows(), sum.cols())).cwiseAbs().maxCoeff() > 1e-10) {
        throw ContractViolation("projectors do not sum to the identity");
    }
    const double n2 = state.norm_tag() * state.norm_tag();
    if (n2 == 0.0) {
        throw ContractViolation("cannot measure a zero-norm branch");
    }
    std::vector<double> probs;
    probs.reserve(projectors.size());
    for (const auto &p : projectors) {
        const PureState b = apply_operator(state, regs, p.matrix);
        probs.push_back(b.norm_tag() * b.norm_tag() / n2);
    }
    return probs;
}

/// Picks index i with probability probs[i] using a single uniform draw.
inline std::size_t sample_index(std::span<const double> probs, CounterRng &rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t last_nonzero = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0) {
            last_nonzero = i;
        }
        acc += probs[i];
        if (u < acc) {
            return i;
        }
    }
    return last_nonzero;
}

/**
 * Projective measurement. The collapsed state is P_i|psi> without
 * renormalization; its norm_tag is sqrt(p_i) times the input's.
 */
inline MeasurementOutcome measure(const PureState &state,
                                  const std::vector<ProjectorSpec> &projectors,
                                  CounterRng &rng) {
    const auto probs = outcome_probabilities(state, projectors);
    const std::size_t i = sample_index(probs, rng);
    return {i, apply_operator(state, projectors[i].acting_registers, projectors[i].matrix),
            probs[i]};
}

inline MeasurementOutcome measure(const PureState &state,
                                  const std::vector<ProjectorSpec> &projectors,
                                  std::uint64_t rng_seed) {
    CounterRng rng(rng_seed);
    return measure(state, projectors, rng);
}

/// Computational-basis projectors |j><j| on one register.
inline std::vector<ProjectorSpec> computational_projectors(const RegisterLayout &layout,
                                                           const std::string &reg) {
    const auto d = static_cast<Eigen::Index>(layout.dim(reg));
    std::vector<ProjectorSpec> out;
    for (Eigen::Index j = 0; j < d; ++j) {
        Matrix p = Matrix::Zero(d, d);
        p(j, j) = 1.0;
        out.emplace_back(std::vector<std::string>{reg}, std::move(p));
    }
    return out;
}

/// Partial trace keeping `keep` (in the given order). Trace = norm_tag^2.
inline Matrix reduced_density(const PureState &state, const std::vector<std::string> &keep) {
    if (keep.empty()) {
        throw ContractViolation("reduced_density needs a non-empty keep set");
    }
    for (const auto &n : keep) {
        if (!state.layout().contains(n)) {
            throw DimensionError("unknown register '" + n + "'");
        }
    }
    const auto &layout = state.layout();
    const auto sub = layout.subset_offsets(keep);
    const auto comp = layout.subset_offsets(layout.complement(keep));
    const auto d = static_cast<Eigen::Index>(sub.size());
    Matrix rho = Matrix::Zero(d, d);
    Vector block(d);
    for (std::size_t base : comp) {
        for (std::size_t a = 0; a < sub.size(); ++a) {
            block(static_cast<Eigen::Index>(a)) =
                state.amps()(static_cast<Eigen::Index>(base + sub[a]));
        }
        rho.noalias() += block * block.adjoint();
    }
    return rho;
}

/// Sum of |eigenvalues| of a Hermitian matrix (the unhalved trace norm).
inline double trace_norm(const Matrix &a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("trace norm of a non-square matrix");
    }
    if (hermiticity_defect(a) > 1e-8) {
        throw ContractViolation("trace norm expects a Hermitian matrix");
    }
    if (a.size() == 0) {
        return 0.0;
    }
    const Matrix h = (a + a.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

/**
 * Trace distance ½‖a − b‖₁. Every reported trace distance in the library
 * goes through this function; the unhalved sums compared against the
 * outcome-weighted deviation use `trace_norm` directly.
 */
inline double trace_distance(const Matrix &a, const Matrix &b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("trace_distance of differently sized matrices");
    }
    return 0.5 * trace_norm(a - b);
}

/// |<a|b>|^2 / (|a|^2 |b|^2) for two states on the same layout.
inline double fidelity(const PureState &a, const PureState &b) {
    if (!(a.layout() == b.layout())) {
        throw DimensionError("fidelity of states on different layouts");
    }
    const double na = a.norm_tag();
    const double nb = b.norm_tag();
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return std::norm(a.amps().dot(b.amps())) / (na * na * nb * nb);
}

/// (<bra| ⊗ I)|state>. `bra` is passed as a ket and conjugated here.
inline PureState contract(const PureState &state, const std::vector<std::string> &regs,
                          const Vector &bra) {
    const auto &layout = state.layout();
    const auto sub = layout.subset_offsets(regs);
    if (static_cast<std::size_t>(bra.size()) != sub.size()) {
        throw DimensionError("bra dimension does not match registers");
    }
    const auto rest = layout.complement(regs);
    const auto comp = layout.subset_offsets(rest);
    Vector out(static_cast<Eigen::Index>(comp.size()));
    for (std::size_t c = 0; c < comp.size(); ++c) {
        cplx acc = 0.0;
        for (std::size_t a = 0; a < sub.size(); ++a) {
            acc += std::conj(bra(static_cast<Eigen::Index>(a))) *
                   state.amps()(static_cast<Eigen::Index>(comp[c] + sub[a]));
        }
        out(static_cast<Eigen::Index>(c)) = acc;
    }
    return PureState(layout.subset(rest), std::move(out));
}

/// Inverse of `contract`'s shape change: |ket>_regs ⊗ |rest>, placed back in
/// `layout` order.
inline PureState insert_product(const RegisterLayout &layout,
                                const std::vector<std::string> &regs, const Vector &ket,
                                const PureState &rest) {
    const auto sub = layout.subset_offsets(regs);
    const auto comp = layout.subset_offsets(layout.complement(regs));
    if (static_cast<std::size_t>(ket.size()) != sub.size() ||
        rest.dim() != comp.size()) {
        throw DimensionError("insert_product shape mismatch");
    }
    Vector out = Vector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
    for (std::size_t c = 0; c < comp.size(); ++c) {
        const cplx r = rest.amps()(static_cast<Eigen::Index>(c));
        if (r == cplx(0.0)) {
            continue;
        }
        for (std::size_t a = 0; a < sub.size(); ++a) {
            out(static_cast<Eigen::Index>(comp[c] + sub[a])) =
                ket(static_cast<Eigen::Index>(a)) * r;
        }
    }
    return PureState(layout, std::move(out));
}

/// Tensor product with `a`'s registers first.
inline PureState tensor(const PureState &a, const PureState &b) {
    std::vector<Register> regs = a.layout().registers();
    for (const auto &r : b.layout().registers()) {
        regs.push_back(r);
    }
    Vector out(static_cast<Eigen::Index>(a.dim() * b.dim()));
    for (std::size_t i = 0; i < a.dim(); ++i) {
        out.segment(static_cast<Eigen::Index>(i * b.dim()), static_cast<Eigen::Index>(b.dim())) =
            a.amps()(static_cast<Eigen::Index>(i)) * b.amps();
    }
    return PureState(RegisterLayout(std::move(regs)), std::move(out));
}

} // namespace fqsim
