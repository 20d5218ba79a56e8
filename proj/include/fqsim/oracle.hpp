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
 * Phase oracle in discrete, fractional and Hamiltonian form, driving
 * Hamiltonians, controlled start/finish-time evolution and the exact
 * ground-truth propagator.
 *
 * The oracle Hamiltonian is diag(x_j). Its evolution is reported without
 * the global phase e^{-it/2}: oracle_evolution(t) = cos(t/2) I + i sin(t/2) Q.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "fqsim/errors.hpp"
#include "fqsim/linalg.hpp"
#include "fqsim/rng.hpp"
#include "fqsim/statevector.hpp"

namespace fqsim {

/// Data string x_1..x_L. Target basis state j (0-indexed) carries x_{j+1}.
class OracleString {
  public:
    OracleString() = default;
    explicit OracleString(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
        if (bits_.empty()) {
            throw ContractViolation("oracle string must have length >= 1");
        }
        for (auto b : bits_) {
            if (b > 1) {
                throw ContractViolation("oracle bits must be 0 or 1");
            }
        }
    }
    /// Parses "0110".
    static OracleString parse(const std::string &text) {
        std::vector<std::uint8_t> bits;
        for (char c : text) {
            if (c != '0' && c != '1') {
                throw ContractViolation("oracle string may only contain 0 and 1");
            }
            bits.push_back(static_cast<std::uint8_t>(c - '0'));
        }
        return OracleString(std::move(bits));
    }

    [[nodiscard]] std::size_t size() const { return bits_.size(); }
    [[nodiscard]] int bit(std::size_t j) const { return bits_.at(j); }
    [[nodiscard]] const std::vector<std::uint8_t> &bits() const { return bits_; }
    [[nodiscard]] std::string str() const {
        std::string s;
        for (auto b : bits_) {
            s.push_back(static_cast<char>('0' + b));
        }
        return s;
    }

    /// Diagonal of Q: (-1)^{x_j}.
    [[nodiscard]] RealVector signs() const {
        RealVector s(static_cast<Eigen::Index>(bits_.size()));
        for (std::size_t j = 0; j < bits_.size(); ++j) {
            s(static_cast<Eigen::Index>(j)) = bits_[j] ? -1.0 : 1.0;
        }
        return s;
    }

    /// diag(x_j), the oracle Hamiltonian.
    [[nodiscard]] Matrix hamiltonian() const {
        Matrix h = Matrix::Zero(static_cast<Eigen::Index>(size()),
                                static_cast<Eigen::Index>(size()));
        for (std::size_t j = 0; j < bits_.size(); ++j) {
            h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = bits_[j];
        }
        return h;
    }

    /// e^{i phi Q} as a diagonal matrix.
    [[nodiscard]] Matrix phase_rotation(double phi) const {
        const RealVector s = signs();
        Vector d(s.size());
        for (Eigen::Index j = 0; j < s.size(); ++j) {
            d(j) = std::exp(kI * phi * s(j));
        }
        return d.asDiagonal();
    }

    /// a I + b Q as a diagonal matrix.
    [[nodiscard]] Matrix linear_combination(cplx a, cplx b) const {
        const RealVector s = signs();
        Vector d(s.size());
        for (Eigen::Index j = 0; j < s.size(); ++j) {
            d(j) = a + b * s(j);
        }
        return d.asDiagonal();
    }

  private:
    std::vector<std::uint8_t> bits_;
};

namespace detail {
inline void check_target(const PureState &state, const std::string &reg,
                         const OracleString &oracle) {
    if (state.layout().dim(reg) != oracle.size()) {
        throw DimensionError("target register dimension differs from oracle length");
    }
}
} // namespace detail

/// Q|j> = (-1)^{x_j}|j>.
inline PureState apply_query(const PureState &state, const std::string &target,
                             const OracleString &oracle) {
    detail::check_target(state, target, oracle);
    return apply_operator(state, {target}, oracle.linear_combination(0.0, 1.0));
}

/// Q^lambda|j> = e^{i pi lambda x_j}|j>.
inline PureState apply_fractional_query(const PureState &state, const std::string &target,
                                        const OracleString &oracle, double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) {
        throw ContractViolation("fractional query exponent must lie in (0, 1]");
    }
    detail::check_target(state, target, oracle);
    Vector d(static_cast<Eigen::Index>(oracle.size()));
    for (std::size_t j = 0; j < oracle.size(); ++j) {
        d(static_cast<Eigen::Index>(j)) =
            std::exp(kI * std::numbers::pi * lambda * static_cast<double>(oracle.bit(j)));
    }
    return apply_operator(state, {target}, d.asDiagonal().toDenseMatrix());
}

/// cos(t/2) I + i sin(t/2) Q.
inline Matrix oracle_evolution_matrix(const OracleString &oracle, double t) {
    return oracle.linear_combination(std::cos(t / 2.0), kI * std::sin(t / 2.0));
}

inline PureState oracle_evolution(const PureState &state, const std::string &target,
                                  const OracleString &oracle, double t) {
    detail::check_target(state, target, oracle);
    return apply_operator(state, {target}, oracle_evolution_matrix(oracle, t));
}

/// Largest target dimension accepted by the dense exponential routines.
inline constexpr std::size_t kExactEvolutionDimCap = 64;

namespace detail {

/// Time-ordered exp(-i ∫ h) over [ta, tb] by a midpoint product, doubling
/// the step count until two successive products agree within `tol`.
inline Matrix time_ordered_exp(const std::function<Matrix(double)> &h, double ta, double tb,
                               double tol = 1e-9) {
    const double len = tb - ta;
    const Eigen::Index dim = h(ta).rows();
    if (len == 0.0) {
        return Matrix::Identity(dim, dim);
    }
    auto product = [&](int steps) {
        Matrix u = Matrix::Identity(dim, dim);
        const double dt = len / steps;
        for (int s = 0; s < steps; ++s) {
            u = expm_hermitian(h(ta + (s + 0.5) * dt), dt) * u;
        }
        return u;
    };
    int steps = 4;
    Matrix prev = product(steps);
    while (steps < (1 << 16)) {
        steps *= 2;
        Matrix next = product(steps);
        // midpoint rule is second order, so the remaining error of `next`
        // is about a third of the difference
        if (operator_norm(next - prev) / 3.0 < tol) {
            return next;
        }
        prev = std::move(next);
    }
    return prev;
}

} // namespace detail

/**
 * Driving Hamiltonian H(t) on the target space.
 *
 * `time_grid` is the number of representable times per unit of evolution
 * time; a grid index g stands for time g / time_grid.
 */
struct DrivingSpec {
    std::string name = "custom";
    std::size_t dim = 1;
    std::function<Matrix(double)> hamiltonian;
    bool time_independent = true;
    double norm_bound = 0.0;
    double total_time = 1.0;
    long gate_cost = 1;
    long time_grid = 1;

    [[nodiscard]] Matrix at(double t) const { return hamiltonian(t); }

    /// Checks Hermiticity and the norm bound on `samples` evenly spaced times.
    void validate(int samples = 9) const {
        if (!hamiltonian) {
            throw ContractViolation("driving spec has no Hamiltonian");
        }
        if (total_time < 0.0 || time_grid < 1 || gate_cost < 0) {
            throw ContractViolation("driving spec has invalid time parameters");
        }
        for (int i = 0; i < samples; ++i) {
            const double t = samples == 1 ? 0.0 : total_time * i / (samples - 1);
            const Matrix h = hamiltonian(t);
            if (static_cast<std::size_t>(h.rows()) != dim || h.rows() != h.cols()) {
                throw DimensionError("driving Hamiltonian has the wrong shape");
            }
            if (hermiticity_defect(h) > 1e-10) {
                throw ContractViolation("driving Hamiltonian is not Hermitian");
            }
            if (hermitian_norm(h) > norm_bound + 1e-10) {
                throw ContractViolation("driving Hamiltonian exceeds its norm bound");
            }
        }
    }

    /// Time-ordered evolution from ta to tb (ta <= tb).
    [[nodiscard]] Matrix evolution(double ta, double tb) const {
        if (tb < ta) {
            throw ContractViolation("evolution window with finish before start");
        }
        const auto d = static_cast<Eigen::Index>(dim);
        if (tb == ta) {
            return Matrix::Identity(d, d);
        }
        if (time_independent) {
            return expm_hermitian(hamiltonian(ta), tb - ta);
        }
        return detail::time_ordered_exp(hamiltonian, ta, tb);
    }
};

/// Start/finish grid indices of a drive window.
struct TimeWindow {
    long t_start = 0;
    long t_finish = 0;

    TimeWindow() = default;
    TimeWindow(long s, long f) : t_start(s), t_finish(f) {
        if (s < 0 || f < 0) {
            throw ContractViolation("time window indices must be nonnegative");
        }
        if (f < s) {
            throw ContractViolation("time window finishes before it starts");
        }
    }
    [[nodiscard]] bool trivial() const { return t_start == t_finish; }
};

/**
 * How the drive black box is realized. `precision` is the requested ε′;
 * the dense exponential meets it with room to spare. A nonzero
 * `injected_error` multiplies every nontrivial window by one fixed random
 * unitary W (seeded by `seed`) with ||W - I|| = injected_error.
 */
struct DriveOptions {
    double precision = 1e-9;
    double injected_error = 0.0;
    std::uint64_t seed = 0;
};

/**
 * Window unitaries for one driving spec with a cache keyed by grid indices.
 * Thread-safe.
 */
class DriveEngine {
  public:
    DriveEngine(DrivingSpec spec, DriveOptions options, long grid_per_unit,
                double time_origin = 0.0)
        : spec_(std::move(spec)), options_(options), grid_(grid_per_unit),
          origin_(time_origin) {
        if (grid_ < 1) {
            throw ContractViolation("time grid must be positive");
        }
        if (options_.injected_error > 0.0) {
            CounterRng rng(CounterRng::derive(options_.seed, 0x5eed));
            perturbation_ = random_perturbation(static_cast<Eigen::Index>(spec_.dim),
                                                options_.injected_error, rng);
        }
    }

    [[nodiscard]] const DrivingSpec &spec() const { return spec_; }
    [[nodiscard]] long grid() const { return grid_; }
    [[nodiscard]] double origin() const { return origin_; }
    [[nodiscard]] double time_of(long g) const {
        return origin_ + static_cast<double>(g) / static_cast<double>(grid_);
    }

    /// Unitary for window (s, f) relative to the origin.
    [[nodiscard]] Matrix window(long s, long f) const {
        const TimeWindow w(s, f);
        if (w.trivial()) {
            return identity();
        }
        return perturbed(ideal(s, f));
    }

    /// The black box run backwards over window (s, f): the ideal part is
    /// E(s, f)^dagger, and any injected error is applied again.
    [[nodiscard]] Matrix reverse_window(long s, long f) const {
        const TimeWindow w(s, f);
        if (w.trivial()) {
            return identity();
        }
        return perturbed(ideal(s, f).adjoint());
    }

    /// Error-free evolution over window (s, f), cached.
    [[nodiscard]] Matrix ideal(long s, long f) const {
        const TimeWindow w(s, f);
        if (w.trivial()) {
            return identity();
        }
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = cache_.find({s, f});
            if (it != cache_.end()) {
                return it->second;
            }
        }
        Matrix u = spec_.evolution(time_of(s), time_of(f));
        std::lock_guard<std::mutex> lock(mu_);
        cache_.emplace(std::make_pair(s, f), u);
        return u;
    }

    [[nodiscard]] bool has_injected_error() const { return perturbation_.size() != 0; }

  private:
    [[nodiscard]] Matrix identity() const {
        const auto d = static_cast<Eigen::Index>(spec_.dim);
        return Matrix::Identity(d, d);
    }
    [[nodiscard]] Matrix perturbed(Matrix u) const {
        if (perturbation_.size() != 0) {
            return perturbation_ * u;
        }
        return u;
    }

    DrivingSpec spec_;
    DriveOptions options_;
    long grid_;
    double origin_;
    Matrix perturbation_;
    mutable std::mutex mu_;
    mutable std::map<std::pair<long, long>, Matrix> cache_;
};

/**
 * |t_s>|t_f>|psi> -> |t_s>|t_f> U(t_s -> t_f)|psi>. Time registers hold grid
 * indices (spacing 1/driving.time_grid). Any amplitude with t_s > t_f is a
 * contract violation.
 */
inline PureState controlled_drive(const PureState &state, const std::string &start_reg,
                                  const std::string &finish_reg, const std::string &target,
                                  const DrivingSpec &driving, const DriveOptions &options = {}) {
    const auto &layout = state.layout();
    if (layout.dim(target) != driving.dim) {
        throw DimensionError("target register dimension differs from the driving spec");
    }
    const DriveEngine engine(driving, options, driving.time_grid);
    const std::vector<std::string> tregs{start_reg, finish_reg, target};
    const auto rest = layout.subset_offsets(layout.complement(tregs));
    const auto ts_dim = static_cast<long>(layout.dim(start_reg));
    const auto tf_dim = static_cast<long>(layout.dim(finish_reg));
    const auto st = layout.strides();
    const std::size_t s_stride = st[layout.index_of(start_reg)];
    const std::size_t f_stride = st[layout.index_of(finish_reg)];
    const std::size_t t_stride = st[layout.index_of(target)];
    const auto d = static_cast<Eigen::Index>(driving.dim);
    Vector amps = state.amps();
    Vector block(d);
    for (long s = 0; s < ts_dim; ++s) {
        for (long f = 0; f < tf_dim; ++f) {
            const std::size_t off = static_cast<std::size_t>(s) * s_stride +
                                    static_cast<std::size_t>(f) * f_stride;
            double weight = 0.0;
            for (std::size_t base : rest) {
                for (Eigen::Index j = 0; j < d; ++j) {
                    weight += std::norm(amps(static_cast<Eigen::Index>(
                        base + off + static_cast<std::size_t>(j) * t_stride)));
                }
            }
            if (weight == 0.0 || s == f) {
                continue;
            }
            if (s > f) {
                throw ContractViolation("controlled drive has support with t_s > t_f");
            }
            const Matrix u = engine.window(s, f);
            for (std::size_t base : rest) {
                for (Eigen::Index j = 0; j < d; ++j) {
                    block(j) = amps(static_cast<Eigen::Index>(
                        base + off + static_cast<std::size_t>(j) * t_stride));
                }
                const Vector out = u * block;
                for (Eigen::Index j = 0; j < d; ++j) {
                    amps(static_cast<Eigen::Index>(base + off +
                                                   static_cast<std::size_t>(j) * t_stride)) =
                        out(j);
                }
            }
        }
    }
    return PureState(layout, std::move(amps));
}

/**
 * exp(-i (H + H_Q) duration)|psi> with H_Q = diag(x_j), by dense
 * exponential (time-ordered midpoint product for time-dependent H).
 */
inline PureState exact_total_evolution(const PureState &initial, const std::string &target,
                                       const DrivingSpec &driving, const OracleString &oracle,
                                       double duration) {
    if (driving.dim > kExactEvolutionDimCap) {
        throw InfeasibleParams("target too large for the dense exponential (cap 64)");
    }
    if (duration < 0.0 || duration > driving.total_time + 1e-12) {
        throw ContractViolation("duration must lie in [0, T]");
    }
    detail::check_target(initial, target, oracle);
    if (initial.layout().dim(target) != driving.dim) {
        throw DimensionError("target register dimension differs from the driving spec");
    }
    const Matrix hq = oracle.hamiltonian();
    Matrix u;
    if (driving.time_independent) {
        u = expm_hermitian(driving.at(0.0) + hq, duration);
    } else {
        auto h = driving.hamiltonian;
        u = detail::time_ordered_exp([&](double t) { return Matrix(h(t) + hq); }, 0.0,
                                     duration);
    }
    return apply_operator(initial, {target}, u);
}

/// Built-in driving Hamiltonians.
namespace builtin_drives {

inline DrivingSpec constant(const Matrix &h, double total_time, std::string name = "constant") {
    DrivingSpec spec;
    spec.name = std::move(name);
    spec.dim = static_cast<std::size_t>(h.rows());
    spec.hamiltonian = [h](double) { return h; };
    spec.time_independent = true;
    spec.norm_bound = hermitian_norm(h);
    spec.total_time = total_time;
    return spec;
}

/// H = 0.
inline DrivingSpec zero(std::size_t dim, double total_time) {
    const auto d = static_cast<Eigen::Index>(dim);
    return constant(Matrix::Zero(d, d), total_time, "zero");
}

/// Constant random Hermitian with spectral norm `norm`.
inline DrivingSpec random_constant(std::size_t dim, double norm, std::uint64_t seed,
                                   double total_time) {
    CounterRng rng(CounterRng::derive(seed, 0x4d));
    return constant(random_hermitian(static_cast<Eigen::Index>(dim), norm, rng), total_time,
                    "random");
}

/// Diagonal H; commutes with the oracle Hamiltonian.
inline DrivingSpec diagonal(const RealVector &values, double total_time) {
    return constant(values.cast<cplx>().asDiagonal().toDenseMatrix(), total_time, "diagonal");
}

/// Hopping on a path of `dim` sites with amplitude `hop`; dim = 2 is the
/// two-level toy walk hop * sigma_x.
inline DrivingSpec walk(std::size_t dim, double hop, double total_time) {
    const auto d = static_cast<Eigen::Index>(dim);
    Matrix h = Matrix::Zero(d, d);
    for (Eigen::Index j = 0; j + 1 < d; ++j) {
        h(j, j + 1) = hop;
        h(j + 1, j) = hop;
    }
    return constant(h, total_time, "walk");
}

/// H(t) = cos(w t) A + sin(w t) B with A, B random of norm `norm`/2.
inline DrivingSpec rotating(std::size_t dim, double norm, double omega, std::uint64_t seed,
                            double total_time) {
    CounterRng rng(CounterRng::derive(seed, 0x52));
    const auto d = static_cast<Eigen::Index>(dim);
    const Matrix a = random_hermitian(d, norm / 2.0, rng);
    const Matrix b = random_hermitian(d, norm / 2.0, rng);
    DrivingSpec spec;
    spec.name = "rotating";
    spec.dim = dim;
    spec.hamiltonian = [a, b, omega](double t) {
        return Matrix(std::cos(omega * t) * a + std::sin(omega * t) * b);
    };
    spec.time_independent = false;
    spec.norm_bound = norm;
    spec.total_time = total_time;
    return spec;
}

} // namespace builtin_drives

} // namespace fqsim
