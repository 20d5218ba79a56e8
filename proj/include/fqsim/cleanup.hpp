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
 * The literal preparation route: exponential states on k + 1 slots followed
 * by the six clean-up steps, each a basis permutation or a slot-local
 * unitary, on a sparse state. Slots are held in digits of size 2q (which is
 * at least n + q + 2); the h ancilla has size k + 2 and the flag size 2q.
 * Only practical for small q; the closed form in preparation.hpp is the
 * production route and is checked against this one.
 */

#pragma once

#include <functional>
#include <map>
#include <vector>

#include "fqsim/encoding.hpp"
#include "fqsim/errors.hpp"
#include "fqsim/linalg.hpp"
#include "fqsim/preparation.hpp"

namespace fqsim {

/// Sparse amplitudes over integer digit tuples.
class SparseState {
  public:
    using Digits = std::vector<int>;

    SparseState() = default;
    explicit SparseState(std::vector<int> dims) : dims_(std::move(dims)) {}

    [[nodiscard]] const std::vector<int> &dims() const { return dims_; }
    [[nodiscard]] const std::map<Digits, cplx> &amps() const { return amps_; }

    void set(const Digits &d, cplx a) {
        check(d);
        amps_[d] = a;
    }

    [[nodiscard]] double squared_norm() const {
        double s = 0.0;
        for (const auto &[d, a] : amps_) {
            s += std::norm(a);
        }
        return s;
    }

    /// Applies a bijection of digit tuples (checked for collisions).
    void permute(const std::function<Digits(const Digits &)> &f) {
        std::map<Digits, cplx> out;
        for (const auto &[d, a] : amps_) {
            Digits e = f(d);
            check(e);
            if (!out.emplace(std::move(e), a).second) {
                throw EncoderBug("basis map is not injective on the support");
            }
        }
        amps_ = std::move(out);
    }

    /// Applies `u` to digit `reg`, optionally only where `when` holds
    /// (which must not read digit `reg`).
    void apply_local(int reg, const Matrix &u,
                     const std::function<bool(const Digits &)> &when = nullptr) {
        const auto r = static_cast<std::size_t>(reg);
        if (u.rows() != dims_[r]) {
            throw DimensionError("local unitary size differs from the digit size");
        }
        std::map<Digits, Vector> groups;
        for (const auto &[d, a] : amps_) {
            if (when && !when(d)) {
                continue;
            }
            Digits rest = d;
            rest[r] = 0;
            auto [it, fresh] = groups.try_emplace(rest, Vector::Zero(dims_[r]));
            it->second(d[r]) += a;
        }
        for (auto &[rest, v] : groups) {
            Digits d = rest;
            for (int val = 0; val < dims_[r]; ++val) {
                d[r] = val;
                amps_.erase(d);
            }
            const Vector w = u * v;
            for (int val = 0; val < dims_[r]; ++val) {
                if (std::abs(w(val)) > 1e-300) {
                    d[r] = val;
                    amps_[d] = w(val);
                }
            }
        }
    }

    void prune(double tol) {
        for (auto it = amps_.begin(); it != amps_.end();) {
            it = std::abs(it->second) <= tol ? amps_.erase(it) : std::next(it);
        }
    }

  private:
    void check(const Digits &d) const {
        if (d.size() != dims_.size()) {
            throw DimensionError("digit tuple length differs from the layout");
        }
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d[i] < 0 || d[i] >= dims_[i]) {
                throw DimensionError("digit out of range");
            }
        }
    }

    std::vector<int> dims_;
    std::map<Digits, cplx> amps_;
};

/// Register layout of the literal route: slots 0..k, then flag, then h.
struct CleanupLayout {
    int n;
    int k;
    long q;

    [[nodiscard]] int slot_dim() const { return static_cast<int>(2 * q); }
    [[nodiscard]] int modulus() const { return static_cast<int>(n + q + 2); }
    [[nodiscard]] int flag() const { return k + 1; }
    [[nodiscard]] int h_reg() const { return k + 2; }

    void validate() const {
        if (2 * q < n + q + 2) {
            throw ContractViolation("literal route needs q >= n + 2");
        }
    }

    [[nodiscard]] std::vector<int> dims() const {
        std::vector<int> d(static_cast<std::size_t>(k + 1), slot_dim());
        d.push_back(slot_dim());
        d.push_back(k + 2);
        return d;
    }
};

/// Amplitudes below this after a cascade are rounding noise.
inline constexpr double kLiteralRoundoff = 1e-13;

namespace detail {

inline int wrap(int v, int mod) { return ((v % mod) + mod) % mod; }

/// Adds (prev + 1) to slot i in place, for values below the modulus.
inline void prefix_step(SparseState::Digits &d, int i, int mod, int sign) {
    if (d[static_cast<std::size_t>(i)] >= mod) {
        return;
    }
    const int prev = i == 0 ? 0 : d[static_cast<std::size_t>(i - 1)] % mod;
    d[static_cast<std::size_t>(i)] = wrap(d[static_cast<std::size_t>(i)] + sign * (prev + 1), mod);
}

/// Number of slots before the first one satisfying `pred`, or k + 1.
inline int first_index(const SparseState::Digits &d, int slots,
                       const std::function<bool(int)> &pred) {
    for (int i = 0; i < slots; ++i) {
        if (pred(d[static_cast<std::size_t>(i)])) {
            return i;
        }
    }
    return slots;
}

} // namespace detail

/// |n>^{k+1} with clean flag and h ancilla: the encoded zero string.
inline SparseState encoded_zero(const CleanupLayout &lay) {
    lay.validate();
    SparseState s(lay.dims());
    SparseState::Digits d(static_cast<std::size_t>(lay.k + 3), 0);
    for (int i = 0; i <= lay.k; ++i) {
        d[static_cast<std::size_t>(i)] = lay.n;
    }
    s.set(d, 1.0);
    return s;
}

/// |n> -> |0> on every slot (an XOR with n), then the cascade on each slot.
inline SparseState prepare_exponential_slots(SparseState s, const CleanupLayout &lay,
                                             double alpha, double beta) {
    const int slots = lay.k + 1;
    s.permute([&](SparseState::Digits d) {
        for (int i = 0; i < slots; ++i) {
            d[static_cast<std::size_t>(i)] ^= lay.n;
        }
        return d;
    });
    const Matrix v = PhiCascade(lay.q, alpha, beta).matrix();
    for (int i = 0; i < slots; ++i) {
        s.apply_local(i, v);
    }
    s.prune(kLiteralRoundoff);
    return s;
}

/**
 * Steps 1-6 of the B-to-C conversion. Throws EncoderBug if the h ancilla
 * is not returned clean.
 */
inline SparseState cleanup_convert(SparseState s, const CleanupLayout &lay, double alpha,
                                   double beta) {
    lay.validate();
    const int slots = lay.k + 1;
    const int mod = lay.modulus();
    const int n = lay.n;
    const auto hr = static_cast<std::size_t>(lay.h_reg());
    // 1. prefix sums
    s.permute([&](SparseState::Digits d) {
        for (int i = 0; i < slots; ++i) {
            detail::prefix_step(d, i, mod, +1);
        }
        return d;
    });
    // 2. h = number of leading slots not past the end
    s.permute([&](SparseState::Digits d) {
        const int h = detail::first_index(d, slots, [&](int v) { return v > n && v < mod; });
        d[hr] = detail::wrap(d[hr] + h, slots + 1);
        return d;
    });
    // 3. undo prefix sums around slot h + 1, which loses n + 1 instead
    s.permute([&](SparseState::Digits d) {
        const int h = d[hr];
        for (int i = slots - 1; i >= h + 1; --i) {
            detail::prefix_step(d, i, mod, -1);
        }
        if (h < slots) {
            auto &v = d[static_cast<std::size_t>(h)];
            if (v < mod) {
                v = detail::wrap(v - (n + 1), mod);
            }
        }
        for (int i = std::min(h, slots) - 1; i >= 0; --i) {
            detail::prefix_step(d, i, mod, -1);
        }
        return d;
    });
    // 4. inverse cascade on slots h+1..k+1, then swap slot h+1 into the flag
    const Matrix vdag = PhiCascade(lay.q, alpha, beta).matrix().adjoint();
    for (int i = 0; i < slots; ++i) {
        s.apply_local(i, vdag, [&](const SparseState::Digits &d) { return d[hr] <= i; });
    }
    s.prune(kLiteralRoundoff);
    s.permute([&](SparseState::Digits d) {
        const int h = d[hr];
        if (h < slots) {
            std::swap(d[static_cast<std::size_t>(h)], d[static_cast<std::size_t>(lay.flag())]);
        }
        return d;
    });
    // 5. |0> -> |n> on the cleaned slots
    s.permute([&](SparseState::Digits d) {
        for (int i = d[hr]; i < slots; ++i) {
            d[static_cast<std::size_t>(i)] ^= n;
        }
        return d;
    });
    // 6. uncompute h from the first sentinel
    s.permute([&](SparseState::Digits d) {
        const int h = detail::first_index(d, slots, [&](int v) { return v == n; });
        d[hr] = detail::wrap(d[hr] - h, slots + 1);
        return d;
    });
    s.prune(1e-300);
    for (const auto &[d, a] : s.amps()) {
        if (d[hr] != 0 && std::abs(a) > 1e-10) {
            throw EncoderBug("h ancilla left dirty by the clean-up conversion");
        }
    }
    return s;
}

/// Full literal route: encoded zero -> exponential slots -> clean-up.
inline SparseState prepare_literal(int n, int k, long q, double alpha, double beta) {
    const CleanupLayout lay{n, k, q};
    return cleanup_convert(prepare_exponential_slots(encoded_zero(lay), lay, alpha, beta), lay,
                           alpha, beta);
}

/// Clean-flag slot amplitudes of a literal-route state.
inline SlotAmplitudes clean_component(const SparseState &s, const CleanupLayout &lay) {
    SlotAmplitudes out;
    for (const auto &[d, a] : s.amps()) {
        if (d[static_cast<std::size_t>(lay.flag())] == 0) {
            out[Slots(d.begin(), d.begin() + lay.k + 1)] += a;
        }
    }
    return out;
}

/// Slot density with the flag (and h) traced out, over the given key list.
inline Matrix slot_density(const SparseState &s, const CleanupLayout &lay,
                           const std::vector<Slots> &keys) {
    std::map<Slots, Eigen::Index> index;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        index[keys[i]] = static_cast<Eigen::Index>(i);
    }
    std::map<int, Vector> by_flag;
    for (const auto &[d, a] : s.amps()) {
        const Slots key(d.begin(), d.begin() + lay.k + 1);
        auto it = index.find(key);
        if (it == index.end()) {
            throw EncoderBug("literal route produced an unexpected slot tuple");
        }
        auto [f, fresh] = by_flag.try_emplace(d[static_cast<std::size_t>(lay.flag())],
                                              Vector::Zero(static_cast<Eigen::Index>(keys.size())));
        f->second(it->second) += a;
    }
    const auto dim = static_cast<Eigen::Index>(keys.size());
    Matrix rho = Matrix::Zero(dim, dim);
    for (const auto &[flag, v] : by_flag) {
        rho += v * v.adjoint();
    }
    return rho;
}

/// Same density from the closed form.
inline Matrix slot_density(const PreparedControls &u, const std::vector<Slots> &keys) {
    std::map<Slots, Eigen::Index> index;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        index[keys[i]] = static_cast<Eigen::Index>(i);
    }
    const auto dim = static_cast<Eigen::Index>(keys.size());
    Matrix rho = Matrix::Zero(dim, dim);
    auto add = [&](const SlotAmplitudes &comp) {
        Vector v = Vector::Zero(dim);
        for (const auto &[s, a] : comp) {
            v(index.at(s)) += a;
        }
        rho += v * v.adjoint();
    };
    add(u.clean);
    for (const auto &comp : u.dirty) {
        add(comp);
    }
    return rho;
}

} // namespace fqsim
