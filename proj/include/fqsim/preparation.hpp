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
 * The prepared control state u_n = Ũ_n (C-encoded 0^n ⊗ clean flag), built
 * from its closed form.
 *
 * For |x| <= k with t trailing zeros the clean-up leaves the flag register
 * holding V_q^† |phi_{q-t}>, whose |0> component is <phi_q|phi_{q-t}>; the
 * weight k + 1 sector (nu') passes through untouched with a clean flag. The
 * flag residuals span at most n + 1 directions, so the flag is stored in an
 * orthonormal basis of that span: component 0 is the clean flag, components
 * 1.. are the residual directions.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/QR>

#include "fqsim/encoding.hpp"
#include "fqsim/errors.hpp"
#include "fqsim/linalg.hpp"
#include "fqsim/resources.hpp"
#include "fqsim/rng.hpp"
#include "fqsim/statevector.hpp"

namespace fqsim {

using SlotAmplitudes = std::map<Slots, cplx>;

struct PreparedControls {
    int n = 0;
    int k = 0;
    long q = 0;
    double alpha = 1.0;
    double beta = 0.0;
    /// clean-flag component
    SlotAmplitudes clean;
    /// component along residual flag direction j + 1
    std::vector<SlotAmplitudes> dirty;
    /// weight of the nu' sector
    double nu_weight = 0.0;

    [[nodiscard]] int slots() const { return k + 1; }
    [[nodiscard]] int flag_dim() const { return static_cast<int>(dirty.size()) + 1; }

    [[nodiscard]] double squared_norm() const {
        double s = 0.0;
        for (const auto &[key, a] : clean) {
            s += std::norm(a);
        }
        for (const auto &comp : dirty) {
            for (const auto &[key, a] : comp) {
                s += std::norm(a);
            }
        }
        return s;
    }

    [[nodiscard]] double dirty_weight() const { return squared_norm() - clean_weight(); }

    [[nodiscard]] double clean_weight() const {
        double s = 0.0;
        for (const auto &[key, a] : clean) {
            s += std::norm(a);
        }
        return s;
    }

    /// As a dense state over k + 1 slot registers (dim n + 1) and the flag.
    [[nodiscard]] PureState to_pure_state() const {
        std::vector<Register> regs;
        for (int i = 0; i < slots(); ++i) {
            regs.push_back({"slot" + std::to_string(i), static_cast<std::size_t>(n + 1),
                            RegisterRole::ControlCompressed});
        }
        regs.push_back({"flag", static_cast<std::size_t>(std::max(flag_dim(), 2)),
                        RegisterRole::ErrorFlag});
        RegisterLayout layout(regs);
        if (layout.total_dim() > kDenseDimensionCap) {
            throw InfeasibleParams("prepared controls exceed the dense cap");
        }
        Vector amps = Vector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
        auto put = [&](const Slots &s, std::size_t flag, cplx a) {
            std::vector<std::size_t> digits(s.begin(), s.end());
            digits.push_back(flag);
            amps(static_cast<Eigen::Index>(layout.flat_index(digits))) += a;
        };
        for (const auto &[s, a] : clean) {
            put(s, 0, a);
        }
        for (std::size_t j = 0; j < dirty.size(); ++j) {
            for (const auto &[s, a] : dirty[j]) {
                put(s, j + 1, a);
            }
        }
        return PureState(layout, amps);
    }
};

/// Trailing zeros after the last one (n for the zero string).
inline int trailing_zeros(const BitString &x) {
    int t = 0;
    for (auto it = x.rbegin(); it != x.rend() && *it == 0; ++it) {
        ++t;
    }
    return t;
}

/// The weight k + 1 sector: slot tuples with s_1 + ... + s_{k+1} + k + 1 <= n.
inline SlotAmplitudes nu_prime_sector(int n, int k, double alpha, double beta) {
    SlotAmplitudes out;
    const int budget = n - (k + 1);
    if (budget < 0) {
        return out;
    }
    Slots s(static_cast<std::size_t>(k + 1), 0);
    std::function<void(int, int)> rec = [&](int i, int left) {
        if (i == k + 1) {
            const int sum = budget - left;
            out[s] = std::pow(alpha, sum) * std::pow(beta, k + 1);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            s[static_cast<std::size_t>(i)] = v;
            rec(i + 1, left - v);
        }
    };
    rec(0, budget);
    return out;
}

/// Residual flag vectors V_q^† phi_{q-t} - c_t |0>, t = 0..n, as columns.
inline Matrix flag_residuals(int n, long q, double alpha, double beta) {
    PhiCascade cascade(q, alpha, beta);
    Matrix res(cascade.dim(), n + 1);
    for (int t = 0; t <= n; ++t) {
        Vector v = phi_closed_form(q - t, alpha, beta, cascade.dim());
        cascade.apply_adjoint(v);
        v(0) = 0.0;
        res.col(t) = v;
    }
    return res;
}

/// Modeled gates of one preparation (or its inverse): exponential states on
/// k + 1 slots, the clean-up arithmetic, and the error-flag swap.
inline std::int64_t preparation_gate_cost(int n, int k, long q, const CostModel &cost = {}) {
    const std::int64_t slots = k + 1;
    const int r = log2_exact(q);
    const int wide = bits_for(n + q + 2);
    std::int64_t g = 0;
    g += slots * bits_for(n + 1);                 // |n> -> |0>
    g += slots * (r + 1) * cost.rotation;         // cascade
    g += 2 * slots * cost.arithmetic(wide);       // prefix sums and their removal
    g += slots * cost.arithmetic(wide);           // h from comparisons
    g += cost.arithmetic(wide);                   // subtract n + 1
    g += slots * (r + 1) * cost.rotation;         // inverse cascade, h-controlled
    g += slots * (r + 1);                         // swap into the flag
    g += slots * bits_for(n + 1);                 // |0> -> |n>
    g += slots * cost.arithmetic(bits_for(n + 1)); // h uncomputed
    return g;
}

/// Qubits live during a preparation.
inline std::int64_t preparation_qubits(int n, int k, long q) {
    const int wide = bits_for(n + q + 2);
    return static_cast<std::int64_t>(k + 1) * wide + (log2_exact(q) + 1) + bits_for(k + 2);
}

/**
 * Closed-form Ũ_n applied to the encoded zero string with a clean flag.
 * Enumerates strings, so the cost grows like n^k.
 */
inline PreparedControls prepare_controls(int n, int k, long q, double alpha, double beta) {
    if (!is_pow2(n)) {
        throw ContractViolation("block length must be a power of two");
    }
    if (k < 0) {
        throw ContractViolation("k must be nonnegative");
    }
    if (q < n + 2) {
        throw ContractViolation("q must be at least n + 2");
    }
    PreparedControls u;
    u.n = n;
    u.k = k;
    u.q = q;
    u.alpha = alpha;
    u.beta = beta;
    const Matrix res = flag_residuals(n, q, alpha, beta);
    Eigen::HouseholderQR<Matrix> qr(res);
    const Matrix r = qr.matrixQR().topRows(n + 1).triangularView<Eigen::Upper>();
    // rows of r whose entries are all zero carry nothing
    std::vector<int> rows;
    for (int j = 0; j <= n; ++j) {
        if (r.row(j).cwiseAbs().maxCoeff() > 0.0) {
            rows.push_back(j);
        }
    }
    u.dirty.resize(rows.size());
    for (const auto &x : strings_up_to_weight(n, std::min(k, n))) {
        const int w = weight(x);
        const double a = std::pow(alpha, n - w) * std::pow(beta, w);
        const int t = trailing_zeros(x);
        const Slots key = encode_c(x, k);
        u.clean[key] = a * overlap_phi(q, t, alpha, beta);
        for (std::size_t j = 0; j < rows.size(); ++j) {
            const cplx c = r(rows[j], t);
            if (c != 0.0) {
                u.dirty[j][key] = a * c;
            }
        }
    }
    for (const auto &[s, a] : nu_prime_sector(n, k, alpha, beta)) {
        u.clean[s] = a;
        u.nu_weight += std::norm(a);
    }
    return u;
}

/// The ideal flag-free target: sum_{|x| <= k} a_x C|x> + mu |nu'>.
inline SlotAmplitudes ideal_succinct_state(int n, int k, double alpha, double beta) {
    SlotAmplitudes out;
    for (const auto &x : strings_up_to_weight(n, std::min(k, n))) {
        const int w = weight(x);
        out[encode_c(x, k)] = std::pow(alpha, n - w) * std::pow(beta, w);
    }
    for (const auto &[s, a] : nu_prime_sector(n, k, alpha, beta)) {
        out[s] = a;
    }
    return out;
}

inline double slot_distance(const SlotAmplitudes &a, const SlotAmplitudes &b) {
    double d = 0.0;
    for (const auto &[s, v] : a) {
        auto it = b.find(s);
        d += std::norm(v - (it == b.end() ? cplx(0.0) : it->second));
    }
    for (const auto &[s, v] : b) {
        if (a.find(s) == a.end()) {
            d += std::norm(v);
        }
    }
    return std::sqrt(d);
}

/// Legal C-encodings of length n with at most k + 1 ones.
inline std::vector<Slots> legal_keys(int n, int k) {
    std::vector<Slots> out;
    for (const auto &x : strings_up_to_weight(n, std::min(k + 1, n))) {
        out.push_back(encode_c(x, k));
    }
    return out;
}

/**
 * Replaces u by cos(eps) u + sin(eps) w with w a seeded random clean-flag
 * vector on legal encodings, orthogonal to the clean component. Stands in
 * for an imprecise preparation.
 */
inline PreparedControls perturb_preparation(const PreparedControls &u, double eps,
                                            std::uint64_t seed) {
    if (eps == 0.0) {
        return u;
    }
    CounterRng rng(CounterRng::derive(seed, static_cast<std::uint64_t>(u.n)));
    const auto keys = legal_keys(u.n, u.k);
    Vector w(static_cast<Eigen::Index>(keys.size()));
    Vector c(static_cast<Eigen::Index>(keys.size()));
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const double re = rng.normal();
        const double im = rng.normal();
        w(static_cast<Eigen::Index>(i)) = cplx(re, im);
        auto it = u.clean.find(keys[i]);
        c(static_cast<Eigen::Index>(i)) = it == u.clean.end() ? cplx(0.0) : it->second;
    }
    if (c.norm() > 0.0) {
        const Vector cn = c / c.norm();
        w -= cn * cn.dot(w);
    }
    w /= w.norm();
    PreparedControls out = u;
    const double co = std::cos(eps);
    const double si = std::sin(eps);
    for (auto &[s, a] : out.clean) {
        a *= co;
    }
    for (auto &comp : out.dirty) {
        for (auto &[s, a] : comp) {
            a *= co;
        }
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
        out.clean[keys[i]] += si * w(static_cast<Eigen::Index>(i));
    }
    return out;
}

} // namespace fqsim
