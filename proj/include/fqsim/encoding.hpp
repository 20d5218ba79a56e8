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
 * Succinct encodings of low-weight bit strings, the exponential state and its
 * preparation cascade, and the classical reversible maps used by the clean-up
 * conversion and the recursive measurement.
 *
 * C-encoding of x in {0,1}^n with k + 1 slots: slot i holds the run of zeros
 * before the i-th one; unused slots hold the sentinel n. Strings with more
 * than k + 1 ones keep only their first k + 1 ones.
 *
 * B-encoding (prepared before clean-up): the first h slots as above, slot
 * h + 1 a shifted exponential state starting at t (the trailing zeros), the
 * remaining slots the exponential state itself.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fqsim/errors.hpp"
#include "fqsim/linalg.hpp"
#include "fqsim/resources.hpp"

namespace fqsim {

using BitString = std::vector<std::uint8_t>;
/// One encoded basis state: slot values in order.
using Slots = std::vector<int>;

inline int weight(const BitString &x) {
    return static_cast<int>(std::count(x.begin(), x.end(), std::uint8_t{1}));
}

inline BitString bits_from_string(const std::string &s) {
    BitString x;
    for (char c : s) {
        if (c != '0' && c != '1') {
            throw ContractViolation("bit string may only contain 0 and 1");
        }
        x.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return x;
}

inline std::string bits_to_string(const BitString &x) {
    std::string s;
    for (auto b : x) {
        s.push_back(static_cast<char>('0' + b));
    }
    return s;
}

/// Every n-bit string of weight <= w, in lexicographic order.
inline std::vector<BitString> strings_up_to_weight(int n, int w) {
    std::vector<BitString> out;
    BitString x(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int pos, int left) {
        if (pos == n) {
            out.push_back(x);
            return;
        }
        x[static_cast<std::size_t>(pos)] = 0;
        rec(pos + 1, left);
        if (left > 0) {
            x[static_cast<std::size_t>(pos)] = 1;
            rec(pos + 1, left - 1);
            x[static_cast<std::size_t>(pos)] = 0;
        }
    };
    rec(0, w);
    return out;
}

/// C-encoding with k + 1 slots and sentinel x.size().
inline Slots encode_c(const BitString &x, int k) {
    if (k < 0) {
        throw ContractViolation("k must be nonnegative");
    }
    const int n = static_cast<int>(x.size());
    Slots s;
    int run = 0;
    for (int p = 0; p < n && static_cast<int>(s.size()) < k + 1; ++p) {
        if (x[static_cast<std::size_t>(p)]) {
            s.push_back(run);
            run = 0;
        } else {
            ++run;
        }
    }
    s.resize(static_cast<std::size_t>(k + 1), n);
    return s;
}

/// 0-based positions of the ones an encoding describes; throws EncoderBug
/// on anything that is not a legal encoding for length n.
inline std::vector<int> positions_of(const Slots &s, int n) {
    std::vector<int> pos;
    int next = 0;
    bool padding = false;
    for (int v : s) {
        if (v == n) {
            padding = true;
            continue;
        }
        if (padding || v < 0 || v > n) {
            throw EncoderBug("illegal C-encoding slot sequence");
        }
        const int p = next + v;
        if (p >= n) {
            throw EncoderBug("C-encoding runs past the end of the string");
        }
        pos.push_back(p);
        next = p + 1;
    }
    return pos;
}

inline bool is_valid_c(const Slots &s, int n) {
    try {
        (void)positions_of(s, n);
        return true;
    } catch (const EncoderBug &) {
        return false;
    }
}

/// Encoding of the string with ones at `positions` (ascending, 0-based).
inline Slots slots_from_positions(const std::vector<int> &positions, int n, int k) {
    if (static_cast<int>(positions.size()) > k + 1) {
        throw ContractViolation("more ones than slots");
    }
    Slots s;
    int next = 0;
    for (int p : positions) {
        if (p < next || p >= n) {
            throw ContractViolation("positions must be ascending and in range");
        }
        s.push_back(p - next);
        next = p + 1;
    }
    s.resize(static_cast<std::size_t>(k + 1), n);
    return s;
}

inline BitString decode_c(const Slots &s, int n) {
    BitString x(static_cast<std::size_t>(n), 0);
    for (int p : positions_of(s, n)) {
        x[static_cast<std::size_t>(p)] = 1;
    }
    return x;
}

/// Number of non-sentinel slots.
inline int encoded_weight(const Slots &s, int n) {
    return static_cast<int>(std::count_if(s.begin(), s.end(), [n](int v) { return v != n; }));
}

/**
 * Splits an encoding of length n into encodings of the two halves, each
 * with the same slot count. Exact on legal encodings.
 */
inline std::pair<Slots, Slots> split_c(const Slots &s, int n) {
    if (n < 2 || (n & (n - 1)) != 0) {
        throw ContractViolation("split needs a power-of-two length >= 2");
    }
    const int k = static_cast<int>(s.size()) - 1;
    const int half = n / 2;
    std::vector<int> left;
    std::vector<int> right;
    for (int p : positions_of(s, n)) {
        if (p < half) {
            left.push_back(p);
        } else {
            right.push_back(p - half);
        }
    }
    return {slots_from_positions(left, half, k), slots_from_positions(right, half, k)};
}

/// Modeled cost of one split: decode, compare and re-encode k + 1 slots.
inline std::int64_t split_gate_cost(int n, int k, const CostModel &cost = {}) {
    return 3 * static_cast<std::int64_t>(k + 1) * cost.arithmetic(bits_for(n + 1));
}

/// Slot i becomes s_1 + ... + s_i + i (mod modulus); values >= modulus are
/// left alone so the map stays a permutation of a larger digit range.
inline Slots prefix_sums(Slots s, int modulus) {
    int prev = 0;
    for (auto &v : s) {
        if (v < modulus) {
            v = (v + prev + 1) % modulus;
        }
        prev = v % modulus;
    }
    return s;
}

inline Slots prefix_sums_inverse(Slots s, int modulus) {
    for (std::size_t i = s.size(); i-- > 0;) {
        const int prev = i == 0 ? 0 : s[i - 1] % modulus;
        if (s[i] < modulus) {
            s[i] = ((s[i] - prev - 1) % modulus + modulus) % modulus;
        }
    }
    return s;
}

/// P(Bin(n, p) > k): the weight omitted by a cutoff k.
inline double binomial_tail(int n, double p, int k) {
    if (k >= n) {
        return 0.0;
    }
    // sum the kept part in log space and subtract; cancellation is fine at
    // desk scale, but sum the tail directly when it is the smaller side
    double tail = 0.0;
    for (int j = k + 1; j <= n; ++j) {
        const double lc = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
        tail += std::exp(lc + j * std::log(p) + (n - j) * std::log1p(-p));
    }
    return tail;
}

/**
 * Split of (alpha|0> + beta|1>)^{⊗n} into weight <= k terms and the rest.
 * `kept_weights` holds amplitudes; enumerates strings, so small n only.
 */
struct TailDecomposition {
    double mu_sq = 0.0;
    std::map<BitString, double> kept_weights;

    static TailDecomposition of(int n, int k, double alpha, double beta) {
        if (n > 24) {
            throw InfeasibleParams("tail decomposition enumerates strings; n <= 24");
        }
        TailDecomposition t;
        for (const auto &x : strings_up_to_weight(n, std::min(k, n))) {
            const int w = weight(x);
            t.kept_weights[x] = std::pow(alpha, n - w) * std::pow(beta, w);
        }
        t.mu_sq = binomial_tail(n, beta * beta, k);
        return t;
    }

    [[nodiscard]] double total() const {
        double s = mu_sq;
        for (const auto &[x, a] : kept_weights) {
            s += a * a;
        }
        return s;
    }
};

/// (1/sqrt(1 + g^2)) [[1, -g], [g, 1]].
inline Matrix m_gamma(double gamma) {
    if (gamma < 0.0) {
        throw ContractViolation("M(gamma) needs gamma >= 0");
    }
    Matrix m(2, 2);
    const double c = 1.0 / std::sqrt(1.0 + gamma * gamma);
    m << c, -gamma * c, gamma * c, c;
    return m;
}

inline bool is_pow2(long v) { return v > 0 && (v & (v - 1)) == 0; }

inline int log2_exact(long q) {
    int r = 0;
    while ((1L << r) < q) {
        ++r;
    }
    return r;
}

/**
 * Preparation circuit for the exponential state on r + 1 qubits
 * (q = 2^r, most significant qubit first, so value q is the MSB alone).
 * Acts on vectors of length 2q without forming the matrix.
 */
class PhiCascade {
  public:
    PhiCascade(long q, double alpha, double beta) : q_(q), alpha_(alpha), beta_(beta) {
        if (!is_pow2(q)) {
            throw ContractViolation("q must be a power of two");
        }
        if (std::abs(alpha * alpha + beta * beta - 1.0) > 1e-12) {
            throw ContractViolation("alpha^2 + beta^2 must equal 1");
        }
        r_ = log2_exact(q);
        aq_ = std::pow(alpha, static_cast<double>(q));
        // sqrt(1 - alpha^{2q}) without cancellation for alpha near 1
        cq_ = std::sqrt(-std::expm1(2.0 * static_cast<double>(q) * std::log(alpha)));
        if (alpha == 0.0) {
            cq_ = 1.0;
        }
        for (int j = 0; j < r_; ++j) {
            gamma_.push_back(std::pow(alpha, static_cast<double>(1L << j)));
        }
    }

    [[nodiscard]] long q() const { return q_; }
    [[nodiscard]] long dim() const { return 2 * q_; }
    /// gates in one application: MSB rotation plus r controlled rotations
    [[nodiscard]] int gate_count() const { return r_ + 1; }

    void apply(Vector &v) const {
        check(v);
        msb_rotation(v, false);
        for (int j = 0; j < r_; ++j) {
            controlled_m(v, j, false);
        }
    }

    void apply_adjoint(Vector &v) const {
        check(v);
        for (int j = r_ - 1; j >= 0; --j) {
            controlled_m(v, j, true);
        }
        msb_rotation(v, true);
    }

    [[nodiscard]] Matrix matrix() const {
        Matrix u(dim(), dim());
        for (long c = 0; c < dim(); ++c) {
            Vector e = Vector::Zero(dim());
            e(c) = 1.0;
            apply(e);
            u.col(c) = e;
        }
        return u;
    }

  private:
    void check(const Vector &v) const {
        if (v.size() != dim()) {
            throw DimensionError("cascade acts on 2q amplitudes");
        }
    }

    void msb_rotation(Vector &v, bool adjoint) const {
        // |0> -> c|0> + a|1>, |1> -> -a|0> + c|1>
        const double s = adjoint ? -aq_ : aq_;
        for (long low = 0; low < q_; ++low) {
            const cplx z = v(low);
            const cplx o = v(low + q_);
            v(low) = cq_ * z - s * o;
            v(low + q_) = s * z + cq_ * o;
        }
    }

    void controlled_m(Vector &v, int j, bool adjoint) const {
        const double g = gamma_[static_cast<std::size_t>(j)];
        const double c = 1.0 / std::sqrt(1.0 + g * g);
        const double s = (adjoint ? -g : g) * c;
        const long bit = 1L << j;
        for (long val = 0; val < q_; ++val) {
            if (val & bit) {
                continue;
            }
            const cplx z = v(val);
            const cplx o = v(val | bit);
            v(val) = c * z - s * o;
            v(val | bit) = s * z + c * o;
        }
    }

    long q_;
    double alpha_;
    double beta_;
    int r_ = 0;
    double aq_ = 0.0;
    double cq_ = 0.0;
    std::vector<double> gamma_;
};

/// Closed form of the exponential state with top value `top`, as a vector
/// of length `dim` (>= top + 1).
inline Vector phi_closed_form(long top, double alpha, double beta, long dim) {
    if (top < 0 || dim < top + 1) {
        throw DimensionError("exponential state does not fit");
    }
    Vector v = Vector::Zero(dim);
    double a = 1.0;
    for (long s = 0; s < top; ++s) {
        v(s) = beta * a;
        a *= alpha;
    }
    v(top) = a;
    return v;
}

/// The exponential state on one (q + 1)-dimensional register, through the
/// cascade; support above q is checked to vanish.
inline Vector prepare_phi_vector(long q, double alpha, double beta) {
    PhiCascade cascade(q, alpha, beta);
    Vector v = Vector::Zero(cascade.dim());
    v(0) = 1.0;
    cascade.apply(v);
    if (v.tail(cascade.dim() - q - 1).norm() > 1e-12) {
        throw EncoderBug("cascade leaked above value q");
    }
    return v.head(q + 1);
}

/// The closed form 1 - (1 - beta) alpha^{2(q-t)}; exact for t >= 1, a lower
/// bound at t = 0.
inline double overlap_phi_closed_form(long q, long t, double alpha, double beta) {
    if (t < 0 || t > q) {
        throw ContractViolation("overlap needs 0 <= t <= q");
    }
    return 1.0 - (1.0 - beta) * std::pow(alpha, 2.0 * static_cast<double>(q - t));
}

/// <phi_{q-t}|phi_q>. At t = 0 both states coincide and the overlap is 1.
inline double overlap_phi(long q, long t, double alpha, double beta) {
    const double c = overlap_phi_closed_form(q, t, alpha, beta);
    return t == 0 ? 1.0 : c;
}

/// Smallest power of two q with q >= m + log2(1/eps) / beta^2.
inline long q_bound(int m, double beta, double eps) {
    const double need = m + std::log2(1.0 / eps) / (beta * beta);
    long q = 1;
    while (static_cast<double>(q) < need) {
        q *= 2;
    }
    return q;
}

/**
 * B-encoding of x (|x| <= k) as sparse amplitudes over k + 1 slots of values
 * 0..q.
 */
inline std::map<Slots, double> encode_b(const BitString &x, int k, long q, double alpha,
                                        double beta) {
    const int n = static_cast<int>(x.size());
    const int h = weight(x);
    if (h > k) {
        throw ContractViolation("B-encoding needs |x| <= k");
    }
    if (q < n) {
        throw ContractViolation("B-encoding needs q >= n");
    }
    Slots head = encode_c(x, k);
    head.resize(static_cast<std::size_t>(h));
    const auto pos = positions_of(encode_c(x, k), n);
    const long t = pos.empty() ? n : n - 1 - pos.back();
    // register h + 1: sum_j alpha^j beta |j + t> + alpha^{q-t} |q>
    std::vector<std::pair<long, double>> shifted;
    for (long j = 0; j < q - t; ++j) {
        shifted.emplace_back(j + t, std::pow(alpha, static_cast<double>(j)) * beta);
    }
    shifted.emplace_back(q, std::pow(alpha, static_cast<double>(q - t)));
    const Vector phi = phi_closed_form(q, alpha, beta, q + 1);
    std::map<Slots, double> out;
    std::vector<long> tail(static_cast<std::size_t>(k - h), 0);
    for (const auto &[v, a] : shifted) {
        // enumerate the k - h trailing exponential registers
        std::fill(tail.begin(), tail.end(), 0);
        while (true) {
            Slots s = head;
            s.push_back(static_cast<int>(v));
            double amp = a;
            for (long tv : tail) {
                s.push_back(static_cast<int>(tv));
                amp *= phi(tv).real();
            }
            out[s] = amp;
            std::size_t i = 0;
            for (; i < tail.size(); ++i) {
                if (++tail[i] <= q) {
                    break;
                }
                tail[i] = 0;
            }
            if (i == tail.size()) {
                break;
            }
        }
    }
    return out;
}

} // namespace fqsim
