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
 * Compressed segment: the m control qubits live as k + 1 C-encoded slots.
 *
 * Joint states are sparse maps from a digit key to a target vector. A key
 * lists, in order, the slots of every control group still awaiting
 * measurement (k + 1 digits each) followed by the slots of measured
 * single-position groups ("dead" digits, traced out at the end). Every
 * application of a prepared control state gets its own error flag, which is
 * read out as part of the measurement.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fqsim/encoding.hpp"
#include "fqsim/errors.hpp"
#include "fqsim/linalg.hpp"
#include "fqsim/oracle.hpp"
#include "fqsim/preparation.hpp"
#include "fqsim/resources.hpp"
#include "fqsim/rng.hpp"
#include "fqsim/uncompressed.hpp"
#include "fqsim/walk.hpp"

namespace fqsim {

using Key = std::u16string;

inline Key to_key(const Slots &s) {
    Key k;
    k.reserve(s.size());
    for (int v : s) {
        k.push_back(static_cast<char16_t>(v));
    }
    return k;
}

inline Slots to_slots(const Key &k, std::size_t from = 0, std::size_t count = Key::npos) {
    Slots s;
    const std::size_t end = count == Key::npos ? k.size() : from + count;
    for (std::size_t i = from; i < end; ++i) {
        s.push_back(static_cast<int>(k[i]));
    }
    return s;
}

/// Desk-scale caps on compressed parameters.
struct CompressionCaps {
    int max_m = 64;
    long max_q = 1L << 20;
    double max_keys = 2e6;
};

inline double count_keys(int m, int k) {
    double total = 0.0;
    double c = 1.0;
    for (int w = 0; w <= std::min(k + 1, m); ++w) {
        total += c;
        c = c * (m - w) / (w + 1);
    }
    return total;
}

struct CompressionParams {
    int m = 8;
    int k = 2;
    int kprime = 2;
    long q = 1024;
    double alpha = 1.0;
    double beta = 0.0;
    /// per-measurement and per-segment truncation budgets
    double eps = 0.0;
    double eps_prime = 0.0;

    /// beta pinned to tan(1/(8m)); eps / eps' are the tails k and k' give.
    static CompressionParams pinned(int m, int k, int kprime, long q) {
        const SegmentParams sp = SegmentParams::pinned_for(m);
        CompressionParams p;
        p.m = m;
        p.k = k;
        p.kprime = kprime;
        p.q = q;
        p.alpha = sp.alpha;
        p.beta = sp.beta;
        p.eps = binomial_tail(m, sp.beta * sp.beta, k);
        p.eps_prime = binomial_tail(m, sp.beta * sp.beta, kprime);
        return p;
    }

    [[nodiscard]] int slots() const { return k + 1; }
    [[nodiscard]] double theta() const { return std::atan2(beta * beta, alpha * alpha); }
    [[nodiscard]] int log_m() const { return log2_exact(m); }

    [[nodiscard]] SegmentParams segment(double t0) const {
        SegmentParams sp;
        sp.m = m;
        sp.alpha = alpha;
        sp.beta = beta;
        sp.t0 = t0;
        sp.pinned = std::abs(beta * beta / (1.0 - beta * beta) - std::tan(1.0 / (8.0 * m))) <= 1e-12;
        return sp;
    }

    void validate(const CompressionCaps &caps = {}) const {
        if (!is_pow2(m)) {
            throw ContractViolation("m must be a power of two");
        }
        if (k < 0 || kprime < 1) {
            throw ContractViolation("need k >= 0 and k' >= 1");
        }
        if (!is_pow2(q) || q < m + 2) {
            throw ContractViolation("q must be a power of two with q >= m + 2");
        }
        if (std::abs(alpha * alpha + beta * beta - 1.0) > 1e-12 || alpha <= 0.0 || beta < 0.0) {
            throw ContractViolation("alpha^2 + beta^2 must equal 1");
        }
        if (m > caps.max_m || q > caps.max_q || count_keys(m, k) > caps.max_keys) {
            throw InfeasibleParams("compressed parameters exceed the desk-scale caps (m=" +
                                   std::to_string(m) + ", k=" + std::to_string(k) +
                                   ", q=" + std::to_string(q) + ")");
        }
    }
};

struct ChosenParams {
    CompressionParams params;
    int segments = 0;
};

/**
 * m from ||H|| T / eps_tot, eps' = eps_tot / (4T), eps = eps' / log2 m, k and
 * k' the smallest cutoffs whose exact binomial tails fit those budgets, q at
 * its overlap bound.
 */
inline ChosenParams choose_params(double total_time, double norm_h, double eps_tot,
                                  const CompressionCaps &caps = {}) {
    if (!(total_time > 0.0) || !(norm_h > 0.0) || !(eps_tot > 0.0)) {
        throw ContractViolation("choose_params needs positive T, ||H|| and eps_tot");
    }
    ChosenParams out;
    out.segments = segment_count(total_time);
    CompressionParams &p = out.params;
    p.m = choose_m(norm_h, total_time, eps_tot);
    if (p.m > caps.max_m) {
        throw InfeasibleParams("m = " + std::to_string(p.m) + " exceeds the desk-scale cap");
    }
    const SegmentParams sp = SegmentParams::pinned_for(p.m);
    p.alpha = sp.alpha;
    p.beta = sp.beta;
    p.eps_prime = eps_tot / (4.0 * total_time);
    const int lm = log2_exact(p.m);
    p.eps = lm > 0 ? p.eps_prime / lm : p.eps_prime;
    const double b2 = p.beta * p.beta;
    p.k = 0;
    while (binomial_tail(p.m, b2, p.k) > p.eps) {
        ++p.k;
    }
    p.kprime = 1;
    while (binomial_tail(p.m, b2, p.kprime) > p.eps_prime) {
        ++p.kprime;
    }
    p.q = std::max(q_bound(p.m, p.beta, p.eps), static_cast<long>(next_power_of_two(p.m + 2)));
    if (p.eps * p.kprime * std::max(lm, 1) > 1.0) {
        throw InfeasibleParams("eps k' log m exceeds 1");
    }
    p.validate(caps);
    return out;
}

/// A prepared control state with digit keys.
struct KeyedControls {
    int n = 0;
    std::map<Key, cplx> clean;
    std::vector<std::map<Key, cplx>> dirty;
    double nu_weight = 0.0;
};

inline KeyedControls keyed(const PreparedControls &u) {
    KeyedControls out;
    out.n = u.n;
    out.nu_weight = u.nu_weight;
    for (const auto &[s, a] : u.clean) {
        out.clean[to_key(s)] = a;
    }
    for (const auto &comp : u.dirty) {
        std::map<Key, cplx> c;
        for (const auto &[s, a] : comp) {
            c[to_key(s)] = a;
        }
        out.dirty.push_back(std::move(c));
    }
    return out;
}

/**
 * Prepared states for every block length m, m/2, ..., 1. `injected` rotates
 * each one away from the ideal by that angle (seeded per length).
 */
class ControlBank {
  public:
    ControlBank(const CompressionParams &p, double injected = 0.0, std::uint64_t seed = 0)
        : injected_(injected) {
        for (int n = p.m; n >= 1; n /= 2) {
            PreparedControls u = prepare_controls(n, p.k, p.q, p.alpha, p.beta);
            if (injected != 0.0) {
                u = perturb_preparation(u, injected, seed);
            }
            by_n_.emplace(n, keyed(u));
        }
    }

    [[nodiscard]] const KeyedControls &at(int n) const {
        auto it = by_n_.find(n);
        if (it == by_n_.end()) {
            throw ContractViolation("no prepared controls for block length " + std::to_string(n));
        }
        return it->second;
    }
    [[nodiscard]] double injected() const { return injected_; }

  private:
    std::map<int, KeyedControls> by_n_;
    double injected_;
};

/// Positions [lo, lo + n).
struct ControlGroup {
    int lo = 0;
    int n = 1;
};

/// One branch of a compressed joint state.
struct Branch {
    std::map<Key, Vector> amps;
    std::deque<ControlGroup> pending;
    MeasurementTrace trace;

    [[nodiscard]] double squared_norm() const {
        double s = 0.0;
        for (const auto &[key, v] : amps) {
            s += v.squaredNorm();
        }
        return s;
    }
    /// a dirty flag ends the attempt
    [[nodiscard]] bool done() const {
        return pending.empty() || trace.truncated || trace.flag_dirty;
    }

    /// Reduced target density (slots and dead digits traced out).
    [[nodiscard]] Matrix target_density() const {
        Matrix rho;
        for (const auto &[key, v] : amps) {
            if (rho.size() == 0) {
                rho = Matrix::Zero(v.size(), v.size());
            }
            rho += v * v.adjoint();
        }
        return rho;
    }
};

/// Joint state sum_x amp(x) |C x>|target>, one pending group over m positions.
inline Branch prepared_branch(const std::map<Key, cplx> &controls, const Vector &target, int m) {
    Branch b;
    for (const auto &[key, a] : controls) {
        b.amps.emplace(key, a * target);
    }
    b.pending.push_back({0, m});
    return b;
}

/// Multiplies every basis state by (i dir)^h, h the non-sentinel slot count
/// of the front group.
inline void apply_phase_compressed(Branch &b, int slots, int direction = +1) {
    if (b.pending.empty()) {
        throw ContractViolation("phase needs an unmeasured control group");
    }
    const int n = b.pending.front().n;
    const cplx unit(0.0, static_cast<double>(direction));
    for (auto &[key, v] : b.amps) {
        const int h = encoded_weight(to_slots(key, 0, static_cast<std::size_t>(slots)), n);
        cplx ph = 1.0;
        for (int i = 0; i < h; ++i) {
            ph *= unit;
        }
        v *= ph;
    }
}

/// Everything a compressed attempt needs besides the target state.
class CompressedContext {
  public:
    CompressedContext(CompressionParams params, const DrivingSpec &driving, OracleString oracle,
                      std::shared_ptr<const ControlBank> bank, DriveOptions options = {},
                      double t0 = 0.0)
        : params_(params), oracle_(std::move(oracle)), bank_(std::move(bank)),
          drive_(std::make_shared<DriveEngine>(driving, options, 4L * params.m, t0)) {
        params_.validate();
        if (driving.dim != oracle_.size()) {
            throw DimensionError("driving spec and oracle disagree on the target dimension");
        }
        if (!bank_) {
            bank_ = std::make_shared<ControlBank>(params_);
        }
    }

    [[nodiscard]] const CompressionParams &params() const { return params_; }
    [[nodiscard]] const OracleString &oracle() const { return oracle_; }
    [[nodiscard]] const DriveEngine &drive() const { return *drive_; }
    [[nodiscard]] const ControlBank &bank() const { return *bank_; }
    [[nodiscard]] std::shared_ptr<const ControlBank> bank_ptr() const { return bank_; }
    [[nodiscard]] std::size_t target_dim() const { return oracle_.size(); }
    [[nodiscard]] int m() const { return params_.m; }

  private:
    CompressionParams params_;
    OracleString oracle_;
    std::shared_ptr<const ControlBank> bank_;
    std::shared_ptr<DriveEngine> drive_;
};

/**
 * Target unitary for controls whose first k' ones sit at `positions`:
 * drive windows between consecutive query times, Q at each, and the
 * program's phase corrections, in program order.
 */
inline Matrix drive_query_unitary(const CompressedContext &ctx, const SegmentProgram &prog,
                                  const std::vector<int> &positions) {
    struct Event {
        bool query = false;
        bool corrected = false;
        double phi = 0.0;
    };
    std::map<int, Event> events;
    for (int p : positions) {
        events[p + 1].query = true;
    }
    for (const auto &[p, phi] : prog.corrections) {
        events[p + 1].corrected = true;
        events[p + 1].phi += phi;
    }
    const auto d = static_cast<Eigen::Index>(ctx.target_dim());
    const Matrix q = ctx.oracle().linear_combination(0.0, 1.0);
    Matrix u = Matrix::Identity(d, d);
    auto ops = [&](const Event &e) {
        if (e.query) {
            u = q * u;
        }
        if (e.corrected) {
            u = ctx.oracle().phase_rotation(e.phi) * u;
        }
    };
    const int m = ctx.m();
    if (!prog.reversed) {
        int cur = 0;
        for (const auto &[t, e] : events) {
            u = ctx.drive().window(cur, t) * u;
            cur = t;
            ops(e);
        }
        u = ctx.drive().window(cur, m) * u;
    } else {
        int cur = m;
        for (auto it = events.rbegin(); it != events.rend(); ++it) {
            u = ctx.drive().reverse_window(it->first, cur) * u;
            cur = it->first;
            ops(it->second);
        }
        u = ctx.drive().reverse_window(0, cur) * u;
    }
    return u;
}

/// Applies the controlled drives and queries to every key; returns the
/// largest number of queries any basis state received.
inline int apply_drive_queries_compressed(Branch &b, const CompressedContext &ctx,
                                          const SegmentProgram &prog) {
    const int slots = ctx.params().slots();
    const int kp = ctx.params().kprime;
    std::map<std::vector<int>, Matrix> cache;
    int most = 0;
    for (auto &[key, v] : b.amps) {
        std::vector<int> pos = positions_of(to_slots(key, 0, static_cast<std::size_t>(slots)), ctx.m());
        if (static_cast<int>(pos.size()) > kp) {
            pos.resize(static_cast<std::size_t>(kp));
        }
        most = std::max(most, static_cast<int>(pos.size()));
        auto it = cache.find(pos);
        if (it == cache.end()) {
            it = cache.emplace(pos, drive_query_unitary(ctx, prog, pos)).first;
        }
        v = it->second * v;
    }
    if (most > kp) {
        throw ContractViolation("query cap exceeded");
    }
    return most;
}

/// Outcomes of one measurement step on the front group. Dirty-flag
/// branches are built on demand from `overlap`.
struct StepOutcomes {
    Branch zero;
    Branch one;
    std::map<Key, Vector> overlap;
    MeasurementTrace one_trace;
    MeasurementTrace dirty_trace;
    std::vector<double> dirty_weights;
};

namespace detail {

inline void drop_zero_norm(std::map<Key, Vector> &amps) {
    for (auto it = amps.begin(); it != amps.end();) {
        if (it->second.squaredNorm() == 0.0) {
            it = amps.erase(it);
        } else {
            ++it;
        }
    }
}

/// After d = 1: record a located one, or split the group into halves.
inline void advance_after_one(Branch &b, int slots, int kprime) {
    const ControlGroup g = b.pending.front();
    b.pending.pop_front();
    const auto w = static_cast<std::size_t>(slots);
    std::map<Key, Vector> next;
    if (g.n == 1) {
        b.trace.ones.push_back(g.lo);
        for (auto &[key, v] : b.amps) {
            Key moved = key.substr(w) + key.substr(0, w);
            next.emplace(std::move(moved), std::move(v));
        }
        if (static_cast<int>(b.trace.ones.size()) >= kprime) {
            b.trace.truncated = true;
        }
    } else {
        for (auto &[key, v] : b.amps) {
            const auto [left, right] = split_c(to_slots(key, 0, w), g.n);
            Key moved = to_key(left) + to_key(right) + key.substr(w);
            if (!next.emplace(std::move(moved), std::move(v)).second) {
                throw EncoderBug("split is not injective on the support");
            }
        }
        b.pending.push_front({g.lo + g.n / 2, g.n / 2});
        b.pending.push_front({g.lo, g.n / 2});
    }
    b.amps = std::move(next);
}

inline double squared_norm(const std::map<Key, cplx> &c) {
    double s = 0.0;
    for (const auto &[k, a] : c) {
        s += std::norm(a);
    }
    return s;
}

/// Rejects a branch before it is built when its key count would pass the cap.
inline void guard_branch_keys(std::size_t keys) {
    if (static_cast<double>(keys) > CompressionCaps{}.max_keys) {
        throw InfeasibleParams("branch would hold " + std::to_string(keys) +
                               " keys; raise the cap or lower m");
    }
}

} // namespace detail

/// psi - u <u|psi> for a step whose overlap is already computed.
inline Branch one_branch(const StepOutcomes &o, const Branch &from, const KeyedControls &u,
                         int slots, int kprime) {
    detail::guard_branch_keys(from.amps.size() + u.clean.size() * o.overlap.size());
    Branch one;
    one.trace = o.one_trace;
    one.pending = from.pending;
    one.amps = from.amps;
    for (const auto &[g, a] : u.clean) {
        for (const auto &[rest, vec] : o.overlap) {
            Key key = g + rest;
            auto it = one.amps.find(key);
            if (it == one.amps.end()) {
                one.amps.emplace(std::move(key), -a * vec);
            } else {
                it->second -= a * vec;
            }
        }
    }
    detail::drop_zero_norm(one.amps);
    detail::advance_after_one(one, slots, kprime);
    return one;
}

/**
 * One two-outcome measurement of the front group against its prepared
 * state u: the d = 0 branch keeps <u|psi> and drops the group; the d = 1
 * branch keeps psi - u <u|psi> with a clean flag. Each residual flag
 * direction j gives a further branch -u_j <u|psi>, which ends the attempt.
 */
inline StepOutcomes measure_step(const Branch &b, const KeyedControls &u, int slots, int kprime,
                                 bool build_one = true) {
    if (b.done()) {
        throw ContractViolation("measurement step on a finished branch");
    }
    const auto w = static_cast<std::size_t>(slots);
    StepOutcomes out;
    std::map<Key, Vector> &v = out.overlap;
    for (const auto &[key, vec] : b.amps) {
        auto it = u.clean.find(key.substr(0, w));
        if (it == u.clean.end()) {
            continue;
        }
        Key rest = key.substr(w);
        auto vt = v.find(rest);
        if (vt == v.end()) {
            v.emplace(std::move(rest), std::conj(it->second) * vec);
        } else {
            vt->second += std::conj(it->second) * vec;
        }
    }
    MeasurementTrace t0 = b.trace;
    t0.d_sequence.push_back(0);
    ++t0.steps;
    MeasurementTrace t1 = b.trace;
    t1.d_sequence.push_back(1);
    ++t1.steps;
    out.one_trace = t1;

    out.zero.trace = t0;
    out.zero.amps = v;
    out.zero.pending = b.pending;
    out.zero.pending.pop_front();

    if (build_one) {
        out.one = one_branch(out, b, u, slots, kprime);
    }

    out.dirty_trace = t1;
    out.dirty_trace.flag_dirty = true;
    double vn = 0.0;
    for (const auto &[rest, vec] : v) {
        vn += vec.squaredNorm();
    }
    for (const auto &comp : u.dirty) {
        out.dirty_weights.push_back(detail::squared_norm(comp) * vn);
    }
    return out;
}

/// The branch for residual flag direction j of a measurement step.
inline Branch dirty_branch(const StepOutcomes &o, const Branch &from, const KeyedControls &u,
                           std::size_t j) {
    detail::guard_branch_keys(u.dirty.at(j).size() * o.overlap.size());
    Branch d;
    d.trace = o.dirty_trace;
    d.pending = from.pending;
    for (const auto &[g, a] : u.dirty.at(j)) {
        for (const auto &[rest, vec] : o.overlap) {
            d.amps.emplace(g + rest, -a * vec);
        }
    }
    detail::drop_zero_norm(d.amps);
    return d;
}

/// Modeled cost and width of the measurement step on a group of length n.
inline std::int64_t measurement_step_gates(int n, int k, long q, bool split,
                                           const CostModel &cost = {}) {
    std::int64_t g = 2 * preparation_gate_cost(n, k, q, cost);
    g += (k + 1) * cost.arithmetic(bits_for(n + 1)) + (log2_exact(q) + 1);
    if (split) {
        g += split_gate_cost(n, k, cost);
    }
    return g;
}

inline std::int64_t live_control_qubits(const Branch &b, int k, long q) {
    std::int64_t live = log2_exact(q) + 1 + bits_for(k + 2);
    for (const auto &g : b.pending) {
        live += static_cast<std::int64_t>(k + 1) * bits_for(g.n + 1);
    }
    live += static_cast<std::int64_t>(b.trace.ones.size()) * (k + 1);
    return live;
}

/**
 * Sampled recursive measurement until every group is resolved or k' ones
 * are found. One uniform per measurement, plus one to read the flag when
 * the step can leave it dirty.
 */
inline Branch measure_compressed_sampled(Branch b, const ControlBank &bank,
                                         const CompressionParams &p, CounterRng &rng,
                                         ResourceTally *tally = nullptr,
                                         std::int64_t target_qubits = 0) {
    while (!b.done()) {
        const int n = b.pending.front().n;
        if (tally != nullptr) {
            tally->modeled_gates += measurement_step_gates(n, p.k, p.q, n > 1);
            tally->note_qubits(live_control_qubits(b, p.k, p.q) + target_qubits);
        }
        const KeyedControls &u = bank.at(n);
        StepOutcomes o = measure_step(b, u, p.slots(), p.kprime, false);
        const double total = b.squared_norm();
        const double zero = o.zero.squared_norm();
        if (rng.uniform() < zero / total) {
            b = std::move(o.zero);
            continue;
        }
        double dirty = 0.0;
        for (double dw : o.dirty_weights) {
            dirty += dw;
        }
        const double clean = std::max(0.0, total - (2.0 - detail::squared_norm(u.clean)) * zero);
        double r = dirty > 0.0 ? rng.uniform() * (clean + dirty) : 0.0;
        if (dirty <= 0.0 || r < clean) {
            b = one_branch(o, b, u, p.slots(), p.kprime);
            continue;
        }
        r -= clean;
        std::size_t j = 0;
        while (j + 1 < o.dirty_weights.size() && r >= o.dirty_weights[j]) {
            r -= o.dirty_weights[j];
            ++j;
        }
        b = dirty_branch(o, b, u, j);
    }
    return b;
}

/// Relative squared norm below which an exhaustive compressed branch is
/// dropped, and the total weight that may be dropped that way.
inline constexpr double kCompressedPruneTolerance = 1e-12;
inline constexpr double kCompressedDiscardBudget = 1e-10;

struct ExhaustiveMeasurement {
    std::vector<Branch> leaves;
    /// relative weight dropped by pruning
    double discarded = 0.0;
};

/// Every leaf of the recursive measurement, by exact branch arithmetic.
inline ExhaustiveMeasurement measure_compressed_exhaustive(const Branch &start,
                                                           const ControlBank &bank,
                                                           const CompressionParams &p,
                                                           double reference_weight = 0.0) {
    ExhaustiveMeasurement out;
    const double w0 = reference_weight > 0.0 ? reference_weight : start.squared_norm();
    std::vector<Branch> stack{start};
    while (!stack.empty()) {
        Branch b = std::move(stack.back());
        stack.pop_back();
        const double w = b.squared_norm();
        if (w < kCompressedPruneTolerance * w0) {
            out.discarded += w / w0;
            continue;
        }
        if (b.done()) {
            out.leaves.push_back(std::move(b));
            continue;
        }
        const KeyedControls &u = bank.at(b.pending.front().n);
        StepOutcomes o = measure_step(b, u, p.slots(), p.kprime);
        for (std::size_t j = 0; j < o.dirty_weights.size(); ++j) {
            if (o.dirty_weights[j] < kCompressedPruneTolerance * w0) {
                out.discarded += o.dirty_weights[j] / w0;
                continue;
            }
            stack.push_back(dirty_branch(o, b, u, j));
        }
        stack.push_back(std::move(o.one));
        stack.push_back(std::move(o.zero));
    }
    if (out.discarded > kCompressedDiscardBudget) {
        throw ContractViolation("exhaustive measurement discarded more weight than budgeted");
    }
    return out;
}

struct CompressedSegmentResult {
    MeasurementTrace trace;
    PureState post_state;
    bool success = false;
    /// most queries any basis state received in this attempt
    int issued_queries = 0;
    ResourceTally resources;

    [[nodiscard]] std::vector<int> ones() const {
        std::vector<int> s = trace.ones;
        std::sort(s.begin(), s.end());
        return s;
    }
};

namespace detail {

inline ResourceTally compressed_attempt_tally(const CompressedContext &ctx,
                                              const SegmentProgram &prog,
                                              const CostModel &cost = {}) {
    const CompressionParams &p = ctx.params();
    ResourceTally t;
    t.queries = p.kprime;
    t.correction_queries = static_cast<std::int64_t>(prog.corrections.size());
    const int hb = bits_for(p.k + 2);
    const int tb = bits_for(p.m + 1);
    t.modeled_gates += preparation_gate_cost(p.m, p.k, p.q, cost);
    t.modeled_gates += 2 * cost.arithmetic(hb) + hb;                        // phase
    t.modeled_gates += 2 * static_cast<std::int64_t>(p.k + 1) * cost.arithmetic(tb); // prefix sums
    t.modeled_gates += static_cast<std::int64_t>(p.kprime + 1) *
                       (ctx.drive().spec().gate_cost + cost.arithmetic(tb));
    t.modeled_gates += p.kprime;                                             // controlled Q
    t.note_qubits(preparation_qubits(p.m, p.k, p.q) +
                  bits_for(static_cast<std::int64_t>(ctx.target_dim())));
    return t;
}

/// Prepared joint state split by the preparation's flag.
inline std::vector<Branch> prepared_members(const CompressedContext &ctx, const Vector &target) {
    const KeyedControls &u = ctx.bank().at(ctx.m());
    std::vector<Branch> members{prepared_branch(u.clean, target, ctx.m())};
    for (const auto &comp : u.dirty) {
        Branch d = prepared_branch(comp, target, ctx.m());
        d.trace.flag_dirty = true;
        members.push_back(std::move(d));
    }
    return members;
}

/// Samples one dead-digit key and returns its normalized target.
inline Vector sample_residual(const Branch &b, CounterRng &rng) {
    if (b.amps.size() == 1) {
        const Vector &v = b.amps.begin()->second;
        return v / v.norm();
    }
    const double total = b.squared_norm();
    double r = rng.uniform() * total;
    const Vector *pick = nullptr;
    for (const auto &[key, v] : b.amps) {
        pick = &v;
        r -= v.squaredNorm();
        if (r < 0.0) {
            break;
        }
    }
    return *pick / pick->norm();
}

} // namespace detail

/**
 * One compressed segment attempt with sampled measurements: prepare the
 * controls, phase, controlled drives and queries, recursive measurement.
 */
inline CompressedSegmentResult run_segment_compressed(const Vector &target,
                                                      const CompressedContext &ctx,
                                                      const SegmentProgram &prog,
                                                      CounterRng &rng) {
    if (static_cast<std::size_t>(target.size()) != ctx.target_dim()) {
        throw DimensionError("target dimension differs from the oracle length");
    }
    const CompressionParams &p = ctx.params();
    CompressedSegmentResult res;
    res.resources = detail::compressed_attempt_tally(ctx, prog);
    const KeyedControls &u = ctx.bank().at(ctx.m());
    std::vector<double> weights{detail::squared_norm(u.clean)};
    double total = weights.front();
    for (const auto &comp : u.dirty) {
        weights.push_back(detail::squared_norm(comp));
        total += weights.back();
    }
    std::size_t pick = 0;
    if (weights.size() > 1) {
        double r = rng.uniform() * total;
        while (pick + 1 < weights.size() && r >= weights[pick]) {
            r -= weights[pick];
            ++pick;
        }
    }
    Branch b = prepared_branch(pick == 0 ? u.clean : u.dirty[pick - 1], target, ctx.m());
    b.trace.flag_dirty = pick != 0;
    apply_phase_compressed(b, p.slots(), prog.direction);
    res.issued_queries = apply_drive_queries_compressed(b, ctx, prog);
    b = measure_compressed_sampled(std::move(b), ctx.bank(), p, rng, &res.resources,
                                   bits_for(static_cast<std::int64_t>(ctx.target_dim())));
    res.trace = b.trace;
    res.success = b.trace.ones.empty() && !b.trace.flag_dirty && !b.trace.truncated;
    res.post_state = PureState(target_layout(ctx.target_dim()), detail::sample_residual(b, rng));
    return res;
}

struct CompressedWalkResult {
    PureState state;
    int attempts = 0;
    bool success = false;
    ResourceTally resources;
};

/// The undo/redo walk with compressed attempts; errors are the located ones.
inline CompressedWalkResult correction_walk_compressed(const PureState &target,
                                                       const CompressedContext &ctx,
                                                       const std::vector<int> &error_positions,
                                                       CounterRng &rng, int max_attempts = 64) {
    CompressedWalkResult res;
    Vector psi = target.amps();
    auto attempt = [&](const SegmentProgram &prog) {
        CompressedSegmentResult r = run_segment_compressed(psi, ctx, prog, rng);
        psi = r.post_state.amps();
        res.resources += r.resources;
        if (r.trace.flag_dirty) {
            res.resources.flag_failures += 1;
        }
        return AttemptReport{r.success, r.ones()};
    };
    const WalkOutcome w = correction_walk_generic(SegmentProgram{}, error_positions,
                                                  ctx.params().theta(), attempt, max_attempts);
    res.attempts = w.attempts;
    res.success = w.success;
    res.resources.correction_attempts += w.attempts;
    if (!w.success) {
        res.resources.walk_failures += 1;
    }
    res.state = PureState(target.layout(), psi);
    return res;
}

struct CompressedRunOptions {
    int max_attempts = 64;
    DriveOptions drive;
    /// rotation applied to every prepared control state
    double injected_preparation = 0.0;
};

struct CompressedRunResult {
    PureState state;
    ResourceTally resources;
    bool completed = true;
    CompressionParams params;
};

/// Chains the segments of `p` over [0, T] with compressed attempts.
inline CompressedRunResult run_full_compressed(const PureState &initial, const DrivingSpec &driving,
                                               const OracleString &oracle, double total_time,
                                               const CompressionParams &p, std::uint64_t rng_seed,
                                               const CompressedRunOptions &options = {}) {
    const int segments = segment_count(total_time);
    CompressedRunResult out;
    out.params = p;
    auto bank = std::make_shared<const ControlBank>(p, options.injected_preparation, rng_seed);
    CounterRng rng(rng_seed);
    Vector psi = initial.amps();
    for (int s = 0; s < segments; ++s) {
        CompressedContext ctx(p, driving, oracle, bank, options.drive,
                              s * SegmentParams::segment_length);
        CompressedSegmentResult first = run_segment_compressed(psi, ctx, {}, rng);
        out.resources += first.resources;
        out.resources.segments += 1;
        psi = first.post_state.amps();
        if (first.success) {
            continue;
        }
        if (first.trace.flag_dirty) {
            out.resources.flag_failures += 1;
        }
        if (first.trace.ones.empty()) {
            out.completed = false;
            continue;
        }
        CompressedWalkResult w = correction_walk_compressed(PureState(initial.layout(), psi), ctx,
                                                            first.ones(), rng, options.max_attempts);
        out.resources += w.resources;
        psi = w.state.amps();
        out.completed = out.completed && w.success;
    }
    out.state = PureState(initial.layout(), psi);
    return out;
}

/// Parameters from choose_params, then the full run.
inline CompressedRunResult run_full_compressed(const PureState &initial, const DrivingSpec &driving,
                                               const OracleString &oracle, double total_time,
                                               double eps_tot, std::uint64_t rng_seed,
                                               const CompressedRunOptions &options = {}) {
    const ChosenParams c = choose_params(total_time, driving.norm_bound, eps_tot);
    return run_full_compressed(initial, driving, oracle, total_time, c.params, rng_seed, options);
}

// ---- outcome ensembles and error metrics --------------------------------

/// Outcome label: the b string, or "trunc:" and the first k' ones once k'
/// ones have been seen.
inline std::string outcome_label(const std::vector<int> &ones, int m, int kprime) {
    std::vector<int> s = ones;
    std::sort(s.begin(), s.end());
    if (static_cast<int>(s.size()) >= kprime) {
        std::string out = "trunc:";
        for (int i = 0; i < kprime; ++i) {
            out += (i ? "," : "") + std::to_string(s[static_cast<std::size_t>(i)]);
        }
        return out;
    }
    std::string b(static_cast<std::size_t>(m), '0');
    for (int p : s) {
        b[static_cast<std::size_t>(p)] = '1';
    }
    return b;
}

inline std::string outcome_alphabet(int m, int kprime) {
    return "m=" + std::to_string(m) + ";kprime=" + std::to_string(kprime);
}

/// Outcome label -> p rho (unnormalized target density).
struct OutcomeEnsemble {
    std::string alphabet;
    std::map<std::string, Matrix> weighted;

    void add(const std::string &label, const Matrix &w) {
        auto it = weighted.find(label);
        if (it == weighted.end()) {
            weighted.emplace(label, w);
        } else {
            it->second += w;
        }
    }
    [[nodiscard]] double probability(const std::string &label) const {
        auto it = weighted.find(label);
        return it == weighted.end() ? 0.0 : it->second.trace().real();
    }
    [[nodiscard]] double total() const {
        double s = 0.0;
        for (const auto &[l, w] : weighted) {
            s += w.trace().real();
        }
        return s;
    }
};

struct ErrorMetrics {
    double d_av = 0.0;
    double delta_p = 0.0;
    double d_bar = 0.0;
};

/**
 * D_av = sum ||A - B||_1, delta_p = sum |tr A - tr B|, and
 * D_bar = sum p_c T(rho_u, rho_c) with T = 1 where p_u = 0.
 */
inline ErrorMetrics compute_error_metrics(const OutcomeEnsemble &u, const OutcomeEnsemble &c) {
    if (u.alphabet != c.alphabet) {
        throw ContractViolation("outcome alphabets differ: " + u.alphabet + " vs " + c.alphabet);
    }
    std::map<std::string, std::pair<const Matrix *, const Matrix *>> labels;
    for (const auto &[l, w] : u.weighted) {
        labels[l].first = &w;
    }
    for (const auto &[l, w] : c.weighted) {
        labels[l].second = &w;
    }
    ErrorMetrics out;
    for (const auto &[l, pr] : labels) {
        const Matrix &ref = pr.first != nullptr ? *pr.first : *pr.second;
        const Matrix zero = Matrix::Zero(ref.rows(), ref.cols());
        const Matrix &a = pr.first != nullptr ? *pr.first : zero;
        const Matrix &b = pr.second != nullptr ? *pr.second : zero;
        const double pu = a.trace().real();
        const double pc = b.trace().real();
        out.d_av += trace_norm(a - b);
        out.delta_p += std::abs(pu - pc);
        if (pc > 0.0) {
            out.d_bar += pu > 0.0 ? pc * trace_distance(a / pu, b / pc) : pc;
        }
    }
    return out;
}

/// Exact outcome ensemble of one uncompressed attempt, labels truncated at k'.
inline OutcomeEnsemble uncompressed_segment_ensemble(const Vector &target, const SegmentContext &ctx,
                                                     const SegmentProgram &prog, int kprime) {
    const int m = ctx.m();
    if (m > 16) {
        throw InfeasibleParams("exact uncompressed ensembles are capped at m = 16");
    }
    OutcomeEnsemble out;
    out.alphabet = outcome_alphabet(m, kprime);
    std::vector<std::uint8_t> b(static_cast<std::size_t>(m), 0);
    for (std::uint32_t mask = 0; mask < (1U << m); ++mask) {
        std::vector<int> ones;
        for (int p = 0; p < m; ++p) {
            b[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>((mask >> (m - 1 - p)) & 1U);
            if (b[static_cast<std::size_t>(p)]) {
                ones.push_back(p);
            }
        }
        const Vector psi = segment_branch_target(target, ctx, prog, b);
        out.add(outcome_label(ones, m, kprime), psi * psi.adjoint());
    }
    return out;
}

/// Leaves of a compressed measurement as an ensemble; dirty-flag leaves get
/// a "flag:" prefix.
inline OutcomeEnsemble ensemble_of(const std::vector<Branch> &leaves, int m, int kprime) {
    OutcomeEnsemble out;
    out.alphabet = outcome_alphabet(m, kprime);
    for (const auto &leaf : leaves) {
        std::string label = outcome_label(leaf.trace.ones, m, kprime);
        if (leaf.trace.flag_dirty) {
            label = "flag:" + label;
        }
        out.add(label, leaf.target_density());
    }
    return out;
}

/// Exact outcome ensemble of one compressed attempt.
inline OutcomeEnsemble compressed_segment_ensemble(const Vector &target,
                                                   const CompressedContext &ctx,
                                                   const SegmentProgram &prog = {},
                                                   double *discarded = nullptr) {
    const CompressionParams &p = ctx.params();
    std::vector<Branch> leaves;
    double dropped = 0.0;
    const double w0 = target.squaredNorm();
    for (Branch &b : detail::prepared_members(ctx, target)) {
        apply_phase_compressed(b, p.slots(), prog.direction);
        apply_drive_queries_compressed(b, ctx, prog);
        ExhaustiveMeasurement e = measure_compressed_exhaustive(b, ctx.bank(), p, w0);
        dropped += e.discarded;
        for (auto &l : e.leaves) {
            leaves.push_back(std::move(l));
        }
    }
    if (discarded != nullptr) {
        *discarded = dropped;
    }
    return ensemble_of(leaves, p.m, p.kprime);
}

} // namespace fqsim
