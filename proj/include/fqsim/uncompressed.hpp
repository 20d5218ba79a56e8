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
 * Reference segment construction with one explicit control qubit per
 * fractional-query step.
 *
 * Each step prepares a control in alpha|0> + i s beta|1> (s = direction),
 * applies Q controlled on it, then measures it in the R basis. On the target
 * the two outcomes act as
 *
 *   b = 0:  alpha^2 I + i s beta^2 Q   = sqrt(alpha^4 + beta^4) e^{ i s theta Q}
 *   b = 1:  alpha beta (I - i s Q)      = sqrt(2) alpha beta     e^{-i s pi/4 Q}
 *
 * with tan(theta) = beta^2 / alpha^2. Both are proportional to unitaries and
 * the outcome probabilities do not depend on the target, so the dense circuit
 * and the streamed (one step at a time) evaluation agree exactly; the
 * streamed form is the only one that fits at m = 32.
 *
 * Drive placement: the window (p, p + 1) runs before the query of position
 * p, whose grid time is p + 1; the segment ends at grid time m.
 */

#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fqsim/errors.hpp"
#include "fqsim/linalg.hpp"
#include "fqsim/oracle.hpp"
#include "fqsim/resources.hpp"
#include "fqsim/rng.hpp"
#include "fqsim/statevector.hpp"
#include "fqsim/walk.hpp"

namespace fqsim {

inline bool is_power_of_two(long n) { return n > 0 && (n & (n - 1)) == 0; }

inline long next_power_of_two(long n) {
    long p = 1;
    while (p < n) {
        p *= 2;
    }
    return p;
}

struct SegmentParams {
    static constexpr double segment_length = 0.25;

    int m = 1;
    double alpha = 1.0;
    double beta = 0.0;
    /// start time of the segment
    double t0 = 0.0;
    /// true when beta^2 / alpha^2 = tan(1 / (8m))
    bool pinned = true;

    /// beta pinned so the success branch is exactly e^{-i H_Q / (4m)} per step.
    static SegmentParams pinned_for(int m, double t0 = 0.0) {
        if (!is_power_of_two(m)) {
            throw ContractViolation("m must be a power of two");
        }
        const double tn = std::tan(1.0 / (8.0 * m));
        SegmentParams p;
        p.m = m;
        p.beta = std::sqrt(tn / (1.0 + tn));
        p.alpha = std::sqrt(1.0 / (1.0 + tn));
        p.t0 = t0;
        p.pinned = true;
        return p;
    }

    /// beta chosen so that a whole segment succeeds with probability `p`.
    static SegmentParams with_success_probability(int m, double p, double t0 = 0.0) {
        if (!is_power_of_two(m)) {
            throw ContractViolation("m must be a power of two");
        }
        if (!(p > 0.0 && p <= 1.0)) {
            throw ContractViolation("success probability must lie in (0, 1]");
        }
        // alpha^4 + beta^4 = s with alpha^2 = a: a^2 + (1 - a)^2 = s
        const double s = std::pow(p, 1.0 / m);
        if (s < 0.5) {
            throw InfeasibleParams("per-step success below 1/2 is not reachable");
        }
        const double a = (1.0 + std::sqrt(2.0 * s - 1.0)) / 2.0;
        SegmentParams out;
        out.m = m;
        out.alpha = std::sqrt(a);
        out.beta = std::sqrt(1.0 - a);
        out.t0 = t0;
        out.pinned = false;
        return out;
    }

    [[nodiscard]] double theta() const { return std::atan2(beta * beta, alpha * alpha); }
    [[nodiscard]] double step_success() const {
        return std::pow(alpha, 4) + std::pow(beta, 4);
    }
    [[nodiscard]] double segment_success() const { return std::pow(step_success(), m); }
    /// grid points per unit time
    [[nodiscard]] long grid() const { return 4L * m; }

    void validate() const {
        if (!is_power_of_two(m)) {
            throw ContractViolation("m must be a power of two");
        }
        if (std::abs(alpha * alpha + beta * beta - 1.0) > 1e-12 || alpha < 0.0 || beta < 0.0) {
            throw ContractViolation("alpha^2 + beta^2 must equal 1");
        }
        if (pinned &&
            std::abs(beta * beta / (1.0 - beta * beta) - std::tan(1.0 / (8.0 * m))) > 1e-12) {
            throw ContractViolation("beta is not pinned to tan(1/(8m))");
        }
    }
};

/// R = [[alpha, beta], [beta, -alpha]].
inline Matrix r_gate(double alpha, double beta) {
    Matrix r(2, 2);
    r << alpha, beta, beta, -alpha;
    return r;
}

/// P = diag(1, i s).
inline Matrix p_gate(int direction) {
    Matrix p = Matrix::Identity(2, 2);
    p(1, 1) = cplx(0.0, static_cast<double>(direction));
    return p;
}

/// Everything a segment attempt needs besides the target state.
class SegmentContext {
  public:
    SegmentContext(SegmentParams params, const DrivingSpec &driving, OracleString oracle,
                   DriveOptions options = {})
        : params_(params), oracle_(std::move(oracle)),
          drive_(std::make_shared<DriveEngine>(driving, options, params.grid(), params.t0)) {
        params_.validate();
        if (driving.dim != oracle_.size()) {
            throw DimensionError("driving spec and oracle disagree on the target dimension");
        }
    }

    [[nodiscard]] const SegmentParams &params() const { return params_; }
    [[nodiscard]] const OracleString &oracle() const { return oracle_; }
    [[nodiscard]] const DriveEngine &drive() const { return *drive_; }
    [[nodiscard]] std::size_t target_dim() const { return oracle_.size(); }
    [[nodiscard]] int m() const { return params_.m; }

    /// Unnormalized target action of outcome b.
    [[nodiscard]] Matrix kraus(int direction, int b) const {
        const double a = params_.alpha;
        const double c = params_.beta;
        const cplx s(0.0, static_cast<double>(direction));
        if (b == 0) {
            return oracle_.linear_combination(a * a, s * c * c);
        }
        return oracle_.linear_combination(a * c, -s * a * c);
    }

    /// The unitary each outcome is proportional to.
    [[nodiscard]] Matrix step_unitary(int direction, int b) const {
        if (b == 0) {
            return oracle_.phase_rotation(direction * params_.theta());
        }
        return oracle_.phase_rotation(-direction * std::numbers::pi / 4.0);
    }

  private:
    SegmentParams params_;
    OracleString oracle_;
    std::shared_ptr<DriveEngine> drive_;
};

struct SegmentResult {
    std::vector<std::uint8_t> b;
    PureState post_state;
    bool success = false;
    ResourceTally resources;

    [[nodiscard]] std::vector<int> ones() const {
        std::vector<int> out;
        for (std::size_t p = 0; p < b.size(); ++p) {
            if (b[p]) {
                out.push_back(static_cast<int>(p));
            }
        }
        return out;
    }
};

inline RegisterLayout target_layout(std::size_t dim) {
    return RegisterLayout({{"target", dim, RegisterRole::Target}});
}

namespace detail {

inline ResourceTally uncompressed_attempt_tally(const SegmentContext &ctx,
                                                const SegmentProgram &prog) {
    ResourceTally t;
    const std::int64_t m = ctx.m();
    t.queries = m;
    t.correction_queries = static_cast<std::int64_t>(prog.corrections.size());
    // R and P per control, one R before measuring, controlled Q, and a drive window
    t.modeled_gates = 3 * m + m + m * ctx.drive().spec().gate_cost;
    t.note_qubits(m + bits_for(static_cast<std::int64_t>(ctx.target_dim())));
    return t;
}

/// Visits positions in program order; `step(p, window)` gets the window
/// unitary that precedes (forward) or follows (reversed) position p.
template <class Step>
void for_each_position(const SegmentContext &ctx, const SegmentProgram &prog, Step &&step) {
    const int m = ctx.m();
    if (!prog.reversed) {
        for (int p = 0; p < m; ++p) {
            step(p, ctx.drive().window(p, p + 1), true);
        }
    } else {
        for (int p = m - 1; p >= 0; --p) {
            step(p, ctx.drive().reverse_window(p, p + 1), false);
        }
    }
}

inline Matrix correction_at(const SegmentContext &ctx, const SegmentProgram &prog, int p) {
    auto it = prog.corrections.find(p);
    if (it == prog.corrections.end()) {
        return Matrix();
    }
    return ctx.oracle().phase_rotation(it->second);
}

} // namespace detail

/**
 * One segment attempt evaluated step by step. Draws one uniform per
 * position, in program order.
 */
inline SegmentResult run_segment_streamed(const Vector &target, const SegmentContext &ctx,
                                          const SegmentProgram &prog, CounterRng &rng) {
    if (static_cast<std::size_t>(target.size()) != ctx.target_dim()) {
        throw DimensionError("target dimension differs from the oracle length");
    }
    SegmentResult res;
    res.b.assign(static_cast<std::size_t>(ctx.m()), 0);
    Vector psi = target;
    const Matrix k0 = ctx.kraus(prog.direction, 0);
    const Matrix u0 = ctx.step_unitary(prog.direction, 0);
    const Matrix u1 = ctx.step_unitary(prog.direction, 1);
    detail::for_each_position(ctx, prog, [&](int p, const Matrix &window, bool before) {
        if (before) {
            psi = window * psi;
        }
        const double n2 = psi.squaredNorm();
        const double p0 = (k0 * psi).squaredNorm() / n2;
        const int b = rng.uniform() < p0 ? 0 : 1;
        res.b[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>(b);
        psi = (b == 0 ? u0 : u1) * psi;
        const Matrix c = detail::correction_at(ctx, prog, p);
        if (c.size() != 0) {
            psi = c * psi;
        }
        if (!before) {
            psi = window * psi;
        }
    });
    res.success = std::none_of(res.b.begin(), res.b.end(), [](auto v) { return v != 0; });
    res.post_state = PureState(target_layout(ctx.target_dim()), psi / psi.norm());
    res.resources = detail::uncompressed_attempt_tally(ctx, prog);
    return res;
}

/// Unnormalized target for outcome string `b` (streamed evaluation).
inline Vector segment_branch_target(const Vector &target, const SegmentContext &ctx,
                                    const SegmentProgram &prog,
                                    const std::vector<std::uint8_t> &b) {
    if (b.size() != static_cast<std::size_t>(ctx.m())) {
        throw DimensionError("outcome string length differs from m");
    }
    Vector psi = target;
    const Matrix k[2] = {ctx.kraus(prog.direction, 0), ctx.kraus(prog.direction, 1)};
    detail::for_each_position(ctx, prog, [&](int p, const Matrix &window, bool before) {
        if (before) {
            psi = window * psi;
        }
        psi = k[b[static_cast<std::size_t>(p)]] * psi;
        const Matrix c = detail::correction_at(ctx, prog, p);
        if (c.size() != 0) {
            psi = c * psi;
        }
        if (!before) {
            psi = window * psi;
        }
    });
    return psi;
}

inline std::string control_name(int p) { return "c" + std::to_string(p); }

/**
 * The literal circuit: m control qubits (c0 first, most significant) and
 * the target, after R, P, the interleaved drives and controlled queries,
 * and the final R on every control.
 */
inline PureState dense_segment_state(const Vector &target, const SegmentContext &ctx,
                                     const SegmentProgram &prog) {
    const int m = ctx.m();
    std::vector<Register> regs;
    for (int p = 0; p < m; ++p) {
        regs.push_back({control_name(p), 2, RegisterRole::ControlUncompressed});
    }
    regs.push_back({"target", ctx.target_dim(), RegisterRole::Target});
    RegisterLayout layout(regs);
    if (layout.total_dim() > kDenseDimensionCap) {
        throw InfeasibleParams("dense segment exceeds the 2^22 dimension cap");
    }
    std::vector<std::size_t> zeros(static_cast<std::size_t>(m), 0);
    PureState controls = init_basis(RegisterLayout(std::vector<Register>(regs.begin(), regs.end() - 1)), zeros);
    PureState state = tensor(controls, PureState(target_layout(ctx.target_dim()), target));
    const Matrix r = r_gate(ctx.params().alpha, ctx.params().beta);
    const Matrix pg = p_gate(prog.direction);
    for (int p = 0; p < m; ++p) {
        state = apply_unitary(state, UnitarySpec({control_name(p)}, pg * r));
    }
    const auto l = static_cast<Eigen::Index>(ctx.target_dim());
    Matrix cq = Matrix::Identity(2 * l, 2 * l);
    cq.bottomRightCorner(l, l) = ctx.oracle().linear_combination(0.0, 1.0);
    detail::for_each_position(ctx, prog, [&](int p, const Matrix &window, bool before) {
        if (before) {
            state = apply_unitary(state, UnitarySpec({"target"}, window));
        }
        state = apply_unitary(state, UnitarySpec({control_name(p), "target"}, cq));
        const Matrix c = detail::correction_at(ctx, prog, p);
        if (c.size() != 0) {
            state = apply_unitary(state, UnitarySpec({"target"}, c));
        }
        if (!before) {
            state = apply_unitary(state, UnitarySpec({"target"}, window));
        }
    });
    for (int p = 0; p < m; ++p) {
        state = apply_unitary(state, UnitarySpec({control_name(p)}, r));
    }
    return state;
}

/// One attempt through the literal circuit; measures c0, c1, ... in order.
inline SegmentResult run_segment_dense(const Vector &target, const SegmentContext &ctx,
                                       const SegmentProgram &prog, CounterRng &rng) {
    PureState state = dense_segment_state(target, ctx, prog);
    SegmentResult res;
    res.b.assign(static_cast<std::size_t>(ctx.m()), 0);
    for (int p = 0; p < ctx.m(); ++p) {
        auto out = measure(state, computational_projectors(state.layout(), control_name(p)), rng);
        res.b[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>(out.outcome);
        state = out.collapsed;
    }
    const auto l = static_cast<Eigen::Index>(ctx.target_dim());
    std::size_t index = 0;
    for (auto v : res.b) {
        index = index * 2 + v;
    }
    Vector psi = state.amps().segment(static_cast<Eigen::Index>(index) * l, l);
    res.success = std::none_of(res.b.begin(), res.b.end(), [](auto v) { return v != 0; });
    res.post_state = PureState(target_layout(ctx.target_dim()), psi / psi.norm());
    res.resources = detail::uncompressed_attempt_tally(ctx, prog);
    return res;
}

/// Every outcome string with its unnormalized target, from the dense
/// circuit. Index bit (m - 1 - p) of the outcome number is b_p.
inline std::vector<Vector> dense_segment_branches(const Vector &target, const SegmentContext &ctx,
                                                  const SegmentProgram &prog) {
    const PureState state = dense_segment_state(target, ctx, prog);
    const auto l = static_cast<Eigen::Index>(ctx.target_dim());
    const std::size_t n = std::size_t{1} << ctx.m();
    std::vector<Vector> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = state.amps().segment(static_cast<Eigen::Index>(i) * l, l);
    }
    return out;
}

enum class SegmentMode { Streamed, Dense };

/// run_segment_uncompressed with the forward program.
inline SegmentResult run_segment_uncompressed(const PureState &target, const SegmentParams &params,
                                              const DrivingSpec &driving,
                                              const OracleString &oracle, std::uint64_t rng_seed,
                                              SegmentMode mode = SegmentMode::Streamed) {
    SegmentContext ctx(params, driving, oracle);
    CounterRng rng(rng_seed);
    if (target.layout().size() != 1) {
        throw DimensionError("segment target must be a single register");
    }
    return mode == SegmentMode::Dense ? run_segment_dense(target.amps(), ctx, {}, rng)
                                      : run_segment_streamed(target.amps(), ctx, {}, rng);
}

/// Outcome of a recursive measurement.
struct MeasurementTrace {
    /// 0-based positions of located ones, in the order found
    std::vector<int> ones;
    std::vector<std::uint8_t> d_sequence;
    int steps = 0;
    bool truncated = false;
    bool flag_dirty = false;

    /// K <= 1 + 2 |S| log2 m
    [[nodiscard]] bool within_step_bound(int m) const {
        const double bound = 1.0 + 2.0 * static_cast<double>(ones.size()) * std::log2(m);
        return steps <= bound + 1e-9;
    }
};

namespace detail {

inline Vector product_vector(double alpha, double beta, int n) {
    Vector r(1);
    r(0) = 1.0;
    Vector q(2);
    q << alpha, beta;
    for (int i = 0; i < n; ++i) {
        Vector next(r.size() * 2);
        for (Eigen::Index j = 0; j < r.size(); ++j) {
            next(2 * j) = r(j) * q(0);
            next(2 * j + 1) = r(j) * q(1);
        }
        r = std::move(next);
    }
    return r;
}

struct UncompressedRecursion {
    double alpha;
    double beta;
    int kprime;
    const std::vector<std::string> &block;

    // sampled
    void run(PureState &state, int lo, int n, MeasurementTrace &trace, CounterRng &rng) const {
        if (trace.truncated) {
            return;
        }
        std::vector<std::string> regs(block.begin() + lo, block.begin() + lo + n);
        const Vector r = product_vector(alpha, beta, n);
        const PureState v = contract(state, regs, r);
        const double n2 = state.norm_tag() * state.norm_tag();
        const double p0 = v.norm_tag() * v.norm_tag() / n2;
        const int d = rng.uniform() < p0 ? 0 : 1;
        trace.d_sequence.push_back(static_cast<std::uint8_t>(d));
        ++trace.steps;
        const PureState proj = insert_product(state.layout(), regs, r, v);
        if (d == 0) {
            state = proj;
            return;
        }
        state = PureState(state.layout(), state.amps() - proj.amps());
        if (n == 1) {
            trace.ones.push_back(lo);
            if (static_cast<int>(trace.ones.size()) >= kprime) {
                trace.truncated = true;
            }
            return;
        }
        run(state, lo, n / 2, trace, rng);
        run(state, lo + n / 2, n / 2, trace, rng);
    }
};

} // namespace detail

/**
 * Recursive two-outcome measurement of `block` (qubit registers, a power of
 * two of them) against (alpha|0> + beta|1>)^{⊗n} and its complement, left
 * half before right half. Stops once `kprime` ones are located. Returns the
 * trace and the collapsed joint state (not renormalized).
 */
inline std::pair<MeasurementTrace, PureState>
recursive_measure_uncompressed(const PureState &joint, const std::vector<std::string> &block,
                               double alpha, double beta, CounterRng &rng,
                               int kprime = INT_MAX) {
    if (!is_power_of_two(static_cast<long>(block.size()))) {
        throw ContractViolation("recursive measurement needs a power-of-two block");
    }
    for (const auto &name : block) {
        if (joint.layout().dim(name) != 2) {
            throw DimensionError("recursive measurement block must be qubits");
        }
    }
    MeasurementTrace trace;
    PureState state = joint;
    detail::UncompressedRecursion rec{alpha, beta, kprime, block};
    rec.run(state, 0, static_cast<int>(block.size()), trace, rng);
    return {trace, state};
}

/// One leaf of the exhaustive recursive measurement.
struct UncompressedLeaf {
    MeasurementTrace trace;
    PureState state;
};

/// Relative squared norm below which an exhaustive branch is dropped as
/// rounding noise.
inline constexpr double kBranchPruneTolerance = 1e-20;

/// All leaves of the recursive measurement with exact branch arithmetic.
inline std::vector<UncompressedLeaf>
recursive_measure_uncompressed_exhaustive(const PureState &joint,
                                          const std::vector<std::string> &block, double alpha,
                                          double beta, int kprime = INT_MAX) {
    if (!is_power_of_two(static_cast<long>(block.size()))) {
        throw ContractViolation("recursive measurement needs a power-of-two block");
    }
    std::vector<UncompressedLeaf> leaves;
    const double floor = kBranchPruneTolerance * joint.norm_tag() * joint.norm_tag();
    // pending ranges (lo, n) still to measure, processed front first
    std::function<void(PureState, MeasurementTrace, std::vector<std::pair<int, int>>)> go =
        [&](PureState state, MeasurementTrace trace, std::vector<std::pair<int, int>> pending) {
            if (state.norm_tag() * state.norm_tag() <= floor) {
                return;
            }
            if (pending.empty() || trace.truncated) {
                leaves.push_back({trace, state});
                return;
            }
            const auto [lo, n] = pending.front();
            pending.erase(pending.begin());
            std::vector<std::string> regs(block.begin() + lo, block.begin() + lo + n);
            const Vector r = detail::product_vector(alpha, beta, n);
            const PureState proj =
                insert_product(state.layout(), regs, r, contract(state, regs, r));
            {
                MeasurementTrace t0 = trace;
                t0.d_sequence.push_back(0);
                ++t0.steps;
                go(proj, t0, pending);
            }
            MeasurementTrace t1 = trace;
            t1.d_sequence.push_back(1);
            ++t1.steps;
            PureState rest(state.layout(), state.amps() - proj.amps());
            if (n == 1) {
                t1.ones.push_back(lo);
                if (static_cast<int>(t1.ones.size()) >= kprime) {
                    t1.truncated = true;
                }
                go(rest, t1, pending);
                return;
            }
            pending.insert(pending.begin(), {{lo, n / 2}, {lo + n / 2, n / 2}});
            go(rest, t1, pending);
        };
    go(joint, MeasurementTrace{}, {{0, static_cast<int>(block.size())}});
    return leaves;
}

struct WalkResult {
    PureState state;
    int attempts = 0;
    bool success = false;
    ResourceTally resources;
};

/**
 * Repairs a failed forward attempt that reported ones at `error_positions`
 * by undoing and redoing (streamed attempts). `attempts` excludes the failed
 * attempt that started the walk.
 */
inline WalkResult correction_walk(const PureState &target, const SegmentContext &ctx,
                                  const std::vector<int> &error_positions, CounterRng &rng,
                                  int max_attempts = 64) {
    WalkResult res;
    Vector psi = target.amps();
    auto attempt = [&](const SegmentProgram &prog) {
        SegmentResult r = run_segment_streamed(psi, ctx, prog, rng);
        psi = r.post_state.amps();
        res.resources += r.resources;
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

inline WalkResult correction_walk(const PureState &target, const SegmentParams &params,
                                  const DrivingSpec &driving, const OracleString &oracle,
                                  const std::vector<int> &error_positions, std::uint64_t rng_seed,
                                  int max_attempts = 64) {
    SegmentContext ctx(params, driving, oracle);
    CounterRng rng(rng_seed);
    return correction_walk(target, ctx, error_positions, rng, max_attempts);
}

/// Smallest power of two m with m >= ||H|| T / eps_tot (at least 1).
inline int choose_m(double norm_h, double total_time, double eps_tot) {
    if (!(eps_tot > 0.0) || total_time < 0.0 || norm_h < 0.0) {
        throw ContractViolation("choose_m needs positive eps_tot and nonnegative H, T");
    }
    const double raw = std::ceil(norm_h * total_time / eps_tot - 1e-12);
    return static_cast<int>(next_power_of_two(std::max<long>(1, static_cast<long>(raw))));
}

struct FullRunOptions {
    /// 0 picks m from ||H|| T / eps_tot
    int m = 0;
    int max_attempts = 64;
    SegmentMode mode = SegmentMode::Streamed;
    DriveOptions drive;
};

struct FullRunResult {
    PureState state;
    ResourceTally resources;
    /// every segment reached net progress within its attempt budget
    bool completed = true;
    int m = 0;
};

/// Number of segments 4T; 4T must be an integer.
inline int segment_count(double total_time) {
    const double four_t = 4.0 * total_time;
    const double rounded = std::round(four_t);
    if (std::abs(four_t - rounded) > 1e-9 || rounded < 0) {
        throw ContractViolation("total time must be a multiple of 1/4");
    }
    return static_cast<int>(rounded);
}

/// Chains 4T uncompressed segments, repairing failures with the walk.
inline FullRunResult run_full_uncompressed(const PureState &initial, const DrivingSpec &driving,
                                           const OracleString &oracle, double total_time,
                                           double eps_tot, std::uint64_t rng_seed,
                                           const FullRunOptions &options = {}) {
    const int segments = segment_count(total_time);
    const int m = options.m > 0 ? options.m : choose_m(driving.norm_bound, total_time, eps_tot);
    FullRunResult out;
    out.m = m;
    CounterRng rng(rng_seed);
    Vector psi = initial.amps();
    for (int s = 0; s < segments; ++s) {
        SegmentContext ctx(SegmentParams::pinned_for(m, s * SegmentParams::segment_length),
                           driving, oracle, options.drive);
        SegmentResult first = options.mode == SegmentMode::Dense
                                  ? run_segment_dense(psi, ctx, {}, rng)
                                  : run_segment_streamed(psi, ctx, {}, rng);
        out.resources += first.resources;
        out.resources.segments += 1;
        psi = first.post_state.amps();
        if (!first.success) {
            WalkResult w = correction_walk(PureState(initial.layout(), psi), ctx, first.ones(), rng,
                                           options.max_attempts);
            out.resources += w.resources;
            psi = w.state.amps();
            out.completed = out.completed && w.success;
        }
    }
    out.state = PureState(initial.layout(), psi);
    return out;
}

} // namespace fqsim
