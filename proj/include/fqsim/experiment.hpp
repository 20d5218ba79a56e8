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
 * Named experiments, JSON configuration, deterministic CSV output.
 *
 * Every experiment writes long-format rows `kind,point,trial,metric,value`
 * (kind is `trial` or `summary`) under `#` metadata lines, and declares
 * assertions whose outcome decides the exit status.
 */

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "fqsim/cleanup.hpp"
#include "fqsim/compressed.hpp"
#include "fqsim/driving_config.hpp"
#include "fqsim/encoding.hpp"
#include "fqsim/preparation.hpp"
#include "fqsim/uncompressed.hpp"

namespace fqsim {

inline constexpr int kCsvSchemaVersion = 1;

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Least squares of log y on log x.
inline SlopeFit fit_slope(const std::vector<double> &xs, const std::vector<double> &ys) {
    if (xs.size() != ys.size() || xs.size() < 3) {
        throw ContractViolation("fit_slope needs at least 3 paired points");
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) {
            throw ContractViolation("fit_slope needs positive values");
        }
        if (i > 0 && !(xs[i] > xs[i - 1])) {
            throw ContractViolation("fit_slope needs strictly increasing xs");
        }
    }
    const auto n = static_cast<double>(xs.size());
    double sx = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += std::log(xs[i]);
        sy += std::log(ys[i]);
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = std::log(xs[i]) - mx;
        const double dy = std::log(ys[i]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct CsvRow {
    std::string kind;
    std::string point;
    long trial = -1;
    std::string metric;
    double value = 0.0;
};

struct AssertionResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ExperimentResult {
    std::vector<CsvRow> rows;
    std::vector<AssertionResult> assertions;
    std::vector<std::string> notes;

    void trial(const std::string &point, long t, const std::string &metric, double v) {
        rows.push_back({"trial", point, t, metric, v});
    }
    void summary(const std::string &point, const std::string &metric, double v) {
        rows.push_back({"summary", point, -1, metric, v});
    }
    /// Records `value <= bound` (or >= when `at_least`).
    void check(const std::string &name, double value, double bound, bool at_least = false) {
        const bool ok = at_least ? value >= bound : value <= bound;
        assertions.push_back({name, ok && std::isfinite(value),
                              "value=" + format_number(value) + (at_least ? " >= " : " <= ") +
                                  format_number(bound)});
    }
    void check_range(const std::string &name, double value, double lo, double hi) {
        assertions.push_back({name, value >= lo && value <= hi,
                              "value=" + format_number(value) + " in [" + format_number(lo) +
                                  ", " + format_number(hi) + "]"});
    }
    void check_true(const std::string &name, bool ok, const std::string &detail) {
        assertions.push_back({name, ok, detail});
    }
    [[nodiscard]] bool passed() const {
        return std::all_of(assertions.begin(), assertions.end(),
                           [](const AssertionResult &a) { return a.passed; });
    }
};

struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    int trials = 0; // 0: the experiment's default
    std::string output;
    int threads = 0; // 0: hardware concurrency
    nlohmann::json params = nlohmann::json::object();
    std::optional<nlohmann::json> driving;
    std::string oracle = "0110";
};

/// A config with defaults filled in and the driving spec built.
struct ResolvedConfig {
    ExperimentConfig raw;
    nlohmann::json params;
    int trials = 1;
    int threads = 1;
    OracleString oracle;
    DrivingSpec driving;
    std::string driving_label;

    [[nodiscard]] double num(const std::string &key) const { return params.at(key).get<double>(); }
    [[nodiscard]] int integer(const std::string &key) const { return params.at(key).get<int>(); }
    [[nodiscard]] long long_int(const std::string &key) const { return params.at(key).get<long>(); }
    [[nodiscard]] std::vector<double> list(const std::string &key) const {
        return params.at(key).get<std::vector<double>>();
    }
    [[nodiscard]] std::vector<int> int_list(const std::string &key) const {
        return params.at(key).get<std::vector<int>>();
    }
};

/// Runs body(i) for i in [0, n) on `threads` workers; results must be
/// written to per-index slots so the fold order does not depend on timing.
inline void parallel_for(int n, int threads, const std::function<void(int)> &body) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = next++; i < n; i = next++) {
                    body(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
                next = n;
            }
        });
    }
    for (auto &t : pool) {
        t.join();
    }
    for (auto &e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

struct MeanStat {
    double mean = 0.0;
    double sd = 0.0;
    /// standard error of the mean
    double se = 0.0;
};

inline MeanStat mean_stat(const std::vector<double> &v) {
    MeanStat s;
    if (v.empty()) {
        return s;
    }
    const auto n = static_cast<double>(v.size());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) {
        ss += (x - s.mean) * (x - s.mean);
    }
    s.sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.se = s.sd / std::sqrt(n);
    return s;
}

inline std::string point_name(const std::string &key, double v) {
    return key + "=" + format_number(v);
}

namespace experiments {

inline double phase_free_fidelity(const Vector &a, const Vector &b) {
    return std::norm(a.dot(b)) / (a.squaredNorm() * b.squaredNorm());
}

inline Vector seeded_state(Eigen::Index dim, std::uint64_t seed) {
    CounterRng rng(seed);
    return random_state(dim, rng);
}

// ---- encoding-roundtrip ----
inline ExperimentResult encoding_roundtrip(const ResolvedConfig &c) {
    ExperimentResult r;
    long failures = 0;
    for (int m : c.int_list("m_values")) {
        for (int k = 0; k <= c.integer("k_max"); ++k) {
            long fails = 0;
            std::set<Slots> seen;
            const auto xs = strings_up_to_weight(m, std::min(k, m));
            for (const auto &x : xs) {
                const Slots s = encode_c(x, k);
                if (decode_c(s, m) != x || !seen.insert(s).second) {
                    ++fails;
                }
            }
            const std::string pt = "m=" + std::to_string(m) + ";k=" + std::to_string(k);
            r.summary(pt, "strings", static_cast<double>(xs.size()));
            r.summary(pt, "failures", static_cast<double>(fails));
            failures += fails;
        }
    }
    r.check("roundtrip_failures", static_cast<double>(failures), 0.0);
    return r;
}

// ---- b-encoding ----
inline ExperimentResult b_encoding(const ResolvedConfig &c) {
    ExperimentResult r;
    const int m = c.integer("m");
    const int k = c.integer("k");
    const long q = c.long_int("q");
    const SegmentParams sp = SegmentParams::pinned_for(m);
    const double a = sp.alpha;
    const double b = sp.beta;
    const long d = q + 1;
    double total_d = std::pow(static_cast<double>(d), k + 1);
    const auto xs = strings_up_to_weight(m, k);
    if (total_d * static_cast<double>(xs.size()) > 5e7) {
        throw InfeasibleParams("dense B-encoding check exceeds the desk cap");
    }
    const auto total = static_cast<long>(total_d);
    auto flat = [&](const Slots &s) {
        long i = 0;
        for (int v : s) {
            i = i * d + v;
        }
        return i;
    };
    const Vector phi = phi_closed_form(q, a, b, d);
    Eigen::VectorXd power(total);
    for (long i = 0; i < total; ++i) {
        long rem = i;
        double amp = 1.0;
        for (int j = 0; j <= k; ++j) {
            amp *= phi(rem % d).real();
            rem /= d;
        }
        power(i) = amp;
    }
    Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(total, static_cast<Eigen::Index>(xs.size()));
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (const auto &[s, amp] : encode_b(xs[i], k, q, a, b)) {
            cols(flat(s), static_cast<Eigen::Index>(i)) = amp;
        }
        const int w = weight(xs[i]);
        const double expect = std::pow(a, m - w) * std::pow(b, w);
        worst = std::max(worst, std::abs(cols.col(static_cast<Eigen::Index>(i)).dot(power) - expect));
    }
    const Eigen::MatrixXd gram = cols.transpose() * cols;
    const double gram_defect =
        (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    r.summary("all", "strings", static_cast<double>(xs.size()));
    r.summary("all", "max_inner_product_error", worst);
    r.summary("all", "gram_defect", gram_defect);
    r.check("inner_products", worst, 1e-12);
    r.check("gram_identity", gram_defect, 1e-10);
    return r;
}

// ---- overlap ----
inline ExperimentResult overlap(const ResolvedConfig &c) {
    ExperimentResult r;
    double worst = 0.0;
    int points = 0;
    for (double qd : c.list("q_values")) {
        const auto q = static_cast<long>(qd);
        for (double b2 : c.list("beta_sq_values")) {
            const double b = std::sqrt(b2);
            const double a = std::sqrt(1.0 - b2);
            const Vector pq = phi_closed_form(q, a, b, q + 1);
            for (long t : {0L, 1L, 2L, 3L, q / 4, q / 2, q}) {
                const Vector pt = phi_closed_form(q - t, a, b, q + 1);
                const double err = std::abs(overlap_phi(q, t, a, b) - pt.dot(pq).real());
                worst = std::max(worst, err);
                ++points;
            }
        }
    }
    r.summary("grid", "points", points);
    r.summary("grid", "max_error", worst);
    r.check("grid_points", points, 50.0, true);
    r.check("overlap_matches_inner_product", worst, 1e-12);
    double worst_margin = 1.0;
    for (int m : c.int_list("m_values")) {
        const SegmentParams sp = SegmentParams::pinned_for(m);
        for (double eps : c.list("eps_values")) {
            const long q = q_bound(m, sp.beta, eps);
            double lowest = 1.0;
            for (long t = 0; t <= m; ++t) {
                lowest = std::min(lowest, overlap_phi(q, t, sp.alpha, sp.beta));
            }
            const std::string pt = "m=" + std::to_string(m) + ";eps=" + format_number(eps);
            r.summary(pt, "q", static_cast<double>(q));
            r.summary(pt, "min_overlap", lowest);
            worst_margin = std::min(worst_margin, lowest - (1.0 - eps));
        }
    }
    r.check("bound_gives_one_minus_eps", worst_margin, 0.0, true);
    return r;
}

// ---- cleanup ----
inline ExperimentResult cleanup(const ResolvedConfig &c) {
    ExperimentResult r;
    const int m = c.integer("m");
    const int k = c.integer("k");
    const SegmentParams sp = SegmentParams::pinned_for(m);
    for (double eps : c.list("eps_values")) {
        const long q = q_bound(m, sp.beta, eps);
        const auto u = prepare_controls(m, k, q, sp.alpha, sp.beta);
        const double dist = slot_distance(u.clean, ideal_succinct_state(m, k, sp.alpha, sp.beta));
        const std::string pt = point_name("eps", eps);
        r.summary(pt, "q", static_cast<double>(q));
        r.summary(pt, "distance", dist);
        r.summary(pt, "flag_weight", u.dirty_weight());
        r.check("distance_" + pt, dist, 10.0 * eps);
    }
    // literal circuit against the closed form at a size the sparse route can hold
    const int n = c.integer("literal_m");
    const int kl = c.integer("literal_k");
    const long ql = c.long_int("literal_q");
    const SegmentParams sl = SegmentParams::pinned_for(n);
    const SparseState lit = prepare_literal(n, kl, ql, sl.alpha, sl.beta);
    const auto ul = prepare_controls(n, kl, ql, sl.alpha, sl.beta);
    const double lit_gap = slot_distance(clean_component(lit, CleanupLayout{n, kl, ql}), ul.clean);
    r.summary("literal", "gap", lit_gap);
    r.check("literal_matches_closed_form", lit_gap, 1e-12);
    return r;
}

// ---- equivalence ----
inline double r_product(std::uint32_t b, std::uint32_t x, int m, double alpha, double beta) {
    double v = 1.0;
    for (int p = 0; p < m; ++p) {
        const bool bb = ((b >> p) & 1U) != 0;
        const bool xb = ((x >> p) & 1U) != 0;
        v *= bb == xb ? (bb ? -alpha : alpha) : beta;
    }
    return v;
}

inline BitString bits_of(std::uint32_t mask, int m) {
    BitString x(static_cast<std::size_t>(m), 0);
    for (int p = 0; p < m; ++p) {
        x[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>((mask >> (m - 1 - p)) & 1U);
    }
    return x;
}

inline ExperimentResult equivalence(const ResolvedConfig &c) {
    const int m = c.integer("m");
    if (m > 12) {
        throw InfeasibleParams("equivalence enumerates 2^m outcomes; m <= 12");
    }
    CompressionParams p = CompressionParams::pinned(m, c.integer("k"), m, c.long_int("q"));
    p.validate();
    const ControlBank bank(p);
    const auto dim = static_cast<Eigen::Index>(c.integer("target_dim"));
    const std::uint32_t outcomes = 1U << m;
    std::vector<double> gaps(static_cast<std::size_t>(c.trials));
    std::vector<double> dists(gaps.size());
    std::vector<double> drop(gaps.size());
    parallel_for(c.trials, c.threads, [&](int t) {
        CounterRng rng(CounterRng::derive(c.raw.seed, static_cast<std::uint64_t>(t)));
        std::vector<Vector> w(outcomes);
        double norm2 = 0.0;
        for (auto &v : w) {
            v = random_gaussian_matrix(dim, 1, rng).col(0);
            norm2 += v.squaredNorm();
        }
        Branch start;
        start.pending.push_back({0, m});
        for (std::uint32_t x = 0; x < outcomes; ++x) {
            w[x] /= std::sqrt(norm2);
            const BitString bits = bits_of(x, m);
            if (weight(bits) <= p.k) {
                start.amps.emplace(to_key(encode_c(bits, p.k)), w[x]);
            }
        }
        const auto e = measure_compressed_exhaustive(start, bank, p);
        const OutcomeEnsemble got = ensemble_of(e.leaves, m, m);
        double gap = 0.0;
        double dist = 0.0;
        for (std::uint32_t b = 0; b < outcomes; ++b) {
            Vector tv = Vector::Zero(dim);
            for (std::uint32_t x = 0; x < outcomes; ++x) {
                // bit p of the mask is position m - 1 - p; the product is symmetric
                tv += r_product(b, x, m, p.alpha, p.beta) * w[x];
            }
            std::vector<int> ones;
            const BitString bb = bits_of(b, m);
            for (int i = 0; i < m; ++i) {
                if (bb[static_cast<std::size_t>(i)]) {
                    ones.push_back(i);
                }
            }
            const std::string label = outcome_label(ones, m, m);
            const double pu = tv.squaredNorm();
            const double pc = got.probability(label);
            gap = std::max(gap, std::abs(pu - pc));
            if (pu > 1e-6 && pc > 0.0) {
                const Matrix rho_u = tv * tv.adjoint() / pu;
                dist = std::max(dist, trace_distance(rho_u, got.weighted.at(label) / pc));
            }
        }
        gaps[static_cast<std::size_t>(t)] = gap;
        dists[static_cast<std::size_t>(t)] = dist;
        drop[static_cast<std::size_t>(t)] = e.discarded;
    });
    ExperimentResult r;
    double gmax = 0.0;
    double dmax = 0.0;
    for (int t = 0; t < c.trials; ++t) {
        const auto i = static_cast<std::size_t>(t);
        r.trial("all", t, "max_probability_gap", gaps[i]);
        r.trial("all", t, "max_trace_distance", dists[i]);
        r.trial("all", t, "discarded_weight", drop[i]);
        gmax = std::max(gmax, gaps[i]);
        dmax = std::max(dmax, dists[i]);
    }
    r.summary("all", "max_probability_gap", gmax);
    r.summary("all", "max_trace_distance", dmax);
    r.check("states", c.trials, 20.0, true);
    r.check("probability_gap", gmax, 1e-9);
    r.check("trace_distance", dmax, 1e-9);
    return r;
}

// ---- segment-stats ----
inline ExperimentResult segment_stats(const ResolvedConfig &c) {
    ExperimentResult r;
    const auto dim = c.oracle.size();
    const Vector target = seeded_state(static_cast<Eigen::Index>(dim), CounterRng::derive(c.raw.seed, 0x7a));
    struct Trial {
        bool success = false;
        double ones = 0.0;
        double queries = 0.0;
    };
    auto report = [&](const std::string &mode, int m, const std::vector<Trial> &trials, double beta) {
        std::vector<double> succ;
        std::vector<double> ones;
        for (std::size_t i = 0; i < trials.size(); ++i) {
            succ.push_back(trials[i].success ? 1.0 : 0.0);
            ones.push_back(trials[i].ones);
            r.trial(mode, static_cast<long>(i), "success", succ.back());
            r.trial(mode, static_cast<long>(i), "located_ones", ones.back());
            r.trial(mode, static_cast<long>(i), "queries", trials[i].queries);
        }
        const MeanStat s = mean_stat(succ);
        const MeanStat o = mean_stat(ones);
        const double ones_bound = 4.0 * beta * beta * m;
        r.summary(mode, "m", m);
        r.summary(mode, "success_rate", s.mean);
        r.summary(mode, "success_se", s.se);
        r.summary(mode, "mean_located_ones", o.mean);
        r.summary(mode, "located_ones_se", o.se);
        r.summary(mode, "located_ones_bound", ones_bound);
        r.check(mode + "_success_rate", s.mean, 0.75 - 3.0 * s.se, true);
        r.check(mode + "_mean_located_ones", o.mean, ones_bound + 3.0 * o.se);
    };
    {
        const int m = c.integer("m_uncompressed");
        SegmentContext ctx(SegmentParams::pinned_for(m), c.driving, c.oracle);
        std::vector<Trial> trials(static_cast<std::size_t>(c.trials));
        parallel_for(c.trials, c.threads, [&](int t) {
            CounterRng rng(CounterRng::derive(c.raw.seed, 2ULL * static_cast<std::uint64_t>(t)));
            const SegmentResult s = run_segment_streamed(target, ctx, {}, rng);
            trials[static_cast<std::size_t>(t)] = {s.success, static_cast<double>(s.ones().size()),
                                                   static_cast<double>(s.resources.queries)};
        });
        report("uncompressed", m, trials, ctx.params().beta);
    }
    {
        const int m = c.integer("m_compressed");
        const SegmentParams sp = SegmentParams::pinned_for(m);
        const long q = c.long_int("q") > 0 ? c.long_int("q") : q_bound(m, sp.beta, c.num("eps"));
        const auto p = CompressionParams::pinned(m, c.integer("k"), c.integer("kprime"), q);
        CompressedContext ctx(p, c.driving, c.oracle, nullptr);
        std::vector<Trial> trials(static_cast<std::size_t>(c.trials));
        std::vector<int> issued(trials.size());
        parallel_for(c.trials, c.threads, [&](int t) {
            CounterRng rng(CounterRng::derive(c.raw.seed, 2ULL * static_cast<std::uint64_t>(t) + 1));
            const CompressedSegmentResult s = run_segment_compressed(target, ctx, {}, rng);
            trials[static_cast<std::size_t>(t)] = {s.success, static_cast<double>(s.trace.ones.size()),
                                                   static_cast<double>(s.resources.queries)};
            issued[static_cast<std::size_t>(t)] = s.issued_queries;
        });
        r.summary("compressed", "q", static_cast<double>(q));
        report("compressed", m, trials, p.beta);
        const int most = trials.empty() ? 0 : *std::max_element(issued.begin(), issued.end());
        r.check("compressed_query_cap", most, p.kprime);
    }
    return r;
}

// ---- error-scaling ----
inline ExperimentResult error_scaling(const ResolvedConfig &c) {
    ExperimentResult r;
    const int m = c.integer("m");
    const auto p = CompressionParams::pinned(m, c.integer("k"), c.integer("kprime"), c.long_int("q"));
    p.validate();
    const double constant = c.num("c");
    const bool inject_prep = c.params.at("inject_preparation").get<bool>();
    const bool inject_drive = c.params.at("inject_drive").get<bool>();
    const auto eps_values = c.list("eps_values");
    const auto dim = static_cast<Eigen::Index>(c.oracle.size());
    SegmentContext uctx(p.segment(0.0), c.driving, c.oracle);
    std::vector<Vector> targets;
    std::vector<OutcomeEnsemble> reference;
    for (int t = 0; t < c.trials; ++t) {
        targets.push_back(seeded_state(dim, CounterRng::derive(c.raw.seed, static_cast<std::uint64_t>(t))));
        reference.push_back(uncompressed_segment_ensemble(targets.back(), uctx, {}, p.kprime));
    }
    std::vector<ErrorMetrics> metrics(eps_values.size() * targets.size());
    parallel_for(static_cast<int>(metrics.size()), c.threads, [&](int idx) {
        const std::size_t e = static_cast<std::size_t>(idx) / targets.size();
        const std::size_t t = static_cast<std::size_t>(idx) % targets.size();
        const double eps = eps_values[e];
        auto bank = std::make_shared<const ControlBank>(p, inject_prep ? eps : 0.0, c.raw.seed);
        DriveOptions opts;
        opts.injected_error = inject_drive ? eps : 0.0;
        opts.seed = c.raw.seed;
        CompressedContext cctx(p, c.driving, c.oracle, bank, opts);
        metrics[static_cast<std::size_t>(idx)] =
            compute_error_metrics(reference[t], compressed_segment_ensemble(targets[t], cctx));
    });
    std::vector<double> d_av;
    bool ordered = true;
    for (std::size_t e = 0; e < eps_values.size(); ++e) {
        const std::string pt = point_name("eps", eps_values[e]);
        double sum = 0.0;
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const ErrorMetrics &mt = metrics[e * targets.size() + t];
            r.trial(pt, static_cast<long>(t), "d_av", mt.d_av);
            r.trial(pt, static_cast<long>(t), "delta_p", mt.delta_p);
            r.trial(pt, static_cast<long>(t), "d_bar", mt.d_bar);
            ordered = ordered && mt.delta_p <= mt.d_av + 1e-10 && mt.d_bar <= mt.d_av + 1e-10;
            sum += mt.d_av;
        }
        d_av.push_back(sum / static_cast<double>(targets.size()));
        r.summary(pt, "mean_d_av", d_av.back());
        r.summary(pt, "d_av_over_eps", d_av.back() / eps_values[e]);
    }
    {
        // eps = 0: truncation and finite-q floor, not part of the fit
        CompressedContext base(p, c.driving, c.oracle, nullptr);
        double sum = 0.0;
        for (std::size_t t = 0; t < targets.size(); ++t) {
            sum += compute_error_metrics(reference[t], compressed_segment_ensemble(targets[t], base)).d_av;
        }
        r.summary("eps=0", "mean_d_av", sum / static_cast<double>(targets.size()));
    }
    r.check_true("metric_ordering", ordered, "delta_p <= d_av and d_bar <= d_av on every pair");
    bool monotone = true;
    for (std::size_t i = 1; i < d_av.size(); ++i) {
        monotone = monotone && d_av[i] > d_av[i - 1];
    }
    r.check_true("monotone_in_eps", monotone, "mean D_av increases with eps");
    const SlopeFit f = fit_slope(eps_values, d_av);
    r.summary("fit", "slope", f.slope);
    r.summary("fit", "r2", f.r2);
    r.check_range("slope", f.slope, 0.8, 1.2);
    double worst = 0.0;
    for (std::size_t i = 0; i < d_av.size(); ++i) {
        worst = std::max(worst, d_av[i] / eps_values[i]);
    }
    r.check("d_av_over_eps", worst, 2.0 * constant * p.kprime * std::log2(m));
    return r;
}

// ---- end-to-end ----
inline ExperimentResult end_to_end(const ResolvedConfig &c) {
    ExperimentResult r;
    const double total_time = c.num("total_time");
    const double eps_tot = c.num("eps_tot");
    const auto dim = static_cast<Eigen::Index>(c.oracle.size());
    const PureState initial(target_layout(c.oracle.size()),
                            seeded_state(dim, CounterRng::derive(c.raw.seed, 0xe2e)));
    const PureState exact = exact_total_evolution(initial, "target", c.driving, c.oracle, total_time);
    const ChosenParams chosen = choose_params(total_time, c.driving.norm_bound, eps_tot);
    const CompressionParams &p = chosen.params;
    r.summary("params", "m", p.m);
    r.summary("params", "k", p.k);
    r.summary("params", "kprime", p.kprime);
    r.summary("params", "q", static_cast<double>(p.q));
    auto bank = std::make_shared<const ControlBank>(p);
    struct Trial {
        bool completed = false;
        double fidelity = 0.0;
        ResourceTally res;
    };
    std::vector<Trial> trials(static_cast<std::size_t>(c.trials));
    parallel_for(c.trials, c.threads, [&](int t) {
        const std::uint64_t seed = CounterRng::derive(c.raw.seed, static_cast<std::uint64_t>(t));
        const CompressedRunResult out = run_full_compressed(initial, c.driving, c.oracle, total_time,
                                                            p, seed);
        trials[static_cast<std::size_t>(t)] = {out.completed,
                                               phase_free_fidelity(out.state.amps(), exact.amps()),
                                               out.resources};
    });
    std::vector<double> fids;
    std::vector<double> queries;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto t = static_cast<long>(i);
        r.trial("compressed", t, "completed", trials[i].completed ? 1.0 : 0.0);
        r.trial("compressed", t, "fidelity", trials[i].fidelity);
        r.trial("compressed", t, "queries", static_cast<double>(trials[i].res.queries));
        r.trial("compressed", t, "modeled_gates", static_cast<double>(trials[i].res.modeled_gates));
        r.trial("compressed", t, "registers_high_water",
                static_cast<double>(trials[i].res.registers_high_water));
        r.trial("compressed", t, "correction_attempts",
                static_cast<double>(trials[i].res.correction_attempts));
        queries.push_back(static_cast<double>(trials[i].res.queries));
        if (trials[i].completed) {
            fids.push_back(trials[i].fidelity);
        }
    }
    const MeanStat f = mean_stat(fids);
    const MeanStat qs = mean_stat(queries);
    r.summary("compressed", "completed_fraction",
              static_cast<double>(fids.size()) / static_cast<double>(std::max<std::size_t>(trials.size(), 1)));
    r.summary("compressed", "mean_fidelity", f.mean);
    r.summary("compressed", "mean_queries", qs.mean);
    r.summary("compressed", "queries_per_kprime_segment", qs.mean / (p.kprime * chosen.segments));
    r.check("post_selected_fidelity", f.mean, 1.0 - eps_tot, true);

    // interleaving error of the uncompressed success branch with a non-commuting drive
    const DrivingSpec slope_drive =
        builtin_drives::random_constant(c.oracle.size(), c.num("slope_norm"),
                                        static_cast<std::uint64_t>(c.long_int("slope_seed")), total_time);
    const PureState slope_exact = exact_total_evolution(initial, "target", slope_drive, c.oracle, total_time);
    std::vector<double> ms;
    std::vector<double> errs;
    const int segments = segment_count(total_time);
    for (int m : c.int_list("m_values")) {
        Vector psi = initial.amps();
        for (int s = 0; s < segments; ++s) {
            SegmentContext ctx(SegmentParams::pinned_for(m, s * SegmentParams::segment_length),
                               slope_drive, c.oracle);
            psi = segment_branch_target(psi, ctx, {}, std::vector<std::uint8_t>(static_cast<std::size_t>(m), 0));
            psi /= psi.norm();
        }
        const double err = std::sqrt(std::max(0.0, 1.0 - phase_free_fidelity(psi, slope_exact.amps())));
        ms.push_back(m);
        errs.push_back(err);
        r.summary(point_name("m", m), "interleaving_error", err);
    }
    const SlopeFit fit = fit_slope(ms, errs);
    r.summary("fit", "interleaving_slope", fit.slope);
    r.summary("fit", "r2", fit.r2);
    r.check_range("interleaving_slope", fit.slope, -1.3, -0.7);
    return r;
}

// ---- resource-scaling ----
inline ExperimentResult resource_scaling(const ResolvedConfig &c) {
    ExperimentResult r;
    const int k = c.integer("k");
    const int kp = c.integer("kprime");
    const double eps = c.num("eps");
    const auto seg_list = c.int_list("segment_m_values");
    const std::set<int> segment_ms(seg_list.begin(), seg_list.end());
    std::vector<double> logm;
    std::vector<double> prep;
    std::vector<double> seg_logm;
    std::vector<double> attempt_gates;
    std::vector<double> high_water;
    long violations = 0;
    const auto dim = static_cast<Eigen::Index>(c.oracle.size());
    const Vector target = seeded_state(dim, CounterRng::derive(c.raw.seed, 0x5ca1e));
    const auto prep_list = c.int_list("m_values");
    std::set<int> all_ms(prep_list.begin(), prep_list.end());
    all_ms.insert(segment_ms.begin(), segment_ms.end());
    for (int m : all_ms) {
        const SegmentParams sp = SegmentParams::pinned_for(m);
        const long q = std::max(q_bound(m, sp.beta, eps), static_cast<long>(next_power_of_two(m + 2)));
        const std::string pt = point_name("m", m);
        r.summary(pt, "q", static_cast<double>(q));
        if (std::find(prep_list.begin(), prep_list.end(), m) != prep_list.end()) {
            // register-level count only, no target attached
            const auto gates = static_cast<double>(preparation_gate_cost(m, k, q));
            r.summary(pt, "preparation_gates", gates);
            r.summary(pt, "preparation_qubits", static_cast<double>(preparation_qubits(m, k, q)));
            logm.push_back(std::log2(m));
            prep.push_back(gates);
        }
        if (segment_ms.count(m) == 0) {
            continue;
        }
        const auto p = CompressionParams::pinned(m, k, kp, q);
        CompressedContext ctx(p, c.driving, c.oracle, nullptr);
        std::vector<CompressedSegmentResult> runs(static_cast<std::size_t>(c.trials));
        parallel_for(c.trials, c.threads, [&](int t) {
            CounterRng rng(CounterRng::derive(c.raw.seed, static_cast<std::uint64_t>(m) * 100003ULL +
                                                              static_cast<std::uint64_t>(t)));
            runs[static_cast<std::size_t>(t)] = run_segment_compressed(target, ctx, {}, rng);
        });
        std::vector<double> g;
        double hw = 0.0;
        for (std::size_t t = 0; t < runs.size(); ++t) {
            const auto &res = runs[t];
            r.trial(pt, static_cast<long>(t), "queries", static_cast<double>(res.resources.queries));
            r.trial(pt, static_cast<long>(t), "issued_queries", res.issued_queries);
            r.trial(pt, static_cast<long>(t), "modeled_gates", static_cast<double>(res.resources.modeled_gates));
            r.trial(pt, static_cast<long>(t), "registers_high_water",
                    static_cast<double>(res.resources.registers_high_water));
            if (res.issued_queries > kp || res.resources.queries > kp) {
                ++violations;
            }
            g.push_back(static_cast<double>(res.resources.modeled_gates));
            hw = std::max(hw, static_cast<double>(res.resources.registers_high_water));
        }
        seg_logm.push_back(std::log2(m));
        attempt_gates.push_back(mean_stat(g).mean);
        high_water.push_back(hw);
        r.summary(pt, "mean_attempt_gates", attempt_gates.back());
        r.summary(pt, "registers_high_water", hw);
    }
    r.check("query_cap_violations", static_cast<double>(violations), 0.0);
    const SlopeFit fp = fit_slope(logm, prep);
    r.summary("fit", "preparation_slope_vs_log_m", fp.slope);
    r.check("preparation_slope_vs_log_m", fp.slope, 1.3);
    r.summary("all", "segment_attempts", static_cast<double>(seg_logm.size()) * c.trials);
    if (seg_logm.size() >= 3) {
        const SlopeFit fa = fit_slope(seg_logm, attempt_gates);
        const SlopeFit fh = fit_slope(seg_logm, high_water);
        r.summary("fit", "attempt_gates_slope_vs_log_m", fa.slope);
        r.summary("fit", "high_water_slope_vs_log_m", fh.slope);
    }
    return r;
}

// ---- correction-walk ----
inline ExperimentResult correction_walk(const ResolvedConfig &c) {
    ExperimentResult r;
    const int m = c.integer("m");
    const SegmentParams sp = SegmentParams::with_success_probability(m, c.num("success_probability"));
    SegmentContext ctx(sp, c.driving, c.oracle);
    const auto dim = static_cast<Eigen::Index>(c.oracle.size());
    const Vector target = seeded_state(dim, CounterRng::derive(c.raw.seed, 0x3a1c));
    std::vector<double> attempts(static_cast<std::size_t>(c.trials));
    std::vector<double> ok(attempts.size());
    const int budget = c.integer("max_attempts");
    parallel_for(c.trials, c.threads, [&](int t) {
        CounterRng rng(CounterRng::derive(c.raw.seed, static_cast<std::uint64_t>(t)));
        const SegmentResult first = run_segment_streamed(target, ctx, {}, rng);
        double total = 1.0;
        bool done = first.success;
        if (!first.success) {
            const WalkResult w = fqsim::correction_walk(first.post_state, ctx, first.ones(), rng, budget);
            total += w.attempts;
            done = w.success;
        }
        attempts[static_cast<std::size_t>(t)] = total;
        ok[static_cast<std::size_t>(t)] = done ? 1.0 : 0.0;
    });
    for (std::size_t t = 0; t < attempts.size(); ++t) {
        r.trial("walk", static_cast<long>(t), "attempts", attempts[t]);
        r.trial("walk", static_cast<long>(t), "completed", ok[t]);
    }
    const MeanStat a = mean_stat(attempts);
    r.summary("walk", "mean_attempts", a.mean);
    r.summary("walk", "attempts_se", a.se);
    r.summary("walk", "completed_fraction", mean_stat(ok).mean);
    r.summary("walk", "segment_success_probability", sp.segment_success());
    r.check("mean_attempts", a.mean, 2.0 + 3.0 * a.se);
    return r;
}

} // namespace experiments

/// Name, description, default parameters and runner of one experiment.
struct ExperimentInfo {
    std::string name;
    std::string summary;
    int default_trials = 1;
    nlohmann::json defaults;
    /// built-in driving used when the config has none ("random", "diagonal" or "zero")
    std::string default_driving;
    std::function<ExperimentResult(const ResolvedConfig &)> run;
};

inline const std::vector<ExperimentInfo> &experiment_registry() {
    using nlohmann::json;
    static const std::vector<ExperimentInfo> reg = {
        {"encoding-roundtrip", "decode(encode(x)) = x for |x| <= k, exhaustive", 1,
         json{{"m_values", {4, 8, 16}}, {"k_max", 3}}, "zero", experiments::encoding_roundtrip},
        {"b-encoding", "B-encoding inner products with the exponential-state power and Gram matrix", 1,
         json{{"m", 8}, {"k", 3}, {"q", 16}}, "zero", experiments::b_encoding},
        {"overlap", "exponential-state overlap formula on a (q, t) grid and the bound on q", 1,
         json{{"q_values", {8, 16, 32, 64, 128, 1024, 2048}},
              {"beta_sq_values", {0.02, 0.1, 0.3}},
              {"m_values", {8, 16, 32}},
              {"eps_values", {1e-2, 1e-3, 1e-4}}},
         "zero", experiments::overlap},
        {"cleanup", "clean-flag part of the prepared controls against the ideal succinct state", 1,
         json{{"m", 8}, {"k", 3}, {"eps_values", {1e-3, 1e-4}}, {"literal_m", 4}, {"literal_k", 2},
              {"literal_q", 8}},
         "zero", experiments::cleanup},
        {"equivalence", "compressed recursive measurement vs R^m projections, exact branches", 20,
         json{{"m", 8}, {"k", 8}, {"q", 2048}, {"target_dim", 2}}, "zero", experiments::equivalence},
        {"segment-stats", "success rate and located ones of single segments, both protocols", 1000,
         json{{"m_uncompressed", 16}, {"m_compressed", 8}, {"k", 3}, {"kprime", 3}, {"q", 0},
              {"eps", 1e-4}},
         "random", experiments::segment_stats},
        {"error-scaling", "exact-branch D_av against injected preparation and drive error", 8,
         json{{"m", 8}, {"k", 4}, {"kprime", 3}, {"q", 2048}, {"eps_values", {1e-4, 1e-3, 1e-2}},
              {"c", 1.0}, {"inject_preparation", true}, {"inject_drive", true}},
         "random", experiments::error_scaling},
        {"end-to-end", "full compressed runs vs exact evolution; interleaving error slope", 200,
         json{{"total_time", 1.0}, {"eps_tot", 0.1}, {"m_values", {4, 8, 16, 32}},
              {"slope_norm", 1.0}, {"slope_seed", 5}},
         "diagonal", experiments::end_to_end},
        {"resource-scaling", "query cap, preparation gate slope and register high-water vs m", 200,
         json{{"m_values", {8, 16, 32, 64}}, {"segment_m_values", {4, 8, 16}}, {"k", 2}, {"kprime", 2},
              {"eps", 1e-3}},
         "random",
         experiments::resource_scaling},
        {"correction-walk", "attempts of the undo/redo walk at forced segment success", 1000,
         json{{"m", 8}, {"success_probability", 0.75}, {"max_attempts", 64}}, "random",
         experiments::correction_walk},
    };
    return reg;
}

inline const ExperimentInfo &find_experiment(const std::string &name) {
    for (const auto &e : experiment_registry()) {
        if (e.name == name) {
            return e;
        }
    }
    throw ConfigError("experiment", "unknown experiment '" + name + "'");
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json &j) {
    detail::reject_unknown_keys(
        j, {"experiment", "seed", "trials", "output", "threads", "params", "driving", "oracle"},
        "config");
    ExperimentConfig c;
    c.experiment = detail::get_field<std::string>(j, "experiment", "config");
    c.seed = detail::get_field_or<std::uint64_t>(j, "seed", 1, "config");
    c.trials = detail::get_field_or<int>(j, "trials", 0, "config");
    c.output = detail::get_field_or<std::string>(j, "output", "", "config");
    c.threads = detail::get_field_or<int>(j, "threads", 0, "config");
    c.oracle = detail::get_field_or<std::string>(j, "oracle", "0110", "config");
    if (j.contains("params")) {
        if (!j.at("params").is_object()) {
            throw ConfigError("config.params", "expected an object");
        }
        c.params = j.at("params");
    }
    if (j.contains("driving")) {
        c.driving = j.at("driving");
    }
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string &path) {
    const std::string text = detail::read_text_file(path);
    return experiment_config_from_json(detail::parse_json_text(text, path));
}

inline ResolvedConfig resolve_config(const ExperimentConfig &c) {
    const ExperimentInfo &info = find_experiment(c.experiment);
    ResolvedConfig r;
    r.raw = c;
    r.params = info.defaults;
    for (auto it = c.params.begin(); it != c.params.end(); ++it) {
        if (!info.defaults.contains(it.key())) {
            throw ConfigError("config.params." + it.key(), "unknown parameter for " + c.experiment);
        }
        const auto &def = info.defaults.at(it.key());
        const bool same_kind = (def.is_number() && it.value().is_number()) ||
                               (def.is_boolean() && it.value().is_boolean()) ||
                               (def.is_array() && it.value().is_array());
        if (!same_kind) {
            throw ConfigError("config.params." + it.key(), "wrong type");
        }
        r.params[it.key()] = it.value();
    }
    if (c.trials < 0) {
        throw ConfigError("config.trials", "must be >= 1");
    }
    r.trials = c.trials > 0 ? c.trials : info.default_trials;
    if (c.threads < 0) {
        throw ConfigError("config.threads", "must be >= 0");
    }
    r.threads = c.threads > 0 ? c.threads
                              : static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
    try {
        r.oracle = OracleString::parse(c.oracle);
    } catch (const Error &e) {
        throw ConfigError("config.oracle", e.what());
    }
    if (r.oracle.size() == 0) {
        throw ConfigError("config.oracle", "must not be empty");
    }
    if (c.driving) {
        r.driving = driving_from_json(*c.driving, "config.driving");
        r.driving_label = "config";
    } else {
        const std::size_t dim = r.oracle.size();
        if (info.default_driving == "diagonal") {
            RealVector v(static_cast<Eigen::Index>(dim));
            for (std::size_t i = 0; i < dim; ++i) {
                v(static_cast<Eigen::Index>(i)) = std::sin(1.0 + 2.0 * static_cast<double>(i));
            }
            r.driving = builtin_drives::diagonal(v, 1.0);
        } else if (info.default_driving == "random") {
            r.driving = builtin_drives::random_constant(dim, 1.0, 7, 1.0);
        } else {
            r.driving = builtin_drives::zero(dim, 1.0);
        }
        r.driving_label = "builtin:" + info.default_driving;
    }
    if (r.driving.dim != r.oracle.size()) {
        throw ConfigError("config.driving.dim", "differs from the oracle length");
    }
    return r;
}

inline ExperimentResult run_experiment(const ResolvedConfig &c) {
    return find_experiment(c.raw.experiment).run(c);
}

inline ExperimentResult run_experiment(const ExperimentConfig &c) {
    return run_experiment(resolve_config(c));
}

/// Rows sorted by (kind, point, trial, metric) after the metadata lines.
inline void write_csv(std::ostream &out, const ResolvedConfig &c, const ExperimentResult &r,
                      const CostModel &cost = {}) {
    out << "# fqsim csv schema=" << kCsvSchemaVersion << "\n";
    out << "# experiment=" << c.raw.experiment << "\n";
    out << "# seed=" << c.raw.seed << " trials=" << c.trials << "\n";
    out << "# cost_model " << cost.describe() << "\n";
    out << "# params " << c.params.dump() << "\n";
    out << "# oracle=" << c.oracle.str() << "\n";
    out << "# driving " << c.driving_label << " name=" << c.driving.name << " dim=" << c.driving.dim
        << " norm_bound=" << format_number(c.driving.norm_bound)
        << " gate_cost=" << c.driving.gate_cost << "\n";
    for (const auto &a : r.assertions) {
        out << "# assertion " << a.name << " " << (a.passed ? "PASS" : "FAIL") << " " << a.detail
            << "\n";
    }
    for (const auto &n : r.notes) {
        out << "# note " << n << "\n";
    }
    out << "# status=" << (r.passed() ? "PASS" : "FAIL") << "\n";
    std::vector<CsvRow> rows = r.rows;
    std::stable_sort(rows.begin(), rows.end(), [](const CsvRow &a, const CsvRow &b) {
        return std::tie(a.kind, a.point, a.trial) < std::tie(b.kind, b.point, b.trial);
    });
    out << "kind,point,trial,metric,value\n";
    for (const auto &row : rows) {
        out << row.kind << "," << row.point << "," << row.trial << "," << row.metric << ","
            << format_number(row.value) << "\n";
    }
}

/// Human-readable description of the configuration format.
inline nlohmann::json experiment_schema() {
    using nlohmann::json;
    json s;
    s["format"] = "JSON object; unknown keys are errors";
    s["fields"] = {
        {"experiment", "string, required; see list-experiments"},
        {"seed", "unsigned integer, default 1"},
        {"trials", "integer >= 1; default per experiment"},
        {"output", "CSV path; empty or absent writes to stdout"},
        {"threads", "integer >= 0; 0 uses every hardware thread"},
        {"oracle", "bit string, default \"0110\"; its length is the target dimension"},
        {"params", "object of experiment parameters; keys must appear in the defaults below"},
        {"driving",
         json{{"builtin", "zero | random | diagonal | walk | rotating (optional)"},
              {"dim", "target dimension"},
              {"entries", "list of [row, col, re, im]; Hermitian partner filled in"},
              {"norm_bound", "operator-norm bound, required with entries"},
              {"total_time", "default 1.0"},
              {"time_grid", "grid points per unit time, default 64"},
              {"gate_cost", "modeled gates per drive window, default 1"},
              {"norm", "random / rotating"},
              {"seed", "random / rotating"},
              {"diagonal", "diagonal values"},
              {"hop", "walk"},
              {"omega", "rotating"}}}};
    json ex = json::object();
    for (const auto &e : experiment_registry()) {
        ex[e.name] = {{"summary", e.summary},
                      {"default_trials", e.default_trials},
                      {"default_driving", e.default_driving},
                      {"params", e.defaults}};
    }
    s["experiments"] = ex;
    s["csv"] = "'#' metadata lines, then header kind,point,trial,metric,value";
    s["exit_codes"] = {{"0", "all assertions pass"}, {"1", "an assertion failed"},
                       {"2", "configuration or infeasibility error"}};
    return s;
}

} // namespace fqsim
