#pragma once

// Datasets and sweep campaigns: computing time, solution error and lambda_h
// against the mismatch delta, the matrix size, and per-TIA variation.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "xpoint/circuit.hpp"
#include "xpoint/fdsim.hpp"
#include "xpoint/linalg.hpp"

namespace xpoint {

/// Programmable device conductances, normalized by a 100 uS unit.
struct ConductanceLevels {
    std::array<double, 12> micro_siemens{60, 90, 120, 150, 190, 210, 240, 290, 310, 340, 390, 420};
    double unit_us = 100.0;

    double normalized(std::size_t i) const { return micro_siemens.at(i) / unit_us; }
    std::size_t count() const noexcept { return micro_siemens.size(); }
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept
{
    return mix64(mix64(mix64(mix64(base) ^ a) ^ b) ^ c);
}

/// N x N matrix, entries drawn uniformly from the normalized levels.
inline Matrix gen_random_matrix(std::size_t n, const ConductanceLevels& levels, std::uint64_t seed)
{
    if (n == 0) {
        throw std::invalid_argument("gen_random_matrix: N must be >= 1");
    }
    std::mt19937_64 rng(seed);
    const std::uint64_t k = levels.count();
    // reject the top partial block so that every level is exactly equiprobable
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % k;
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            std::uint64_t r = rng();
            while (r >= limit) {
                r = rng();
            }
            a(i, j) = levels.normalized(static_cast<std::size_t>(r % k));
        }
    }
    return a;
}

/// Our quantifications of "independent of N" and "tight distribution".
struct Thresholds {
    double time_cv_across_sizes = 0.15;
    double time_spread_in_cell = 0.10;
    double epsilon_flatness_ratio = 1.5;
    double variation_band = 0.30;
};

struct SweepRow {
    std::string kind = "uniform"; // "uniform" or "varied"
    std::size_t n = 0;
    double delta = 0.0; // uniform delta, or delta_max for varied rows
    std::size_t delta_index = 0;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    std::optional<double> computing_time; // s
    double epsilon = std::numeric_limits<double>::quiet_NaN();
    double lambda_h = std::numeric_limits<double>::quiet_NaN();
    std::string error;

    bool ok() const { return error.empty() && computing_time.has_value(); }
};

struct Stats {
    std::size_t count = 0;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double stdev = std::numeric_limits<double>::quiet_NaN(); // sample (n - 1)
    double min = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
};

inline Stats summarize(std::span<const double> values)
{
    Stats s;
    s.count = values.size();
    if (values.empty()) {
        return s;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    s.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) {
        ss += (v - s.mean) * (v - s.mean);
    }
    s.stdev = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    s.min = *lo;
    s.max = *hi;
    return s;
}

struct CellAggregate {
    std::string kind;
    std::size_t n = 0;
    double delta = 0.0;
    Stats computing_time;
    Stats epsilon;
    Stats lambda_h;
    std::size_t failures = 0;
};

struct SweepReport {
    std::string mode;
    std::uint64_t base_seed = 0;
    SimConfig cfg;
    OpAmpParams params;
    Thresholds thresholds;
    std::vector<SweepRow> rows;

    /// Per (kind, N, delta) statistics over successful rows, in row order.
    std::vector<CellAggregate> aggregates() const
    {
        std::vector<CellAggregate> out;
        std::map<std::tuple<std::string, std::size_t, std::size_t>, std::size_t> where;
        std::vector<std::array<std::vector<double>, 3>> samples;
        for (const auto& r : rows) {
            const auto key = std::make_tuple(r.kind, r.n, r.delta_index);
            auto it = where.find(key);
            if (it == where.end()) {
                it = where.emplace(key, out.size()).first;
                out.push_back({r.kind, r.n, r.delta, {}, {}, {}, 0});
                samples.emplace_back();
            }
            if (!r.ok()) {
                ++out[it->second].failures;
                continue;
            }
            samples[it->second][0].push_back(*r.computing_time);
            samples[it->second][1].push_back(r.epsilon);
            samples[it->second][2].push_back(r.lambda_h);
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i].computing_time = summarize(samples[i][0]);
            out[i].epsilon = summarize(samples[i][1]);
            out[i].lambda_h = summarize(samples[i][2]);
        }
        return out;
    }
};

/// Execution knobs for sweeps. Rows already present in `completed` (matched
/// by kind, N, delta index and trial) are reused instead of recomputed.
struct SweepOptions {
    unsigned workers = 1;
    const std::vector<SweepRow>* completed = nullptr;
    std::function<void(const SweepRow&)> on_row;
};

namespace detail {

/// Runs `count` independent jobs on `workers` threads; job i writes slot i.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn)
{
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                fn(i);
            }
        });
    }
}

/// Simulates one system and fills the outcome columns of `row`.
template <CoefficientOperator Op>
void evaluate_row(SweepRow& row, const EigenSystem<Op>& sys, std::span<const double> oracle, const SimConfig& cfg)
{
    try {
        SimConfig quiet = cfg;
        quiet.record_trace = false;
        const Trace tr = simulate(sys, quiet);
        row.computing_time = tr.computing_time;
        row.epsilon = solution_error(tr.steady_state.span(), oracle);
        row.lambda_h = spectral_abscissa(sys);
        if (!tr.computing_time) {
            row.error = "no convergence within t_max";
        }
    } catch (const std::exception& e) {
        row.error = e.what();
    }
}

inline void run_rows(std::vector<SweepRow>& rows, const SweepOptions& opt,
                     const std::function<void(SweepRow&)>& compute)
{
    std::map<std::tuple<std::string, std::size_t, std::size_t, std::size_t>, const SweepRow*> done;
    if (opt.completed) {
        for (const auto& r : *opt.completed) {
            done.emplace(std::make_tuple(r.kind, r.n, r.delta_index, r.trial), &r);
        }
    }
    std::mutex report;
    parallel_for(rows.size(), opt.workers, [&](std::size_t i) {
        SweepRow& row = rows[i];
        const auto it = done.find(std::make_tuple(row.kind, row.n, row.delta_index, row.trial));
        if (it != done.end() && it->second->seed == row.seed) {
            row = *it->second;
            return;
        }
        compute(row);
        if (opt.on_row) {
            std::lock_guard lock(report);
            opt.on_row(row);
        }
    });
}

} // namespace detail

/// One row per delta on a fixed matrix.
inline SweepReport sweep_delta(const Matrix& a, std::span<const double> deltas, const SimConfig& cfg = {},
                               const OpAmpParams& params = {}, const SweepOptions& opt = {})
{
    if (!a.square()) {
        throw DimensionError("sweep_delta: A is not square");
    }
    const EigPair oracle = power_iteration(a);
    SweepReport rep;
    rep.mode = "delta";
    rep.cfg = cfg;
    rep.params = params;
    for (std::size_t d = 0; d < deltas.size(); ++d) {
        if (!(deltas[d] > 0.0)) {
            throw std::invalid_argument("sweep_delta: deltas must be positive");
        }
        SweepRow row;
        row.n = a.rows();
        row.delta = deltas[d];
        row.delta_index = d;
        rep.rows.push_back(row);
    }
    detail::run_rows(rep.rows, opt, [&](SweepRow& row) {
        const auto sys = EigenSystem<Matrix>::uniform(a, oracle.value, row.delta, params);
        detail::evaluate_row(row, sys, oracle.vector.span(), cfg);
    });
    return rep;
}

/// Seed of the matrix used by trial `trial` at size `n`. The same matrix is
/// evaluated at every delta.
constexpr std::uint64_t size_trial_seed(std::uint64_t base_seed, std::size_t n, std::size_t trial) noexcept
{
    return derive_seed(base_seed, n, 0, trial);
}

/// Random matrices at every size, each evaluated at every delta. Rows are
/// ordered by (N, delta, trial).
inline SweepReport sweep_size(std::span<const std::size_t> sizes, std::size_t trials,
                              std::span<const double> deltas, std::uint64_t base_seed, const SimConfig& cfg = {},
                              const OpAmpParams& params = {}, const SweepOptions& opt = {},
                              const ConductanceLevels& levels = {})
{
    if (sizes.empty() || trials == 0 || deltas.empty()) {
        throw std::invalid_argument("sweep_size: need sizes, trials >= 1 and deltas");
    }
    SweepReport rep;
    rep.mode = "size";
    rep.base_seed = base_seed;
    rep.cfg = cfg;
    rep.params = params;
    for (std::size_t n : sizes) {
        for (std::size_t d = 0; d < deltas.size(); ++d) {
            for (std::size_t t = 0; t < trials; ++t) {
                SweepRow row;
                row.n = n;
                row.delta = deltas[d];
                row.delta_index = d;
                row.trial = t;
                row.seed = size_trial_seed(base_seed, n, t);
                rep.rows.push_back(row);
            }
        }
    }
    detail::run_rows(rep.rows, opt, [&](SweepRow& row) {
        try {
            const Matrix a = gen_random_matrix(row.n, levels, row.seed);
            const EigPair oracle = power_iteration(a);
            const auto sys = EigenSystem<Matrix>::uniform(a, oracle.value, row.delta, params);
            detail::evaluate_row(row, sys, oracle.vector.span(), cfg);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    return rep;
}

/// Re-runs a sweep_size row from its recorded seed.
inline SweepRow reproduce_size_row(const SweepRow& recorded, const SimConfig& cfg = {},
                                   const OpAmpParams& params = {}, const ConductanceLevels& levels = {})
{
    SweepRow row = recorded;
    row.computing_time.reset();
    row.epsilon = row.lambda_h = std::numeric_limits<double>::quiet_NaN();
    row.error.clear();
    const Matrix a = gen_random_matrix(row.n, levels, row.seed);
    const EigPair oracle = power_iteration(a);
    const auto sys = EigenSystem<Matrix>::uniform(a, oracle.value, row.delta, params);
    detail::evaluate_row(row, sys, oracle.vector.span(), cfg);
    return row;
}

/// Per-TIA variation: each trial draws delta_i ~ U(0, delta_max) for every
/// TIA. Row 0 is the uniform baseline at delta_max / 2.
template <CoefficientOperator Op>
SweepReport variation_trials(const Op& a, double lambda_max, std::span<const double> oracle, double delta_max,
                             std::size_t trials, std::uint64_t base_seed, const SimConfig& cfg = {},
                             const OpAmpParams& params = {}, const SweepOptions& opt = {})
{
    if (trials == 0) {
        throw std::invalid_argument("variation_trials: trials must be >= 1");
    }
    SweepReport rep;
    rep.mode = "variation";
    rep.base_seed = base_seed;
    rep.cfg = cfg;
    rep.params = params;
    SweepRow baseline;
    baseline.n = a.size();
    baseline.delta = delta_max / 2.0;
    rep.rows.push_back(baseline);
    for (std::size_t t = 0; t < trials; ++t) {
        SweepRow row;
        row.kind = "varied";
        row.n = a.size();
        row.delta = delta_max;
        row.trial = t;
        row.seed = derive_seed(base_seed, a.size(), 1, t);
        rep.rows.push_back(row);
    }
    detail::run_rows(rep.rows, opt, [&](SweepRow& row) {
        try {
            if (row.kind == "uniform") {
                const auto sys = EigenSystem<Op>::uniform(a, lambda_max, row.delta, params);
                detail::evaluate_row(row, sys, oracle, cfg);
            } else {
                const Vector deltas = sample_variation(delta_max, a.size(), row.seed);
                const auto sys = EigenSystem<Op>::from_deltas(a, lambda_max, deltas.span(), params);
                detail::evaluate_row(row, sys, oracle, cfg);
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    return rep;
}

inline SweepReport variation_trials(const Matrix& a, double delta_max, std::size_t trials, std::uint64_t base_seed,
                                    const SimConfig& cfg = {}, const OpAmpParams& params = {},
                                    const SweepOptions& opt = {})
{
    const EigPair oracle = power_iteration(a);
    return variation_trials(a, oracle.value, oracle.vector.span(), delta_max, trials, base_seed, cfg, params, opt);
}

// ---------------------------------------------------------------------------
// Checks on finished reports.

/// Least-squares fit y = slope x + intercept and its R^2.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("linear_fit: need >= 2 paired samples");
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

/// computing_time * L0 omega0 lambda_h / ln(v_supp / x0); ~1 when the time
/// is dominated by exponential growth from x0 to the rail.
inline double growth_consistency(const SweepRow& row, const SimConfig& cfg, const OpAmpParams& params)
{
    return *row.computing_time * params.gbw_rad() * row.lambda_h / std::log(params.v_supp / cfg.x0);
}

} // namespace xpoint
