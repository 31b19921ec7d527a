#pragma once

// Explicit finite-difference integration of dw/dt = L0*omega0*M w,
//
//   w(t + dt) = (I + alpha M) w(t),   alpha = L0*omega0*dt,
//
// with the op-amp outputs x clipped at +-v_supp. Clipping an output also
// zeroes its companion z (anti-windup), so a saturated output stays pinned.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xpoint/circuit.hpp"
#include "xpoint/linalg.hpp"

namespace xpoint {

class InstabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SimConfig {
    double alpha = 0.05;          // L0*omega0*dt
    double x0 = 1e-3;             // V, initial value of every output
    double t_max = 1e-3;          // s
    double conv_tol = 1e-3;       // relative distance to the steady state
    std::size_t record_stride = 0; // steps between samples; 0 picks <= 1e4 samples over t_max
    bool record_trace = true;
    double settle_factor = 5.0;   // reference state taken at settle_factor * first-saturation time

    void validate() const
    {
        if (!(alpha > 0.0 && alpha <= 0.5)) {
            throw std::invalid_argument("SimConfig: alpha must lie in (0, 0.5]");
        }
        if (!(x0 > 0.0)) {
            throw std::invalid_argument("SimConfig: x0 must be positive");
        }
        if (!(t_max > 0.0)) {
            throw std::invalid_argument("SimConfig: t_max must be positive");
        }
        if (!(conv_tol > 0.0)) {
            throw std::invalid_argument("SimConfig: conv_tol must be positive");
        }
        if (!(settle_factor >= 1.0)) {
            throw std::invalid_argument("SimConfig: settle_factor must be >= 1");
        }
    }

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct Trace {
    double dt = 0.0;
    std::size_t stride = 0;
    std::vector<double> times;  // s
    std::vector<Vector> states; // x block only
    std::size_t steps = 0;      // steps taken
    double final_time = 0.0;
    Vector steady_state;        // final x
    std::optional<double> computing_time;
    std::optional<double> saturation_time;
    std::optional<std::size_t> saturated_index; // 0-based, first output to clip
    std::vector<double> switch_times;           // scheduled runs: phase boundaries
};

/// One dense step of w <- (I + alpha M) w followed by supply clipping of the
/// first half of w.
inline Vector step(const Vector& w, const Matrix& m, double alpha, double v_supp)
{
    if (!m.square() || m.rows() != w.size() || w.size() % 2 != 0) {
        throw DimensionError("step: w must have length 2N and M be 2N x 2N");
    }
    const std::size_t n = w.size() / 2;
    std::vector<double> mw(w.size());
    m.apply(w.span(), mw);
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        out[i] = w[i] + alpha * mw[i];
        if (!std::isfinite(out[i])) {
            throw InstabilityError("step: non-finite state");
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (std::abs(out[k]) > v_supp) {
            out[k] = std::copysign(v_supp, out[k]);
            out[n + k] = 0.0;
        }
    }
    return Vector(std::move(out));
}

/// One phase of a run: the system to integrate and the fraction of v_supp
/// the largest output must reach before moving to the next phase.
template <CoefficientOperator Op>
struct Phase {
    const EigenSystem<Op>* system;
    double switch_fraction;
};

namespace detail {

/// Sequential integrator shared by every entry point.
template <CoefficientOperator Op>
class Integrator {
public:
    Integrator(std::span<const Phase<Op>> phases, const SimConfig& cfg)
        : phases_(phases), cfg_(cfg)
    {
        cfg_.validate();
        if (phases_.empty()) {
            throw std::invalid_argument("simulate: no phases");
        }
        const auto& sys0 = *phases_.front().system;
        n_ = sys0.n();
        v_supp_ = sys0.params().v_supp;
        for (const auto& ph : phases_) {
            if (ph.system->n() != n_ || !(ph.system->params() == sys0.params())) {
                throw std::invalid_argument("simulate: phases must share N and op-amp parameters");
            }
            if (cfg_.alpha * ph.system->m_norm_inf() >= 2.0) {
                throw InstabilityError("simulate: alpha * ||M||_inf >= 2, step too large");
            }
        }
        dt_ = cfg_.alpha / sys0.params().gbw_rad();
        max_steps_ = static_cast<std::size_t>(std::floor(cfg_.t_max / dt_ * (1.0 + 1e-12)));
        w_.assign(2 * n_, 0.0);
        std::fill(w_.begin(), w_.begin() + static_cast<std::ptrdiff_t>(n_), cfg_.x0);
        mw_.resize(2 * n_);
    }

    double dt() const noexcept { return dt_; }
    std::size_t max_steps() const noexcept { return max_steps_; }
    std::span<const double> x() const noexcept { return std::span<const double>(w_).first(n_); }

    std::size_t step_count() const noexcept { return k_; }
    std::optional<std::size_t> saturation_step() const noexcept { return sat_step_; }
    std::optional<std::size_t> saturated_index() const noexcept { return sat_index_; }
    const std::vector<std::size_t>& switch_steps() const noexcept { return switch_steps_; }
    double last_change() const noexcept { return last_change_; }

    /// Advances one step; returns false once t_max is exhausted.
    bool advance()
    {
        if (k_ >= max_steps_) {
            return false;
        }
        const auto& sys = *phases_[phase_].system;
        sys.apply(w_, mw_);
        const double a = cfg_.alpha;
        prev_.assign(w_.begin(), w_.begin() + static_cast<std::ptrdiff_t>(n_));
        for (std::size_t i = 0; i < 2 * n_; ++i) {
            w_[i] += a * mw_[i];
        }
        // clip; remember the first output to saturate
        std::optional<std::size_t> worst;
        double worst_mag = 0.0;
        for (std::size_t k = 0; k < n_; ++k) {
            const double mag = std::abs(w_[k]);
            if (mag > v_supp_) {
                if (mag > worst_mag) {
                    worst_mag = mag;
                    worst = k;
                }
                w_[k] = std::copysign(v_supp_, w_[k]);
                w_[n_ + k] = 0.0;
            }
        }
        // x only: a pinned output cycles its z between 0 and one step of drive
        double change = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            change = std::max(change, std::abs(w_[i] - prev_[i]));
        }
        ++k_;
        last_change_ = change;
        if (worst && !sat_step_) {
            sat_step_ = k_;
            sat_index_ = worst;
        }
        if (!sat_step_) {
            const double big = norm_inf(w_);
            if (!std::isfinite(big) || big > 1e6 * v_supp_) {
                throw InstabilityError("simulate: state exceeded 1e6 * v_supp before saturation");
            }
        } else if (!std::isfinite(change)) {
            throw InstabilityError("simulate: non-finite state");
        }
        if (phase_ + 1 < phases_.size() &&
            norm_inf(x()) >= phases_[phase_].switch_fraction * v_supp_) {
            ++phase_;
            switch_steps_.push_back(k_);
        }
        return true;
    }

private:
    std::span<const Phase<Op>> phases_;
    SimConfig cfg_;
    std::size_t n_ = 0;
    double v_supp_ = 1.0;
    double dt_ = 0.0;
    std::size_t max_steps_ = 0;
    std::vector<double> w_;
    std::vector<double> mw_;
    std::vector<double> prev_;
    std::size_t k_ = 0;
    std::size_t phase_ = 0;
    std::optional<std::size_t> sat_step_;
    std::optional<std::size_t> sat_index_;
    std::vector<std::size_t> switch_steps_;
    double last_change_ = std::numeric_limits<double>::infinity();
};

inline double relative_distance(std::span<const double> x, std::span<const double> ref, double ref_norm)
{
    return distance2(x, ref) / ref_norm;
}

/// Replays a run and returns the first step whose x lies within tol of ref.
template <CoefficientOperator Op>
std::optional<std::size_t> first_step_within(std::span<const Phase<Op>> phases, const SimConfig& cfg,
                                             std::span<const double> ref, std::size_t last_step)
{
    const double ref_norm = norm2(ref);
    if (ref_norm == 0.0) {
        return std::nullopt;
    }
    Integrator<Op> run(phases, cfg);
    if (relative_distance(run.x(), ref, ref_norm) < cfg.conv_tol) {
        return 0;
    }
    while (run.step_count() < last_step && run.advance()) {
        if (relative_distance(run.x(), ref, ref_norm) < cfg.conv_tol) {
            return run.step_count();
        }
    }
    return std::nullopt;
}

// A step that moves no output by more than this (times v_supp) after
// saturation means the clipped fixed point has been reached.
inline constexpr double kSettledChange = 1e-13;

template <CoefficientOperator Op>
Trace run_phases(std::span<const Phase<Op>> phases, const SimConfig& cfg)
{
    Integrator<Op> run(phases, cfg);
    const double v_supp = phases.front().system->params().v_supp;

    Trace tr;
    tr.dt = run.dt();
    tr.stride = cfg.record_stride != 0
                    ? cfg.record_stride
                    : std::max<std::size_t>(1, (run.max_steps() + 9999) / 10000);
    auto record = [&] {
        if (cfg.record_trace && run.step_count() % tr.stride == 0) {
            tr.times.push_back(static_cast<double>(run.step_count()) * tr.dt);
            tr.states.emplace_back(std::vector<double>(run.x().begin(), run.x().end()));
        }
    };
    record();
    while (run.advance()) {
        record();
        if (const auto sat = run.saturation_step()) {
            const auto horizon = static_cast<std::size_t>(
                std::ceil(cfg.settle_factor * static_cast<double>(*sat)));
            if (run.step_count() >= horizon || run.last_change() <= kSettledChange * v_supp) {
                break;
            }
        }
    }

    tr.steps = run.step_count();
    tr.final_time = static_cast<double>(tr.steps) * tr.dt;
    tr.steady_state = Vector(std::vector<double>(run.x().begin(), run.x().end()));
    tr.saturated_index = run.saturated_index();
    if (const auto sat = run.saturation_step()) {
        tr.saturation_time = static_cast<double>(*sat) * tr.dt;
    }
    for (std::size_t s : run.switch_steps()) {
        tr.switch_times.push_back(static_cast<double>(s) * tr.dt);
    }
    if (run.saturation_step()) {
        const auto hit = first_step_within<Op>(phases, cfg, tr.steady_state.span(), tr.steps);
        if (hit) {
            tr.computing_time = static_cast<double>(*hit) * tr.dt;
        }
    }
    return tr;
}

} // namespace detail

/// Integrates from x(0) = x0 (all outputs), z(0) = 0. The run ends at t_max,
/// or once the outputs have been saturated for settle_factor times the first
/// saturation time (earlier if the clipped state stops moving). The final x is
/// the steady state; computing_time is the first time x came within conv_tol
/// of it, and is absent when no output ever saturated.
template <CoefficientOperator Op>
Trace simulate(const EigenSystem<Op>& sys, const SimConfig& cfg = {})
{
    const Phase<Op> phase{&sys, 1.0};
    return detail::run_phases<Op>(std::span<const Phase<Op>>(&phase, 1), cfg);
}

/// First time (s) at which the run's x lies within cfg.conv_tol of
/// `reference`, searching up to t_max.
template <CoefficientOperator Op>
std::optional<double> computing_time(const EigenSystem<Op>& sys, std::span<const double> reference,
                                     const SimConfig& cfg = {})
{
    if (reference.size() != sys.n()) {
        throw DimensionError("computing_time: reference length != N");
    }
    const Phase<Op> phase{&sys, 1.0};
    const std::span<const Phase<Op>> phases(&phase, 1);
    detail::Integrator<Op> probe(phases, cfg);
    const auto hit = detail::first_step_within<Op>(phases, cfg, reference, probe.max_steps());
    if (!hit) {
        return std::nullopt;
    }
    return static_cast<double>(*hit) * probe.dt();
}

struct SchedulePhase {
    double delta;
    double switch_fraction; // of v_supp; ignored for the last phase
};

/// Runs with decreasing mismatch: phase i integrates with delta_i until the
/// largest output reaches switch_fraction_i * v_supp, then M is rebuilt for
/// the next delta while w carries over.
template <CoefficientOperator Op>
Trace simulate_scheduled(const EigenSystem<Op>& sys, std::span<const SchedulePhase> schedule,
                         const SimConfig& cfg = {})
{
    if (schedule.empty()) {
        throw std::invalid_argument("simulate_scheduled: empty schedule");
    }
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (i > 0 && !(schedule[i].delta < schedule[i - 1].delta)) {
            throw std::invalid_argument("simulate_scheduled: deltas must be strictly decreasing");
        }
        if (i + 1 < schedule.size() &&
            !(schedule[i].switch_fraction > 0.0 && schedule[i].switch_fraction <= 1.0)) {
            throw std::invalid_argument("simulate_scheduled: switch fraction must lie in (0, 1]");
        }
    }
    std::vector<EigenSystem<Op>> systems;
    systems.reserve(schedule.size());
    for (const auto& ph : schedule) {
        systems.push_back(sys.with_delta(ph.delta));
    }
    std::vector<Phase<Op>> phases;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        phases.push_back({&systems[i], schedule[i].switch_fraction});
    }
    return detail::run_phases<Op>(phases, cfg);
}

} // namespace xpoint
