#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "oscstab/synthesis.hpp"

namespace oscstab {

enum class RunStatus { Completed, DomainExit, RankDeficientHalt, NonFiniteHalt };

inline const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Completed: return "completed";
        case RunStatus::DomainExit: return "domain_exit";
        case RunStatus::RankDeficientHalt: return "rank_deficient";
        case RunStatus::NonFiniteHalt: return "non_finite";
    }
    return "unknown";
}

/// A pi_eps-solution sample path: states and applied controls at every
/// integration node, with the eps-period boundaries marked.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> controls;  // control applied on [t_k, t_{k+1})
    std::vector<size_t> period_marks;
    double epsilon = 0.0;
    double step = 0.0;  // effective step after rounding
    RunStatus status = RunStatus::Completed;
    double stop_time = 0.0;
    std::string message;
    bool horizon_truncated = false;

    const Vec& final_state() const { return states.back(); }
};

struct DecaySeries {
    std::vector<double> times;
    std::vector<double> values;  // (1/t) ln ||x(t)||
    double rate_estimate = 0.0;  // mean over the final quartile of the horizon
    bool converged_exactly = false;
};

/// Integrates the closed loop under pi_eps semantics: on each interval
/// [t_j, t_j + eps) the coefficient solve is done once at the frozen state
/// x(t_j), while the explicit time dependence of the control runs
/// continuously. Classical fixed-step RK4; the step is rounded down so that
/// period boundaries are hit exactly.
inline Trajectory integrate_pi_epsilon(const ControlAffineSystem& system, const RankSpec& spec,
                                       const ControllerConfig& config, const Vec& x0, double horizon,
                                       double step_request = 0.0) {
    config.validate();
    config.frequencies.validate(spec);
    system.check_point(x0);
    const double eps = config.epsilon;
    const int kappa_max = config.frequencies.max_frequency();

    Trajectory traj;
    traj.epsilon = eps;
    const long periods = static_cast<long>(std::floor(horizon / eps + 1e-9));
    traj.horizon_truncated = std::abs(periods * eps - horizon) > 1e-9 * std::max(1.0, horizon);
    if (periods < 1) throw ConfigError("horizon shorter than one period");

    double step = step_request > 0.0 ? step_request : eps / (200.0 * kappa_max);
    step = std::min(step, eps / (100.0 * kappa_max));
    const long steps_per_period = static_cast<long>(std::ceil(eps / step - 1e-12));
    step = eps / static_cast<double>(steps_per_period);
    traj.step = step;

    Vec x = x0;
    traj.times.push_back(0.0);
    traj.states.push_back(x);
    traj.status = RunStatus::Completed;

    for (long j = 0; j < periods; ++j) {
        const double t_j = static_cast<double>(j) * eps;
        traj.period_marks.push_back(traj.times.size() - 1);
        Vec x_frozen = x;
        Vec a_frozen;
        try {
            a_frozen = solve_coefficients(system, spec, config, x_frozen);
        } catch (const RankDeficient& e) {
            traj.status = RunStatus::RankDeficientHalt;
            traj.stop_time = t_j;
            traj.message = e.what();
            return traj;
        }
        auto u_of = [&](double t) {
            return control_from_coefficients(spec, config.frequencies, eps, a_frozen, t,
                                            system.num_controls());
        };
        auto rhs = [&](double t, const Vec& y) {
            const Vec u = u_of(t);
            Vec dy = system.drift.eval(y);
            for (int k = 0; k < system.num_controls(); ++k)
                dy += u[k] * system.controlled[static_cast<size_t>(k)].eval(y);
            return dy;
        };

        for (long s = 0; s < steps_per_period; ++s) {
            const double t = t_j + static_cast<double>(s) * step;
            traj.controls.push_back(u_of(t));
            const Vec k1 = rhs(t, x);
            const Vec k2 = rhs(t + 0.5 * step, x + 0.5 * step * k1);
            const Vec k3 = rhs(t + 0.5 * step, x + 0.5 * step * k2);
            const Vec k4 = rhs(t + step, x + step * k3);
            x = x + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            const double t_next = t + step;
            if (!x.allFinite()) {
                traj.status = RunStatus::NonFiniteHalt;
                traj.stop_time = t_next;
                traj.message = "state became non-finite at t = " + std::to_string(t_next);
                return traj;
            }
            traj.times.push_back(t_next);
            traj.states.push_back(x);
            if (!system.domain.contains(x)) {
                traj.status = RunStatus::DomainExit;
                traj.stop_time = t_next;
                traj.message = "trajectory left the domain at t = " + std::to_string(t_next);
                return traj;
            }
        }
    }
    traj.period_marks.push_back(traj.times.size() - 1);
    // Control row for the final node, for CSV completeness.
    try {
        traj.controls.push_back(control_value(system, spec, config, traj.times.back(), x));
    } catch (const RankDeficient&) {
        traj.controls.push_back(Vec::Zero(system.num_controls()));
    }
    traj.stop_time = traj.times.back();
    return traj;
}

/// Same closed loop with the feedback's state argument evaluated
/// continuously, u(t, x(t)), i.e. a fresh coefficient solve at every
/// integrator stage. This is the idealized (non-sampled) closed loop; the
/// pi_eps integrator above is the sampled-data object the convergence
/// theory is stated for.
inline Trajectory integrate_continuous(const ControlAffineSystem& system, const RankSpec& spec,
                                       const ControllerConfig& config, const Vec& x0,
                                       double horizon, double step_request = 0.0) {
    config.validate();
    config.frequencies.validate(spec);
    system.check_point(x0);
    const double eps = config.epsilon;
    const int kappa_max = config.frequencies.max_frequency();

    Trajectory traj;
    traj.epsilon = eps;
    const long periods = static_cast<long>(std::floor(horizon / eps + 1e-9));
    traj.horizon_truncated = std::abs(periods * eps - horizon) > 1e-9 * std::max(1.0, horizon);
    if (periods < 1) throw ConfigError("horizon shorter than one period");

    double step = step_request > 0.0 ? step_request : eps / (200.0 * kappa_max);
    step = std::min(step, eps / (100.0 * kappa_max));
    const long steps_per_period = static_cast<long>(std::ceil(eps / step - 1e-12));
    step = eps / static_cast<double>(steps_per_period);
    traj.step = step;

    auto rhs = [&](double t, const Vec& y) {
        const Vec a = solve_coefficients(system, spec, config, y);
        const Vec u = control_from_coefficients(spec, config.frequencies, eps, a, t,
                                                system.num_controls());
        Vec dy = system.drift.eval(y);
        for (int k = 0; k < system.num_controls(); ++k)
            dy += u[k] * system.controlled[static_cast<size_t>(k)].eval(y);
        return dy;
    };

    Vec x = x0;
    traj.times.push_back(0.0);
    traj.states.push_back(x);
    for (long j = 0; j < periods; ++j) {
        traj.period_marks.push_back(traj.times.size() - 1);
        const double t_j = static_cast<double>(j) * eps;
        for (long s = 0; s < steps_per_period; ++s) {
            const double t = t_j + static_cast<double>(s) * step;
            try {
                const Vec a = solve_coefficients(system, spec, config, x);
                traj.controls.push_back(control_from_coefficients(spec, config.frequencies, eps, a,
                                                                  t, system.num_controls()));
                const Vec k1 = rhs(t, x);
                const Vec k2 = rhs(t + 0.5 * step, x + 0.5 * step * k1);
                const Vec k3 = rhs(t + 0.5 * step, x + 0.5 * step * k2);
                const Vec k4 = rhs(t + step, x + step * k3);
                x = x + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            } catch (const RankDeficient& e) {
                traj.status = RunStatus::RankDeficientHalt;
                traj.stop_time = t;
                traj.message = e.what();
                return traj;
            } catch (const DomainViolation& e) {
                traj.status = RunStatus::DomainExit;
                traj.stop_time = t;
                traj.message = e.what();
                return traj;
            }
            const double t_next = t + step;
            if (!x.allFinite()) {
                traj.status = RunStatus::NonFiniteHalt;
                traj.stop_time = t_next;
                traj.message = "state became non-finite at t = " + std::to_string(t_next);
                return traj;
            }
            traj.times.push_back(t_next);
            traj.states.push_back(x);
            if (!system.domain.contains(x)) {
                traj.status = RunStatus::DomainExit;
                traj.stop_time = t_next;
                traj.message = "trajectory left the domain at t = " + std::to_string(t_next);
                return traj;
            }
        }
    }
    traj.period_marks.push_back(traj.times.size() - 1);
    try {
        traj.controls.push_back(control_value(system, spec, config, traj.times.back(), x));
    } catch (const RankDeficient&) {
        traj.controls.push_back(Vec::Zero(system.num_controls()));
    }
    traj.stop_time = traj.times.back();
    return traj;
}

/// States at the period boundaries t_j = eps j, in order.
inline std::vector<std::pair<double, Vec>> period_samples(const Trajectory& traj) {
    if (traj.times.empty()) throw ConfigError("period_samples: empty trajectory");
    std::vector<std::pair<double, Vec>> out;
    out.reserve(traj.period_marks.size());
    for (size_t idx : traj.period_marks)
        out.emplace_back(traj.times[idx], traj.states[idx]);
    return out;
}

/// The diagnostic series (t, (1/t) ln ||x(t)||) for t > t_min, with the mean
/// over the final quartile of the horizon as rate estimate.
inline DecaySeries decay_rate(const Trajectory& traj, double t_min) {
    DecaySeries out;
    const double t_end = traj.times.back();
    for (size_t k = 0; k < traj.times.size(); ++k) {
        const double t = traj.times[k];
        if (t <= t_min) continue;
        const double nx = traj.states[k].norm();
        if (nx <= 0.0 || !std::isfinite(std::log(nx))) {
            out.converged_exactly = true;
            continue;
        }
        out.times.push_back(t);
        out.values.push_back(std::log(nx) / t);
    }
    if (out.times.empty()) {
        if (out.converged_exactly) return out;
        throw ZeroState("decay_rate: no usable samples beyond t_min");
    }
    double sum = 0.0;
    size_t count = 0;
    const double q_start = 0.75 * t_end;
    for (size_t k = 0; k < out.times.size(); ++k)
        if (out.times[k] >= q_start) {
            sum += out.values[k];
            ++count;
        }
    out.rate_estimate = count > 0 ? sum / static_cast<double>(count) : out.values.back();
    return out;
}

}  // namespace oscstab
