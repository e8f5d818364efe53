#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "oscstab/simulator.hpp"
#include "oscstab/synthesis.hpp"

namespace oscstab {

using Signal = std::function<double(double)>;

namespace detail {

// Cumulative integral of sampled values on a uniform grid, one quadratic
// interpolant per step (cumulative-Simpson flavor).
inline std::vector<double> cumulative_quadratic(const std::vector<double>& y, double h) {
    const size_t n = y.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    if (n == 2) {
        out[1] = 0.5 * h * (y[0] + y[1]);
        return out;
    }
    out[1] = (h / 12.0) * (5.0 * y[0] + 8.0 * y[1] - y[2]);
    for (size_t k = 1; k + 1 < n; ++k)
        out[k + 1] = out[k] + (h / 12.0) * (-y[k - 1] + 8.0 * y[k] + 5.0 * y[k + 1]);
    return out;
}

// L_{u} v evaluated at x, choosing the widened step when v's Jacobian has
// to be finite-differenced on a derived field.
inline Vec lie_apply(const VectorField& u, const VectorField& v, const Vec& x) {
    const Mat j = v.has_jacobian() ? v.jacobian(x) : jacobian_at(v, x, fd_step_nested(x));
    return j * u.eval(x);
}

// L_{outer} L_{inner} base (x).
inline Vec lie2(const VectorField& outer, const VectorField& inner, const VectorField& base,
                const Vec& x) {
    return lie_apply(outer, lie_derivative_field(inner, base), x);
}

}  // namespace detail

/// The control signals t |-> u^eps(t, x0) with coefficients frozen at x0,
/// one callable per control channel. These are the w_k of the closed-loop
/// Chen-Fliess expansion (the drift slot w_0 == 1 is added internally by
/// chen_fliess_truncated).
inline std::vector<Signal> controller_signals(const ControlAffineSystem& system,
                                              const RankSpec& spec, const ControllerConfig& config,
                                              const Vec& x0) {
    config.frequencies.validate(spec);
    const Vec a = solve_coefficients(system, spec, config, x0);
    const FrequencyAssignment freqs = config.frequencies;
    const double eps = config.epsilon;
    const int m = system.num_controls();
    std::vector<Signal> out;
    for (int k = 0; k < m; ++k)
        out.push_back([spec, freqs, eps, a, m, k](double t) {
            return control_from_coefficients(spec, freqs, eps, a, t, m)[k];
        });
    return out;
}

/// Truncated Chen-Fliess series: x0 plus, for every multi-index of length
/// <= nu over {0..m} (index 0 is the drift with w_0 == 1), the iterated
/// directional derivative at x0 times the iterated integral of the signals,
/// computed by composite quadrature on a uniform grid.
inline Vec chen_fliess_truncated(const ControlAffineSystem& system,
                                 const std::vector<Signal>& control_signals, int nu, double t,
                                 const Vec& x0, int panels = 4096) {
    if (nu < 1) throw ConfigError("chen_fliess_truncated: nu must be >= 1");
    if (nu > 3)
        throw QuadratureBudgetExceeded("chen_fliess_truncated: nu capped at 3");
    if (static_cast<int>(control_signals.size()) != system.num_controls())
        throw DimensionMismatch("signal count does not match the number of controls");
    system.check_point(x0);

    const int ell = system.num_controls() + 1;  // drift included as index 0
    const int n_nodes = panels + 1;
    const double h = t / static_cast<double>(panels);

    // Signal samples on the grid, drift slot first.
    std::vector<std::vector<double>> w(static_cast<size_t>(ell),
                                       std::vector<double>(static_cast<size_t>(n_nodes)));
    for (int k = 0; k < n_nodes; ++k) w[0][static_cast<size_t>(k)] = 1.0;
    for (int j = 1; j < ell; ++j)
        for (int k = 0; k < n_nodes; ++k)
            w[static_cast<size_t>(j)][static_cast<size_t>(k)] =
                control_signals[static_cast<size_t>(j - 1)](h * k);

    Vec acc = x0;
    std::vector<int> idx;
    for (int depth = 1; depth <= nu; ++depth) {
        idx.assign(static_cast<size_t>(depth), 0);
        while (true) {
            // Iterated integral: innermost factor is w_{j_depth}.
            std::vector<double> cum = detail::cumulative_quadratic(w[static_cast<size_t>(idx.back())], h);
            for (int level = depth - 2; level >= 0; --level) {
                std::vector<double> integrand(static_cast<size_t>(n_nodes));
                const auto& wl = w[static_cast<size_t>(idx[static_cast<size_t>(level)])];
                for (int k = 0; k < n_nodes; ++k)
                    integrand[static_cast<size_t>(k)] = wl[static_cast<size_t>(k)] * cum[static_cast<size_t>(k)];
                cum = detail::cumulative_quadratic(integrand, h);
            }
            const double integral = cum.back();

            if (std::abs(integral) > 1e-300) {
                // Iterated derivative L_{f_{j_depth}} ... L_{f_{j_2}} f_{j_1}(x0).
                Vec deriv;
                if (depth == 1) {
                    deriv = system.field(idx[0]).eval(x0);
                } else {
                    VectorField g = system.field(idx[0]);
                    for (int level = 1; level + 1 < depth; ++level)
                        g = lie_derivative_field(system.field(idx[static_cast<size_t>(level)]), g);
                    deriv = detail::lie_apply(system.field(idx[static_cast<size_t>(depth - 1)]), g, x0);
                }
                acc += deriv * integral;
            }

            size_t pos = 0;
            for (; pos < idx.size(); ++pos) {
                if (idx[pos] < ell - 1) {
                    ++idx[pos];
                    break;
                }
                idx[pos] = 0;
            }
            if (pos == idx.size()) break;
        }
    }
    return acc;
}

struct OmegaResult {
    Vec total;
    std::vector<std::pair<std::string, Vec>> breakdown;  // sums to total exactly

    void add(const std::string& label, const Vec& term) {
        breakdown.emplace_back(label, term);
        total += term;
    }
};

/// zeta_{k l1 l2} = delta_{k l1} + delta_{k l2} sign(a_{l1 l2 0}).
inline double zeta_factor(int k, int l1, int l2, double a_l1l20) {
    return (k == l1 ? 1.0 : 0.0) + (k == l2 ? sign0(a_l1l20) : 0.0);
}

/// The full zeta table over control channels and S20 pairs.
struct SignFactor {
    std::map<std::array<int, 3>, double> zeta;  // key (k, l1, l2)
};

inline SignFactor sign_factor(const ControlAffineSystem& system, const RankSpec& spec,
                              const Vec& a) {
    SignFactor sf;
    int p = spec.offset_s20();
    for (auto& [l1, l2] : spec.s20) {
        const double av = a[p++];
        for (int k = 1; k <= system.num_controls(); ++k)
            sf.zeta[{k, l1, l2}] = zeta_factor(k, l1, l2, av);
    }
    return sf;
}

/// Closed-form one-period correction for the S1/S10 controller family.
inline OmegaResult omega1(const ControlAffineSystem& system, const RankSpec& spec,
                          const ControllerConfig& config, const Vec& x0) {
    if (!spec.case_a())
        throw UnsupportedSpec("omega1 requires S2 = S3 = S20 = {}");
    const Vec a = solve_coefficients(system, spec, config, x0);
    const double eps = config.epsilon;
    const VectorField& f0 = system.drift;

    OmegaResult out;
    out.total = Vec::Zero(system.dim);

    Vec brackets = Vec::Zero(system.dim);
    {
        int pl = spec.offset_s10();
        for (int l : spec.s10) {
            const double al0 = a[pl++];
            int ps = spec.offset_s1();
            for (int i : spec.s1) {
                const double ai = a[ps++];
                brackets += ai * al0 * lie_bracket(system.field(l), system.field(i), x0);
            }
        }
    }
    out.add("eps * sum a_i a_l0 [f_l, f_i]", eps * brackets);

    Vec drift_block = directional_derivative(f0, f0, x0);  // L_f0 f0
    {
        int ps = spec.offset_s1();
        for (int i : spec.s1) {
            const double ai = a[ps++];
            drift_block += ai * (directional_derivative(system.field(i), f0, x0) +
                                 directional_derivative(f0, system.field(i), x0));
        }
        int p1 = spec.offset_s1();
        for (int i1 : spec.s1) {
            const double a1 = a[p1++];
            int p2 = spec.offset_s1();
            for (int i2 : spec.s1) {
                const double a2 = a[p2++];
                drift_block += a1 * a2 * directional_derivative(system.field(i2), system.field(i1), x0);
            }
        }
    }
    out.add("eps^2/2 * drift block", (eps * eps / 2.0) * drift_block);
    return out;
}

/// Closed-form one-period correction for the S1/S20 controller family.
inline OmegaResult omega2(const ControlAffineSystem& system, const RankSpec& spec,
                          const ControllerConfig& config, const Vec& x0) {
    using std::numbers::pi;
    if (!spec.case_b())
        throw UnsupportedSpec("omega2 requires S2 = S3 = S10 = {}");
    config.frequencies.validate(spec);
    const Vec a = solve_coefficients(system, spec, config, x0);
    const double eps = config.epsilon;
    const VectorField& f0 = system.drift;
    const int m = system.num_controls();

    auto a_s1 = [&](int pos) { return a[spec.offset_s1() + pos]; };
    auto a_s20 = [&](int pos) { return a[spec.offset_s20() + pos]; };

    OmegaResult out;
    out.total = Vec::Zero(system.dim);

    // eps block 1: same-pair double brackets with the drift.
    Vec b1 = Vec::Zero(system.dim);
    for (size_t q = 0; q < spec.s20.size(); ++q) {
        const auto [l1, l2] = spec.s20[q];
        const double av = a_s20(static_cast<int>(q));
        b1 += std::abs(av) * (nested_bracket(system.field(l1), system.field(l1), f0, x0) +
                              nested_bracket(system.field(l2), system.field(l2), f0, x0));
    }
    out.add("eps * same-pair [f_l,[f_l,f0]] block", eps * b1);

    // eps block 2: cross-frequency coupling between distinct S20 pairs.
    Vec b2 = Vec::Zero(system.dim);
    for (size_t ql = 0; ql < spec.s20.size(); ++ql) {
        const auto [l1, l2] = spec.s20[ql];
        const double al = a_s20(static_cast<int>(ql));
        const int kl = config.frequencies.s20.at(spec.s20[ql]);
        for (size_t qj = 0; qj < spec.s20.size(); ++qj) {
            if (ql == qj) continue;
            const double aj = a_s20(static_cast<int>(qj));
            const auto [j1, j2] = spec.s20[qj];
            const int kj = config.frequencies.s20.at(spec.s20[qj]);
            if (kj * kj == kl * kl)
                throw ConfigError("omega2: coinciding S20 frequencies");
            double zsum = 0.0;
            for (int k1 = 1; k1 <= m; ++k1)
                for (int k2 = 1; k2 <= m; ++k2)
                    zsum += zeta_factor(k1, l1, l2, al) * zeta_factor(k2, j1, j2, aj);
            Vec inner = nested_bracket(f0, system.field(l1), system.field(l2), x0);
            int ps = spec.offset_s1();
            for (int i : spec.s1)
                inner += a[ps++] * nested_bracket(system.field(i), system.field(l1),
                                                  system.field(l2), x0);
            const double freq_factor = static_cast<double>(kl) * kj /
                                       (static_cast<double>(kj) * kj - static_cast<double>(kl) * kl);
            b2 += 4.0 * zsum * freq_factor * std::sqrt(std::abs(al) * std::abs(aj)) * inner;
        }
    }
    out.add("eps * cross-pair block", eps * b2);

    // eps block 3: couplings between S1 coefficients and S20 pairs.
    Vec b3 = Vec::Zero(system.dim);
    {
        int ps = spec.offset_s1();
        for (int i : spec.s1) {
            const double ai = a[ps++];
            for (size_t q = 0; q < spec.s20.size(); ++q) {
                const auto [l1, l2] = spec.s20[q];
                const double av = a_s20(static_cast<int>(q));
                Vec term = nested_bracket(system.field(l1), system.field(l1), system.field(i), x0) +
                           nested_bracket(system.field(l2), system.field(l2), system.field(i), x0) +
                           sign0(av) *
                               (nested_bracket(system.field(l1), system.field(l2), system.field(i), x0) +
                                nested_bracket(system.field(l2), system.field(l1), system.field(i), x0));
                b3 += ai * std::abs(av) * term;
            }
        }
    }
    out.add("eps * S1-S20 coupling block", eps * b3);

    // eps^2/2 block: second-order drift/coefficient terms.
    Vec b4 = directional_derivative(f0, f0, x0);
    {
        int ps = spec.offset_s1();
        for (int i : spec.s1) {
            const double ai = a[ps++];
            b4 += ai * (directional_derivative(system.field(i), f0, x0) +
                        directional_derivative(f0, system.field(i), x0));
        }
        int p1 = spec.offset_s1();
        for (int i1 : spec.s1) {
            const double a1 = a[p1++];
            int p2 = spec.offset_s1();
            for (int i2 : spec.s1) {
                const double a2 = a[p2++];
                b4 += a1 * a2 * directional_derivative(system.field(i2), system.field(i1), x0);
            }
        }
    }
    out.add("eps^2/2 * drift block", (eps * eps / 2.0) * b4);

    // eps^2/pi block: oscillation-drift interaction.
    Vec b5 = Vec::Zero(system.dim);
    for (int k = 1; k <= m; ++k) {
        Vec inner = nested_bracket(f0, f0, system.field(k), x0);
        {
            int ps = spec.offset_s1();
            for (int i : spec.s1) {
                const double ai = a[ps++];
                inner += ai * (nested_bracket(f0, system.field(i), system.field(k), x0) +
                               nested_bracket(system.field(i), f0, system.field(k), x0));
            }
            int p1 = spec.offset_s1();
            for (int i1 : spec.s1) {
                const double a1 = a[p1++];
                int p2 = spec.offset_s1();
                for (int i2 : spec.s1) {
                    const double a2 = a[p2++];
                    inner += a1 * a2 *
                             nested_bracket(system.field(i1), system.field(i2), system.field(k), x0);
                }
            }
        }
        for (size_t q = 0; q < spec.s20.size(); ++q) {
            const auto [l1, l2] = spec.s20[q];
            const double av = a_s20(static_cast<int>(q));
            const int kappa = config.frequencies.s20.at(spec.s20[q]);
            b5 += zeta_factor(k, l1, l2, av) * std::sqrt(std::abs(av)) / kappa * inner;
        }
    }
    out.add("eps^2/pi * oscillation-drift block", (eps * eps / pi) * b5);

    // eps^3/6 block: third-order drift/coefficient terms.
    Vec b6 = detail::lie2(f0, f0, f0, x0);
    {
        int ps = spec.offset_s1();
        for (int i : spec.s1) {
            const double ai = a[ps++];
            const VectorField& fi = system.field(i);
            b6 += ai * (detail::lie2(f0, f0, fi, x0) + detail::lie2(f0, fi, f0, x0) +
                        detail::lie2(fi, f0, f0, x0));
        }
        int p1 = spec.offset_s1();
        for (int i1 : spec.s1) {
            const double a1 = a[p1++];
            const VectorField& fi1 = system.field(i1);
            int p2 = spec.offset_s1();
            for (int i2 : spec.s1) {
                const double a2 = a[p2++];
                const VectorField& fi2 = system.field(i2);
                b6 += a1 * a2 * (detail::lie2(f0, fi1, fi2, x0) + detail::lie2(fi1, f0, fi2, x0) +
                                 detail::lie2(fi1, fi2, f0, x0));
                int p3 = spec.offset_s1();
                for (int i3 : spec.s1) {
                    const double a3 = a[p3++];
                    b6 += a1 * a2 * a3 * detail::lie2(fi1, fi2, system.field(i3), x0);
                }
            }
        }
    }
    out.add("eps^3/6 * third-order drift block", (eps * eps * eps / 6.0) * b6);
    return out;
}

/// One-period prediction x0 - gamma eps grad V(x0) + Omega(x0, eps).
struct PeriodMapPrediction {
    Vec x0;
    double epsilon = 0.0;
    Vec predicted;
    Vec gradient_term;
    Vec omega_term;
    std::vector<std::pair<std::string, Vec>> breakdown;
};

inline PeriodMapPrediction predict_period_map(const ControlAffineSystem& system,
                                              const RankSpec& spec, const ControllerConfig& config,
                                              const Vec& x0) {
    PeriodMapPrediction p;
    p.x0 = x0;
    p.epsilon = config.epsilon;
    p.gradient_term = -config.gamma * config.epsilon * config.grad_v(x0);
    OmegaResult omega;
    if (spec.case_a())
        omega = omega1(system, spec, config, x0);
    else if (spec.case_b())
        omega = omega2(system, spec, config, x0);
    else
        throw UnsupportedSpec(
            "no closed-form one-period prediction for the combined controller family");
    p.omega_term = omega.total;
    p.breakdown = std::move(omega.breakdown);
    p.predicted = p.x0 + p.gradient_term + p.omega_term;
    return p;
}

struct RemainderOrderResult {
    double order = 0.0;
    double r_squared = 1.0;
    bool exact = false;  // all errors at floating-noise level
    std::vector<std::pair<double, double>> samples;  // (eps, error)
};

/// Measures ||simulated x(eps) - predicted|| over a decreasing list of
/// periods and fits the power law e(eps) ~ C eps^p by least squares.
inline RemainderOrderResult remainder_order(const ControlAffineSystem& system, const RankSpec& spec,
                                            const ControllerConfig& config, const Vec& x0,
                                            const std::vector<double>& eps_list,
                                            int max_threads = 1) {
    if (eps_list.size() < 3)
        throw ConfigError("remainder_order: need at least 3 period values");
    for (size_t k = 1; k < eps_list.size(); ++k)
        if (eps_list[k] >= eps_list[k - 1])
            throw ConfigError("remainder_order: period list must be strictly decreasing");

    // The per-epsilon runs are independent; system/spec/config are immutable
    // shared inputs, so they may execute concurrently.
    std::vector<double> errors(eps_list.size(), 0.0);
    std::vector<std::string> failures(eps_list.size());
    auto run_one = [&](size_t idx) {
        try {
            ControllerConfig c = config;
            c.epsilon = eps_list[idx];
            const PeriodMapPrediction pred = predict_period_map(system, spec, c, x0);
            const int kappa_max = c.frequencies.max_frequency();
            Trajectory traj = integrate_pi_epsilon(system, spec, c, x0, c.epsilon,
                                                   c.epsilon / (2000.0 * kappa_max));
            if (traj.status != RunStatus::Completed)
                throw NonFinite("one-period simulation failed (" + traj.message + ")");
            errors[idx] = (traj.final_state() - pred.predicted).norm();
        } catch (const Error& e) {
            failures[idx] = e.what();
        }
    };
    const int workers =
        std::max(1, std::min<int>(max_threads, static_cast<int>(eps_list.size())));
    if (workers == 1) {
        for (size_t idx = 0; idx < eps_list.size(); ++idx) run_one(idx);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (size_t idx = next.fetch_add(1); idx < eps_list.size();
                     idx = next.fetch_add(1))
                    run_one(idx);
            });
        for (auto& th : pool) th.join();
    }
    for (size_t idx = 0; idx < eps_list.size(); ++idx)
        if (!failures[idx].empty())
            throw NonFinite("remainder_order: " + failures[idx]);

    RemainderOrderResult out;
    for (size_t idx = 0; idx < eps_list.size(); ++idx)
        out.samples.emplace_back(eps_list[idx], errors[idx]);

    double max_err = 0.0;
    for (auto& [eps, e] : out.samples) max_err = std::max(max_err, e);
    if (max_err < 1e-11) {
        out.exact = true;
        out.order = std::numeric_limits<double>::infinity();
        return out;
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    const double n = static_cast<double>(out.samples.size());
    for (auto& [eps, e] : out.samples) {
        const double lx = std::log(eps), ly = std::log(std::max(e, 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        syy += ly * ly;
    }
    out.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double denom = (n * sxx - sx * sx) * (n * syy - sy * sy);
    out.r_squared = denom > 0 ? (n * sxy - sx * sy) * (n * sxy - sx * sy) / denom : 1.0;
    return out;
}

}  // namespace oscstab
