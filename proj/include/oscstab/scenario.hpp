#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oscstab/benchmarks.hpp"
#include "oscstab/chen_fliess.hpp"
#include "oscstab/errors.hpp"
#include "oscstab/simulator.hpp"

namespace oscstab {

enum class FeedbackMode { PiEpsilon, Continuous };

inline const char* to_string(FeedbackMode m) {
    return m == FeedbackMode::PiEpsilon ? "pi_epsilon" : "continuous";
}

/// Declarative description of one closed-loop experiment: a named benchmark,
/// parameter overrides, an initial state, and diagnostics toggles.  Parsed
/// from a flat key = value file; every diagnostic is reproducible from the
/// file alone.
struct Scenario {
    std::string benchmark;
    Vec x0;  // empty => benchmark's first reference state

    std::optional<double> gamma;
    std::optional<double> epsilon;
    std::optional<std::array<double, 3>> alpha;  // euler only
    std::optional<double> omega;                 // underwater only
    std::map<std::string, int> kappa_overrides;  // e.g. "s10_1", "s2_1_3", "s20_1_2"

    double horizon = 50.0;
    double step = 0.0;  // 0 => integrator default
    FeedbackMode mode = FeedbackMode::PiEpsilon;

    bool diag_decay = true;
    bool diag_period_map = false;
    bool diag_assumptions = true;
    double decay_t_min = 0.0;

    std::string label = "scenario";
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double parse_real(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("scenario field '" + key + "': cannot parse real from '" + value + "'");
    }
}

// Comma- and/or whitespace-separated list of reals.
inline std::vector<double> parse_reals(const std::string& key, const std::string& value) {
    std::string spaced = value;
    for (char& c : spaced)
        if (c == ',') c = ' ';
    std::istringstream in(spaced);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_real(key, tok));
    if (out.empty())
        throw ConfigError("scenario field '" + key + "': expected a list of reals");
    return out;
}

inline bool parse_flag(const std::string& key, const std::string& value) {
    if (value == "on" || value == "true" || value == "1") return true;
    if (value == "off" || value == "false" || value == "0") return false;
    throw ConfigError("scenario field '" + key + "': expected on/off, got '" + value + "'");
}

inline void format_real(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    Scenario sc;
    sc.label = std::filesystem::path(path).stem().string();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("scenario line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key == "benchmark") {
            sc.benchmark = value;
        } else if (key == "x0") {
            const auto vals = detail::parse_reals(key, value);
            sc.x0 = Vec::Map(vals.data(), static_cast<Eigen::Index>(vals.size()));
        } else if (key == "gamma") {
            sc.gamma = detail::parse_real(key, value);
        } else if (key == "epsilon") {
            sc.epsilon = detail::parse_real(key, value);
        } else if (key == "alpha") {
            const auto vals = detail::parse_reals(key, value);
            if (vals.size() != 3)
                throw ConfigError("scenario field 'alpha': expected 3 reals");
            sc.alpha = std::array<double, 3>{vals[0], vals[1], vals[2]};
        } else if (key == "omega") {
            sc.omega = detail::parse_real(key, value);
        } else if (key.rfind("kappa_", 0) == 0) {
            const double v = detail::parse_real(key, value);
            if (v <= 0.0 || v != std::floor(v))
                throw ConfigError("scenario field '" + key + "': frequencies are positive integers");
            sc.kappa_overrides[key.substr(6)] = static_cast<int>(v);
        } else if (key == "horizon") {
            sc.horizon = detail::parse_real(key, value);
        } else if (key == "step") {
            sc.step = detail::parse_real(key, value);
        } else if (key == "mode") {
            if (value == "pi_epsilon") sc.mode = FeedbackMode::PiEpsilon;
            else if (value == "continuous") sc.mode = FeedbackMode::Continuous;
            else throw ConfigError("scenario field 'mode': expected pi_epsilon or continuous");
        } else if (key == "decay_rate") {
            sc.diag_decay = detail::parse_flag(key, value);
        } else if (key == "period_map") {
            sc.diag_period_map = detail::parse_flag(key, value);
        } else if (key == "assumptions") {
            sc.diag_assumptions = detail::parse_flag(key, value);
        } else if (key == "decay_t_min") {
            sc.decay_t_min = detail::parse_real(key, value);
        } else {
            throw ConfigError("scenario field '" + key + "' is not recognized");
        }
    }
    if (sc.benchmark.empty()) throw ConfigError("scenario field 'benchmark' is required");
    if (sc.horizon <= 0.0) throw ConfigError("scenario field 'horizon' must be positive");
    return sc;
}

/// Instantiates the benchmark with the scenario's overrides applied.
inline Benchmark instantiate(const Scenario& sc) {
    Benchmark bench;
    if (sc.benchmark == "euler") {
        if (sc.omega) throw ConfigError("scenario field 'omega' does not apply to benchmark 'euler'");
        bench = sc.alpha ? make_euler((*sc.alpha)[0], (*sc.alpha)[1], (*sc.alpha)[2]) : make_euler();
    } else if (sc.benchmark == "underwater") {
        if (sc.alpha)
            throw ConfigError("scenario field 'alpha' does not apply to benchmark 'underwater'");
        bench = sc.omega ? make_underwater(*sc.omega) : make_underwater();
    } else if (sc.benchmark == "brockett") {
        if (sc.alpha || sc.omega)
            throw ConfigError("scenario fields 'alpha'/'omega' do not apply to benchmark 'brockett'");
        bench = make_brockett();
    } else {
        throw ConfigError("scenario field 'benchmark': unknown benchmark '" + sc.benchmark + "'");
    }
    if (sc.gamma) bench.default_config.gamma = *sc.gamma;
    if (sc.epsilon) bench.default_config.epsilon = *sc.epsilon;
    for (auto& [key, kappa] : sc.kappa_overrides) {
        // key shapes: s10_<l>, s2_<i1>_<i2>, s20_<l1>_<l2>, s3_<j1>_<j2>_<j3>
        std::vector<int> parts;
        std::string set;
        {
            std::istringstream in(key);
            std::string tok;
            bool first = true;
            while (std::getline(in, tok, '_')) {
                if (first) { set = tok; first = false; }
                else parts.push_back(std::stoi(tok));
            }
        }
        auto& fa = bench.default_config.frequencies;
        if (set == "s10" && parts.size() == 1 &&
            std::count(bench.spec.s10.begin(), bench.spec.s10.end(), parts[0])) {
            fa.s10[parts[0]] = kappa;
        } else if (set == "s2" && parts.size() == 2 &&
                   std::count(bench.spec.s2.begin(), bench.spec.s2.end(),
                              std::array<int, 2>{parts[0], parts[1]})) {
            fa.s2[{parts[0], parts[1]}] = kappa;
        } else if (set == "s20" && parts.size() == 2 &&
                   std::count(bench.spec.s20.begin(), bench.spec.s20.end(),
                              std::array<int, 2>{parts[0], parts[1]})) {
            fa.s20[{parts[0], parts[1]}] = kappa;
        } else {
            throw ConfigError("scenario field 'kappa_" + key +
                              "' does not match an index set entry of benchmark '" + sc.benchmark +
                              "'");
        }
        fa.validate(bench.spec);
    }
    return bench;
}

inline Vec scenario_initial_state(const Scenario& sc, const Benchmark& bench) {
    if (sc.x0.size() == 0) {
        if (bench.reference_initial_states.empty())
            throw ConfigError("scenario field 'x0' is required for benchmark '" + sc.benchmark + "'");
        return bench.reference_initial_states.front();
    }
    if (sc.x0.size() != bench.system.dim)
        throw ConfigError("scenario field 'x0': expected " + std::to_string(bench.system.dim) +
                          " components, got " + std::to_string(sc.x0.size()));
    return sc.x0;
}

/// CSV contract: header t, x1..xn, u1..um, norm_x, V, period_start; one row
/// per integration step; 17 significant digits (round-trip exact doubles).
inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    const int n = static_cast<int>(traj.states.front().size());
    const int m = static_cast<int>(traj.controls.front().size());
    std::string out;
    out.reserve(traj.times.size() * (24 * static_cast<size_t>(n + m + 2) + 8));
    out += "t";
    for (int i = 1; i <= n; ++i) out += ",x" + std::to_string(i);
    for (int k = 1; k <= m; ++k) out += ",u" + std::to_string(k);
    out += ",norm_x,V,period_start\n";
    std::vector<char> is_mark(traj.times.size(), 0);
    for (size_t idx : traj.period_marks)
        if (idx < is_mark.size()) is_mark[idx] = 1;
    for (size_t r = 0; r < traj.times.size(); ++r) {
        detail::format_real(out, traj.times[r]);
        for (int i = 0; i < n; ++i) {
            out += ',';
            detail::format_real(out, traj.states[r][i]);
        }
        for (int k = 0; k < m; ++k) {
            out += ',';
            detail::format_real(out, traj.controls[r][k]);
        }
        const double nx = traj.states[r].norm();
        out += ',';
        detail::format_real(out, nx);
        out += ',';
        detail::format_real(out, 0.5 * nx * nx);
        out += is_mark[r] ? ",1\n" : ",0\n";
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open output file '" + path + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

struct ScenarioResult {
    int exit_code = 0;  // 0 success, 2 config error, 3 runtime failure
    std::string message;
    std::string csv_path;
    std::string report_path;
    Trajectory trajectory;
};

namespace detail {

inline void report_line(std::string& out, const std::string& key, const std::string& v) {
    out += key + " = " + v + "\n";
}

inline void report_line(std::string& out, const std::string& key, double v) {
    out += key + " = ";
    format_real(out, v);
    out += "\n";
}

inline void append_assumption_report(std::string& out, const AssumptionReport& rep) {
    report_line(out, "a1_holds", rep.a1_holds ? "true" : "false");
    report_line(out, "a1_residual_f0", rep.a1_residual_f0);
    report_line(out, "a1_residual_lf0f0", rep.a1_residual_lf0f0);
    report_line(out, "a2_holds", rep.a2_holds ? "true" : "false");
    report_line(out, "f_inverse_bound", rep.f_inverse_bound);
    int idx = 0;
    for (auto& c : rep.a2_conditions) {
        const std::string p = "a2_condition_" + std::to_string(idx++);
        report_line(out, p + "_label", c.label);
        report_line(out, p + "_holds", c.holds ? "true" : "false");
        if (c.is_residual)
            report_line(out, p + "_residual_at_zero", c.residual_at_zero);
        else if (c.identically_zero)
            report_line(out, p + "_identically_zero", "true");
        else
            report_line(out, p + "_mu_estimate", c.mu_estimate);
    }
}

}  // namespace detail

/// Runs a scenario end-to-end: synthesis + simulation + diagnostics, CSV and
/// key = value report files in out_dir.  Exit code 0 on success, 2 on config
/// errors, 3 on runtime failures (domain exit / rank loss / non-finite state).
inline ScenarioResult run_scenario(const std::string& path, const std::string& out_dir = ".") {
    ScenarioResult res;
    Scenario sc;
    Benchmark bench;
    Vec x0;
    try {
        sc = parse_scenario(path);
        bench = instantiate(sc);
        x0 = scenario_initial_state(sc, bench);
    } catch (const Error& e) {
        res.exit_code = 2;
        res.message = e.what();
        return res;
    }

    std::string report;
    detail::report_line(report, "scenario", sc.label);
    detail::report_line(report, "benchmark", sc.benchmark);
    detail::report_line(report, "mode", to_string(sc.mode));
    detail::report_line(report, "gamma", bench.default_config.gamma);
    detail::report_line(report, "epsilon", bench.default_config.epsilon);
    detail::report_line(report, "horizon", sc.horizon);

    try {
        res.trajectory =
            sc.mode == FeedbackMode::PiEpsilon
                ? integrate_pi_epsilon(bench.system, bench.spec, bench.default_config, x0,
                                       sc.horizon, sc.step)
                : integrate_continuous(bench.system, bench.spec, bench.default_config, x0,
                                       sc.horizon, sc.step);
    } catch (const Error& e) {
        res.exit_code = 3;
        res.message = std::string("simulation failed before producing a trajectory: ") + e.what();
        return res;
    }
    const Trajectory& traj = res.trajectory;

    detail::report_line(report, "status", to_string(traj.status));
    detail::report_line(report, "stop_time", traj.stop_time);
    detail::report_line(report, "step", traj.step);
    if (traj.horizon_truncated)
        detail::report_line(report, "warning",
                            "horizon truncated down to a whole number of periods");
    if (!traj.message.empty()) detail::report_line(report, "status_detail", traj.message);
    detail::report_line(report, "final_norm", traj.final_state().norm());

    if (sc.diag_decay && traj.status == RunStatus::Completed) {
        try {
            const DecaySeries ds = decay_rate(traj, sc.decay_t_min);
            detail::report_line(report, "rate_estimate", ds.rate_estimate);
            detail::report_line(report, "rate_converged_exactly",
                                ds.converged_exactly ? "true" : "false");
        } catch (const ZeroState&) {
            detail::report_line(report, "rate_estimate", "undefined (state at zero)");
        }
    }
    if (sc.diag_period_map) {
        try {
            auto pm = predict_period_map(bench.system, bench.spec, bench.default_config, x0);
            // compare against the first simulated period boundary
            const auto samples = period_samples(traj);
            if (samples.size() > 1) {
                detail::report_line(report, "period_map_prediction_error",
                                    (samples[1].second - pm.predicted).norm());
            }
        } catch (const UnsupportedSpec& e) {
            detail::report_line(report, "period_map_prediction", std::string("unsupported: ") + e.what());
        }
    }
    if (sc.diag_assumptions) {
        const AssumptionReport rep = verify_assumptions(bench.system, bench.spec);
        detail::append_assumption_report(report, rep);
    }

    std::filesystem::create_directories(out_dir);
    res.csv_path = (std::filesystem::path(out_dir) / (sc.label + ".csv")).string();
    res.report_path = (std::filesystem::path(out_dir) / (sc.label + ".report")).string();
    write_trajectory_csv(traj, res.csv_path);
    {
        std::ofstream f(res.report_path, std::ios::binary);
        if (!f) throw ConfigError("cannot open output file '" + res.report_path + "'");
        f.write(report.data(), static_cast<std::streamsize>(report.size()));
    }

    if (traj.status != RunStatus::Completed) {
        res.exit_code = 3;
        res.message = std::string(to_string(traj.status)) + " at t = " + std::to_string(traj.stop_time);
    }
    return res;
}

struct SweepResult {
    int exit_code = 0;
    std::string message;
    std::string report_path;
    RemainderOrderResult fit;
};

inline int sweep_thread_cap() {
    if (const char* env = std::getenv("OSCSTAB_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// epsilon sweep: one-period prediction error e(eps) and the fitted remainder
/// order, parallelized over the independent per-epsilon simulations.
inline SweepResult sweep_epsilon(const std::string& path, std::vector<double> eps_list,
                                 const std::string& out_dir = ".") {
    SweepResult res;
    Scenario sc;
    Benchmark bench;
    Vec x0;
    try {
        if (eps_list.size() < 3)
            throw ConfigError("sweep requires at least 3 epsilon values");
        sc = parse_scenario(path);
        bench = instantiate(sc);
        x0 = scenario_initial_state(sc, bench);
        if (!bench.spec.case_a() && !bench.spec.case_b())
            throw UnsupportedSpec(
                "sweep requires a period-map prediction; the combined index-set shape has none");
    } catch (const Error& e) {
        res.exit_code = 2;
        res.message = e.what();
        return res;
    }

    std::sort(eps_list.begin(), eps_list.end(), std::greater<double>());
    try {
        res.fit = remainder_order(bench.system, bench.spec, bench.default_config, x0, eps_list,
                                  sweep_thread_cap());
    } catch (const Error& e) {
        res.exit_code = 3;
        res.message = e.what();
        return res;
    }

    std::string report;
    detail::report_line(report, "scenario", sc.label);
    detail::report_line(report, "benchmark", sc.benchmark);
    int idx = 0;
    for (auto& [eps, err] : res.fit.samples) {
        detail::report_line(report, "eps_" + std::to_string(idx), eps);
        detail::report_line(report, "err_" + std::to_string(idx), err);
        ++idx;
    }
    if (res.fit.exact) {
        detail::report_line(report, "order", "exact");
    } else {
        detail::report_line(report, "order", res.fit.order);
        detail::report_line(report, "r_squared", res.fit.r_squared);
    }
    std::filesystem::create_directories(out_dir);
    res.report_path = (std::filesystem::path(out_dir) / (sc.label + ".sweep")).string();
    std::ofstream f(res.report_path, std::ios::binary);
    if (!f) throw ConfigError("cannot open output file '" + res.report_path + "'");
    f.write(report.data(), static_cast<std::streamsize>(report.size()));
    return res;
}

/// Assumption report only (the `check` subcommand).
inline std::string check_scenario(const std::string& path) {
    const Scenario sc = parse_scenario(path);
    const Benchmark bench = instantiate(sc);
    std::string report;
    detail::report_line(report, "scenario", sc.label);
    detail::report_line(report, "benchmark", sc.benchmark);
    detail::append_assumption_report(report, verify_assumptions(bench.system, bench.spec));
    return report;
}

}  // namespace oscstab
