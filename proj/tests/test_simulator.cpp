#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <oscstab/benchmarks.hpp>
#include <oscstab/simulator.hpp>

using namespace oscstab;

namespace {

Vec v3(double a, double b, double c) {
    Vec x(3);
    x << a, b, c;
    return x;
}

// driftless system with orthonormal constant control fields
ControlAffineSystem basis_system(int n) {
    ControlAffineSystem sys;
    sys.dim = n;
    sys.drift = zero_field(n);
    Mat id = Mat::Identity(n, n);
    for (int k = 0; k < n; ++k) sys.controlled.push_back(constant_field(id.col(k)));
    sys.domain = Domain::all(n);
    return sys;
}

}  // namespace

TEST_CASE("zero drift and zero potential gradient hold the state constant") {
    auto sys = basis_system(3);
    RankSpec spec({1, 2, 3}, {}, {}, {}, {});
    ControllerConfig cfg;
    cfg.epsilon = 0.5;
    cfg.potential_gradient = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
    Vec x0 = v3(0.4, -0.2, 1.0);
    auto traj = integrate_pi_epsilon(sys, spec, cfg, x0, 2.0);
    CHECK(traj.status == RunStatus::Completed);
    for (auto& x : traj.states) CHECK((x - x0).norm() < 1e-14);
    for (auto& u : traj.controls) CHECK(u.norm() == 0.0);
}

TEST_CASE("the rigid-body equilibrium stays at zero") {
    auto bench = make_euler(3, 2, 1);
    auto traj = integrate_pi_epsilon(bench.system, bench.spec, bench.default_config,
                                     Vec::Zero(3), 5.0);
    CHECK(traj.status == RunStatus::Completed);
    for (auto& x : traj.states) CHECK(x.norm() < 1e-12);
}

TEST_CASE("trajectory bookkeeping invariants") {
    auto bench = make_euler(3, 2, 1);
    ControllerConfig cfg = bench.default_config;
    cfg.epsilon = 0.5;
    auto traj = integrate_pi_epsilon(bench.system, bench.spec, cfg, v3(0.3, 0.2, 0.1), 2.0);
    REQUIRE(traj.status == RunStatus::Completed);
    CHECK(traj.states.size() == traj.times.size());
    CHECK(traj.controls.size() == traj.times.size());
    for (size_t k = 1; k < traj.times.size(); ++k) CHECK(traj.times[k] > traj.times[k - 1]);
    // every period boundary t_j = eps*j appears among the times
    const auto samples = period_samples(traj);
    CHECK(samples.size() == 5);  // t = 0, 0.5, 1.0, 1.5, 2.0
    for (size_t j = 0; j < samples.size(); ++j)
        CHECK(samples[j].first == doctest::Approx(0.5 * j).epsilon(1e-12));
}

TEST_CASE("period samples of a constant trajectory are all x0") {
    auto sys = basis_system(2);
    RankSpec spec({1, 2}, {}, {}, {}, {});
    ControllerConfig cfg;
    cfg.epsilon = 1.0;
    cfg.potential_gradient = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
    Vec x0(2);
    x0 << 1.0, -1.0;
    auto traj = integrate_pi_epsilon(sys, spec, cfg, x0, 3.0);
    auto samples = period_samples(traj);
    CHECK(samples.size() == 4);
    for (auto& [t, x] : samples) CHECK((x - x0).norm() < 1e-14);
}

TEST_CASE("horizon not a period multiple is truncated with a warning") {
    auto bench = make_euler(3, 2, 1);
    ControllerConfig cfg = bench.default_config;
    cfg.epsilon = 1.0;
    auto traj = integrate_pi_epsilon(bench.system, bench.spec, cfg, v3(0.1, 0.1, 0.1), 2.7);
    CHECK(traj.horizon_truncated);
    CHECK(traj.times.back() == doctest::Approx(2.0));
}

TEST_CASE("pi_eps semantics: controls depend only on the frozen state") {
    auto bench = make_euler(3, 2, 1);
    ControllerConfig cfg = bench.default_config;
    cfg.epsilon = 0.5;
    auto traj = integrate_pi_epsilon(bench.system, bench.spec, cfg, v3(0.3, 0.2, 0.1), 1.0);
    REQUIRE(traj.status == RunStatus::Completed);
    // reconstruct the control sequence from the frozen period-start states only
    auto samples = period_samples(traj);
    size_t mark = 0;
    for (size_t k = 0; k + 1 < traj.times.size(); ++k) {
        const double t = traj.times[k];
        while (mark + 1 < samples.size() && samples[mark + 1].first <= t + 1e-12) ++mark;
        Vec u = control_value(bench.system, bench.spec, cfg, t, samples[mark].second);
        CHECK((u - traj.controls[k]).norm() < 1e-10 * std::max(1.0, u.norm()));
    }
}

TEST_CASE("step halving converges at fourth order on a smooth interval") {
    auto bench = make_euler(3, 2, 1);
    ControllerConfig cfg = bench.default_config;
    cfg.epsilon = 1.0;
    Vec x0 = v3(0.3, 0.2, 0.1);
    // integrate exactly one period (single smooth interval, frozen coefficients)
    auto run = [&](double step) {
        return integrate_pi_epsilon(bench.system, bench.spec, cfg, x0, 1.0, step).final_state();
    };
    Vec fine = run(1.0 / 4096.0);
    double e1 = (run(1.0 / 128.0) - fine).norm();
    double e2 = (run(1.0 / 256.0) - fine).norm();
    double order = std::log2(e1 / e2);
    CHECK(order > 3.5);
}

TEST_CASE("with no oscillatory sets the period map is the averaged flow") {
    // S1-only system: u = a(x(t_j)) constant per period; as step -> 0 the
    // period map equals the time-eps flow of f0 + sum a_i f_i.
    auto bench = make_brockett();
    RankSpec s1_only({1, 2}, {}, {}, {}, {});
    ControlAffineSystem planar;
    planar.dim = 2;
    planar.drift = zero_field(2);
    Mat id2 = Mat::Identity(2, 2);
    planar.controlled = {constant_field(id2.col(0)), constant_field(id2.col(1))};
    planar.domain = Domain::all(2);
    ControllerConfig cfg;
    cfg.gamma = 1.0;
    cfg.epsilon = 0.25;
    Vec x0(2);
    x0 << 0.8, -0.6;
    auto traj = integrate_pi_epsilon(planar, s1_only, cfg, x0, 0.25, 1e-4);
    // constant fields + frozen coefficients: flow is x0 + eps * a, a = -gamma x0
    Vec want = x0 - cfg.gamma * cfg.epsilon * x0;
    CHECK((traj.final_state() - want).norm() < 1e-12);
    (void)bench;
}

TEST_CASE("rigid-body pi_eps run converges for moderate eps") {
    auto bench = make_euler(3, 2, 1);
    ControllerConfig cfg = bench.default_config;
    cfg.epsilon = 0.1;  // gamma*eps = 0.5: contractive sampled map
    auto traj = integrate_pi_epsilon(bench.system, bench.spec, cfg, v3(3, 2, 1), 20.0);
    REQUIRE(traj.status == RunStatus::Completed);
    CHECK(traj.final_state().norm() < 1e-2);
    auto samples = period_samples(traj);
    for (size_t j = 5; j + 1 < samples.size(); ++j) {
        if (samples[j].second.norm() < 1e-13) break;  // at numerical zero
        CHECK(samples[j + 1].second.norm() < samples[j].second.norm());
    }
}

TEST_CASE("closed-loop ODE mode converges at the demonstration parameters") {
    auto bench = make_euler(3, 2, 1);
    auto traj =
        integrate_continuous(bench.system, bench.spec, bench.default_config, v3(3, 2, 1), 50.0);
    REQUIRE(traj.status == RunStatus::Completed);
    CHECK(traj.final_state().norm() < 1e-2);
}

TEST_CASE("sampled coefficients at gamma*eps = 5 escape in finite time") {
    // the sampled period map expands like |1 - gamma*eps| = 4 here; the
    // closed loop blows up even though the ODE solution converges
    auto bench = make_euler(3, 2, 1);
    auto traj = integrate_pi_epsilon(bench.system, bench.spec, bench.default_config,
                                     v3(3, 2, 1), 50.0);
    CHECK(traj.status == RunStatus::NonFiniteHalt);
    CHECK(traj.stop_time < 2.0);
}

TEST_CASE("bounded-domain benchmark practically converges at small gain") {
    auto bench = make_underwater(2.0);
    ControllerConfig cfg = bench.default_config;
    cfg.gamma = 1.0;
    cfg.epsilon = 0.5;
    const Vec x0 = bench.reference_initial_states.front();
    auto traj = integrate_pi_epsilon(bench.system, bench.spec, cfg, x0, 60.0);
    REQUIRE(traj.status == RunStatus::Completed);
    double tail = 0.0;
    for (size_t k = 0; k < traj.times.size(); ++k)
        if (traj.times[k] >= 30.0) tail = std::max(tail, traj.states[k].norm());
    CHECK(tail < 1.0);
}

TEST_CASE("domain exit is reported on the bounded-domain benchmark") {
    auto bench = make_underwater(2.0);
    Vec x0(6);
    x0 << -1, 1, 1, 3 * M_PI / 2, 3 * M_PI / 8, M_PI;
    auto traj = integrate_pi_epsilon(bench.system, bench.spec, bench.default_config, x0, 60.0);
    CHECK(traj.status == RunStatus::DomainExit);
    CHECK(traj.stop_time > 0.0);
    CHECK(traj.stop_time < 60.0);
}

TEST_CASE("decay rate diagnostics") {
    // synthetic exponential trajectory
    Trajectory traj;
    traj.epsilon = 1.0;
    Vec x0(2);
    x0 << 0.6, 0.8;  // unit norm, so (1/t) ln ||x(t)|| = -1 exactly
    for (int k = 0; k <= 1000; ++k) {
        const double t = 0.05 * k;
        traj.times.push_back(t);
        traj.states.push_back(std::exp(-t) * x0);
        traj.controls.push_back(Vec::Zero(1));
    }
    auto ds = decay_rate(traj, 1.0);
    CHECK(ds.rate_estimate == doctest::Approx(-1.0).epsilon(1e-6));

    // constant trajectory: series tends to zero like (ln c)/t
    Trajectory flat;
    flat.epsilon = 1.0;
    Vec c0(2);
    c0 << 3.0, 4.0;
    for (int k = 0; k <= 100; ++k) {
        flat.times.push_back(1.0 * k);
        flat.states.push_back(c0);
        flat.controls.push_back(Vec::Zero(1));
    }
    auto dsf = decay_rate(flat, 0.0);
    CHECK(std::abs(dsf.values.back()) < std::abs(dsf.values.front()));
    CHECK(dsf.values.back() == doctest::Approx(std::log(5.0) / 100.0));
}

TEST_CASE("decay rate on an exactly-converged trajectory") {
    Trajectory traj;
    traj.epsilon = 1.0;
    for (int k = 0; k <= 10; ++k) {
        traj.times.push_back(1.0 * k);
        traj.states.push_back(Vec::Zero(2));
        traj.controls.push_back(Vec::Zero(1));
    }
    auto ds = decay_rate(traj, 0.0);
    CHECK(ds.converged_exactly);
    CHECK(ds.times.empty());
}
