#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <oscstab/benchmarks.hpp>
#include <random>

using namespace oscstab;

namespace {
Vec v3(double a, double b, double c) {
    Vec x(3);
    x << a, b, c;
    return x;
}
}  // namespace

TEST_CASE("rigid-body fields") {
    auto b = make_euler(3, 2, 1);
    CHECK(b.system.dim == 3);
    CHECK(b.system.num_controls() == 2);

    Vec x = v3(1, 1, 1);
    Vec f0 = b.system.drift.eval(x);
    CHECK(f0[0] == 3.0);
    CHECK(f0[1] == 2.0);
    CHECK(f0[2] == 1.0);
    CHECK(b.system.drift.eval(Vec::Zero(3)).norm() == 0.0);

    CHECK((b.system.field(1).eval(x) - v3(1, 0, 0)).norm() == 0.0);
    CHECK((b.system.field(2).eval(x) - v3(0, 1, 0)).norm() == 0.0);

    // quadratic drift: f0(x) = (a1 x2 x3, a2 x1 x3, a3 x1 x2)
    Vec y = v3(2, -1, 0.5);
    Vec fy = b.system.drift.eval(y);
    CHECK(fy[0] == doctest::Approx(3.0 * -1.0 * 0.5));
    CHECK(fy[1] == doctest::Approx(2.0 * 2.0 * 0.5));
    CHECK(fy[2] == doctest::Approx(1.0 * 2.0 * -1.0));
}

TEST_CASE("rigid-body spec and defaults") {
    auto b = make_euler(3, 2, 1);
    CHECK(b.spec.s1 == std::vector<int>{1, 2});
    REQUIRE(b.spec.s20.size() == 1);
    CHECK(b.spec.s20.front() == std::array<int, 2>{1, 2});
    CHECK(b.spec.case_b());
    CHECK(b.default_config.gamma > 0.0);
    CHECK(b.default_config.epsilon > 0.0);
    b.spec.validate(b.system.num_controls(), b.system.dim);
    b.default_config.frequencies.validate(b.spec);
    CHECK(!b.reference_initial_states.empty());
    for (const Vec& x0 : b.reference_initial_states) CHECK(x0.size() == 3);
}

TEST_CASE("rigid-body closed form matches the solver") {
    auto b = make_euler(3, 2, 1);
    REQUIRE(b.closed_form_coefficients);
    std::mt19937 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        Vec x = b.system.domain.sample(rng);
        Vec a = solve_coefficients(b.system, b.spec, b.default_config, x);
        Vec c = b.closed_form_coefficients(x);
        CHECK((a - c).norm() < 1e-10 * std::max(1.0, c.norm()));
    }
}

TEST_CASE("rigid-body parameter validation") {
    CHECK_THROWS_AS(make_euler(3, 2, 0), ConfigError);
    CHECK_NOTHROW(make_euler(0, 2, 1));  // only alpha3 enters the bracket matrix
}

TEST_CASE("underwater vehicle fields") {
    auto b = make_underwater(2.0);
    CHECK(b.system.dim == 6);
    CHECK(b.system.num_controls() == 3);

    Vec f0_at_zero = b.system.drift.eval(Vec::Zero(6));
    Vec want(6);
    want << 0, 0, 0, 0, 0, 2.0;
    CHECK((f0_at_zero - want).norm() == 0.0);

    // the second control is a pure pitch-rate actuator
    Vec e4 = Vec::Zero(6);
    e4[3] = 1.0;
    std::mt19937 rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        Vec x = b.system.domain.sample(rng);
        CHECK((b.system.field(2).eval(x) - e4).norm() == 0.0);
    }

    // pitch angle pi/2 is a coordinate singularity and excluded from the domain
    Vec bad = Vec::Zero(6);
    bad[4] = std::numbers::pi / 2.0;
    CHECK(!b.system.domain.contains(bad));
    CHECK(b.system.domain.contains(Vec::Zero(6)));
}

TEST_CASE("underwater spec shape and bracket-matrix invertibility") {
    auto b = make_underwater(2.0);
    CHECK(b.spec.s1.size() + b.spec.s2.size() + b.spec.s3.size() + b.spec.s10.size() +
              b.spec.s20.size() ==
          6);
    CHECK(b.spec.s2.size() == 2);
    CHECK(b.spec.s10.size() == 1);
    b.spec.validate(b.system.num_controls(), b.system.dim);
    b.default_config.frequencies.validate(b.spec);

    std::mt19937 rng(43);
    int checked = 0;
    while (checked < 200) {
        Vec x = b.system.domain.sample(rng);
        if (!b.system.domain.contains(x)) continue;
        Mat f = assemble_bracket_matrix(b.system, b.spec, x);
        REQUIRE(f.rows() == 6);
        REQUIRE(f.cols() == 6);
        Eigen::JacobiSVD<Mat> svd(f);
        CHECK(svd.singularValues()(5) > 1e-8 * svd.singularValues()(0));
        ++checked;
    }
}

TEST_CASE("underwater frequency assignment matches the resonance-free rules") {
    auto b = make_underwater(2.0);
    auto freqs = assign_frequencies(b.spec);
    freqs.validate(b.spec);
    std::vector<int> listed = freqs.listed_frequencies();
    std::sort(listed.begin(), listed.end());
    CHECK(std::adjacent_find(listed.begin(), listed.end()) == listed.end());
    for (int k : listed) CHECK(k >= 1);
}

TEST_CASE("planar integrator fields") {
    auto b = make_brockett();
    CHECK(b.system.dim == 3);
    CHECK(b.system.num_controls() == 2);
    CHECK(b.system.drift.eval(v3(1, 2, 3)).norm() == 0.0);

    Vec x = v3(0.7, -0.4, 0.2);
    Vec br = lie_bracket(b.system.field(1), b.system.field(2), x);
    CHECK((br - v3(0, 0, 2)).norm() < 1e-12);

    CHECK(b.spec.s2.size() == 1);
    CHECK(b.spec.case_a() == false);
}

TEST_CASE("planar integrator assumptions hold exactly") {
    auto b = make_brockett();
    auto rep = verify_assumptions(b.system, b.spec);
    CHECK(rep.a1_holds);
    CHECK(rep.a1_residual_f0 < 1e-12);
    CHECK(rep.a1_residual_lf0f0 < 1e-12);
    CHECK(rep.a2_holds);
    for (const auto& cond : rep.a2_conditions) {
        INFO(cond.label);
        CHECK(cond.holds);
    }
    CHECK(rep.f_inverse_bound > 0.0);
    CHECK(std::isfinite(rep.f_inverse_bound));
}

TEST_CASE("benchmark lookup by name") {
    for (const char* name : {"euler", "underwater", "brockett"}) {
        auto b = benchmark_by_name(name);
        CHECK(b.name == name);
    }
    CHECK_THROWS_AS(benchmark_by_name("nonexistent"), ConfigError);
}

TEST_CASE("reference states lie in the domain and give solvable coefficients") {
    for (const char* name : {"euler", "underwater", "brockett"}) {
        auto b = benchmark_by_name(name);
        for (const Vec& x0 : b.reference_initial_states) {
            INFO(name);
            CHECK(b.system.domain.contains(x0));
            Vec a = solve_coefficients(b.system, b.spec, b.default_config, x0);
            CHECK(a.allFinite());
        }
    }
}
