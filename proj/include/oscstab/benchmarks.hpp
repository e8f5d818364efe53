#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "oscstab/synthesis.hpp"

namespace oscstab {

/// A ready-to-run system: fields with analytic derivatives, the index sets
/// for its controllability matrix, default controller parameters, and
/// reference initial states. closed_form_coefficients, when present, is an
/// independent hand-derived a(x) used for cross-checks.
struct Benchmark {
    std::string name;
    ControlAffineSystem system;
    RankSpec spec;
    ControllerConfig default_config;
    std::function<Vec(const Vec&)> closed_form_coefficients;  // optional
    std::vector<Vec> reference_initial_states;
};

inline VectorField affine_field(const Vec& c, const Mat& a, std::string label) {
    const int n = static_cast<int>(c.size());
    return VectorField{
        n,
        [c, a](const Vec& x) { return Vec(c + a * x); },
        [a](const Vec&) { return a; },
        [n](const Vec&, const Vec&, const Vec&) { return Vec::Zero(n); },
        std::move(label)};
}

/// Rigid body angular velocity with two control torques:
/// dx1 = alpha1 x2 x3 + u1, dx2 = alpha2 x1 x3 + u2, dx3 = alpha3 x1 x2.
inline Benchmark make_euler(double alpha1 = 3.0, double alpha2 = 2.0, double alpha3 = 1.0) {
    if (alpha3 == 0.0)
        throw ConfigError("make_euler: alpha3 must be nonzero (J1 != J2)");
    Benchmark b;
    b.name = "euler";

    VectorField f0;
    f0.dim = 3;
    f0.label = "f0";
    f0.eval = [=](const Vec& x) {
        Vec v(3);
        v << alpha1 * x[1] * x[2], alpha2 * x[0] * x[2], alpha3 * x[0] * x[1];
        return v;
    };
    f0.jacobian = [=](const Vec& x) {
        Mat j(3, 3);
        j << 0.0, alpha1 * x[2], alpha1 * x[1],
             alpha2 * x[2], 0.0, alpha2 * x[0],
             alpha3 * x[1], alpha3 * x[0], 0.0;
        return j;
    };
    f0.hessian_action = [=](const Vec&, const Vec& u, const Vec& v) {
        Vec h(3);
        h << alpha1 * (u[1] * v[2] + u[2] * v[1]),
             alpha2 * (u[0] * v[2] + u[2] * v[0]),
             alpha3 * (u[0] * v[1] + u[1] * v[0]);
        return h;
    };

    Vec e1 = Vec::Zero(3), e2 = Vec::Zero(3);
    e1[0] = 1.0;
    e2[1] = 1.0;

    b.system = ControlAffineSystem{
        f0, {constant_field(e1, "f1"), constant_field(e2, "f2")}, 3, Domain::all(3, 4.0)};
    b.spec = RankSpec({1, 2}, {}, {}, {}, {{1, 2}});

    b.default_config.gamma = 5.0;
    b.default_config.epsilon = 1.0;
    b.default_config.frequencies.s20[{1, 2}] = 1;

    // Hand inversion of F = (e1 e2 (0,0,2 alpha3)) applied to
    // -(gamma x + f0(x)); cross-checked against the generic solve.
    b.closed_form_coefficients = [=](const Vec& x) {
        const double gamma = 5.0;
        Vec a(3);
        a << -(gamma * x[0] + alpha1 * x[1] * x[2]),
             -(gamma * x[1] + alpha2 * x[0] * x[2]),
             -(gamma * x[2] / (2.0 * alpha3) + 0.5 * x[0] * x[1]);
        return a;
    };

    Vec r1(3), r2(3);
    r1 << 3.0, 2.0, 1.0;
    r2 << 0.0, 0.0, 2.0;
    b.reference_initial_states = {r1, r2};
    return b;
}

/// Underwater vehicle with one uncontrolled angular velocity component
/// omega; position (x1..x3), orientation (x4..x6), domain |x5| < pi/2.
inline Benchmark make_underwater(double omega = 2.0) {
    using std::numbers::pi;
    Benchmark b;
    b.name = "underwater";

    auto sec = [](double v) { return 1.0 / std::cos(v); };

    VectorField f0;
    f0.dim = 6;
    f0.label = "f0";
    f0.eval = [=](const Vec& x) {
        Vec v = Vec::Zero(6);
        v[3] = omega * std::cos(x[3]) * std::tan(x[4]);
        v[4] = -omega * std::sin(x[3]);
        v[5] = omega * std::cos(x[3]) * sec(x[4]);
        return v;
    };
    f0.jacobian = [=](const Vec& x) {
        Mat j = Mat::Zero(6, 6);
        const double c4 = std::cos(x[3]), s4 = std::sin(x[3]);
        const double t5 = std::tan(x[4]), sc5 = sec(x[4]);
        j(3, 3) = -omega * s4 * t5;
        j(3, 4) = omega * c4 * sc5 * sc5;
        j(4, 3) = -omega * c4;
        j(5, 3) = -omega * s4 * sc5;
        j(5, 4) = omega * c4 * sc5 * t5;
        return j;
    };

    VectorField f1;
    f1.dim = 6;
    f1.label = "f1";
    f1.eval = [=](const Vec& x) {
        Vec v = Vec::Zero(6);
        v[0] = std::cos(x[4]) * std::cos(x[5]);
        v[1] = std::cos(x[4]) * std::sin(x[5]);
        v[2] = -std::sin(x[4]);
        return v;
    };
    f1.jacobian = [=](const Vec& x) {
        Mat j = Mat::Zero(6, 6);
        const double c5 = std::cos(x[4]), s5 = std::sin(x[4]);
        const double c6 = std::cos(x[5]), s6 = std::sin(x[5]);
        j(0, 4) = -s5 * c6;
        j(0, 5) = -c5 * s6;
        j(1, 4) = -s5 * s6;
        j(1, 5) = c5 * c6;
        j(2, 4) = -c5;
        return j;
    };

    Vec e4 = Vec::Zero(6);
    e4[3] = 1.0;
    VectorField f2 = constant_field(e4, "f2");

    VectorField f3;
    f3.dim = 6;
    f3.label = "f3";
    f3.eval = [=](const Vec& x) {
        Vec v = Vec::Zero(6);
        v[3] = std::sin(x[3]) * std::tan(x[4]);
        v[4] = std::cos(x[3]);
        v[5] = std::sin(x[3]) * sec(x[4]);
        return v;
    };
    f3.jacobian = [=](const Vec& x) {
        Mat j = Mat::Zero(6, 6);
        const double c4 = std::cos(x[3]), s4 = std::sin(x[3]);
        const double t5 = std::tan(x[4]), sc5 = sec(x[4]);
        j(3, 3) = c4 * t5;
        j(3, 4) = s4 * sc5 * sc5;
        j(4, 3) = -s4;
        j(5, 3) = c4 * sc5;
        j(5, 4) = s4 * sc5 * t5;
        return j;
    };

    Domain dom;
    dom.contains = [](const Vec& x) { return std::abs(x[4]) < pi / 2.0; };
    dom.box_lo = Vec(6);
    dom.box_hi = Vec(6);
    dom.box_lo << -2.0, -2.0, -2.0, -pi, -1.2, -pi;
    dom.box_hi << 2.0, 2.0, 2.0, pi, 1.2, pi;

    b.system = ControlAffineSystem{f0, {f1, f2, f3}, 6, dom};
    b.spec = RankSpec({1, 2, 3}, {{1, 3}, {2, 3}}, {}, {1}, {});

    b.default_config.gamma = 5.0;
    b.default_config.epsilon = 1.0;
    b.default_config.frequencies.s2[{1, 3}] = 1;
    b.default_config.frequencies.s2[{2, 3}] = 2;
    b.default_config.frequencies.s10[1] = 3;

    Vec r(6);
    r << -1.0, 1.0, 1.0, 3.0 * pi / 2.0, 3.0 * pi / 8.0, pi;
    b.reference_initial_states = {r};
    return b;
}

/// Driftless exerciser for the first-bracket (S2) controller family:
/// f1 = (1, 0, -x2), f2 = (0, 1, x1), f0 = 0.
inline Benchmark make_brockett() {
    Benchmark b;
    b.name = "brockett";

    Vec c1(3), c2(3);
    c1 << 1.0, 0.0, 0.0;
    c2 << 0.0, 1.0, 0.0;
    Mat a1 = Mat::Zero(3, 3), a2 = Mat::Zero(3, 3);
    a1(2, 1) = -1.0;
    a2(2, 0) = 1.0;

    b.system = ControlAffineSystem{zero_field(3, "f0"),
                                   {affine_field(c1, a1, "f1"), affine_field(c2, a2, "f2")},
                                   3, Domain::all(3, 4.0)};
    b.spec = RankSpec({1, 2}, {{1, 2}}, {}, {}, {});
    b.default_config.gamma = 1.0;
    b.default_config.epsilon = 0.1;
    b.default_config.frequencies.s2[{1, 2}] = 1;

    Vec r(3);
    r << 1.0, 0.5, 0.5;
    b.reference_initial_states = {r};
    return b;
}

inline Benchmark benchmark_by_name(const std::string& name) {
    if (name == "euler") return make_euler();
    if (name == "underwater") return make_underwater();
    if (name == "brockett") return make_brockett();
    throw ConfigError("unknown benchmark '" + name + "'");
}

}  // namespace oscstab
