#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "oscstab/errors.hpp"

namespace oscstab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A smooth map R^n -> R^n. The evaluator is mandatory; an analytic
/// Jacobian and second-derivative action may be attached. When they are
/// absent, consumers fall back to central finite differences.
///
/// hessian_action(x, u, v) is the directional derivative, in direction v,
/// of the map x |-> J_f(x) u (one slot of the second derivative tensor).
struct VectorField {
    int dim = 0;
    std::function<Vec(const Vec&)> eval;
    std::function<Mat(const Vec&)> jacobian;                          // optional
    std::function<Vec(const Vec&, const Vec&, const Vec&)> hessian_action;  // optional
    std::string label;

    Vec operator()(const Vec& x) const { return eval(x); }

    bool has_jacobian() const { return static_cast<bool>(jacobian); }
    bool has_hessian() const { return static_cast<bool>(hessian_action); }
};

inline VectorField constant_field(const Vec& value, std::string label = "const") {
    const int n = static_cast<int>(value.size());
    return VectorField{
        n,
        [value](const Vec&) { return value; },
        [n](const Vec&) { return Mat::Zero(n, n); },
        [n](const Vec&, const Vec&, const Vec&) { return Vec::Zero(n); },
        std::move(label)};
}

inline VectorField linear_field(const Mat& a, std::string label = "linear") {
    const int n = static_cast<int>(a.rows());
    return VectorField{
        n,
        [a](const Vec& x) { return Vec(a * x); },
        [a](const Vec&) { return a; },
        [n](const Vec&, const Vec&, const Vec&) { return Vec::Zero(n); },
        std::move(label)};
}

inline VectorField zero_field(int dim, std::string label = "0") {
    return constant_field(Vec::Zero(dim), std::move(label));
}

/// Membership predicate plus a bounding box used for random sampling.
struct Domain {
    std::function<bool(const Vec&)> contains;
    Vec box_lo;
    Vec box_hi;

    static Domain box(const Vec& lo, const Vec& hi) {
        return Domain{[lo, hi](const Vec& x) {
                          return (x.array() >= lo.array()).all() &&
                                 (x.array() <= hi.array()).all();
                      },
                      lo, hi};
    }

    static Domain all(int dim, double half_width = 5.0) {
        Vec lo = Vec::Constant(dim, -half_width);
        Vec hi = Vec::Constant(dim, half_width);
        return Domain{[](const Vec&) { return true; }, lo, hi};
    }

    Vec sample(std::mt19937& rng) const {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Vec x(box_lo.size());
        do {
            for (Eigen::Index i = 0; i < x.size(); ++i)
                x[i] = box_lo[i] + unit(rng) * (box_hi[i] - box_lo[i]);
        } while (!contains(x));
        return x;
    }
};

/// Drift f0 plus controlled fields f1..fm on a common domain.
struct ControlAffineSystem {
    VectorField drift;
    std::vector<VectorField> controlled;
    int dim = 0;
    Domain domain;

    int num_controls() const { return static_cast<int>(controlled.size()); }

    /// 1-based access following the usual control-theoretic indexing:
    /// field(0) is the drift, field(k) is the k-th controlled field.
    const VectorField& field(int k) const {
        return k == 0 ? drift : controlled.at(static_cast<size_t>(k - 1));
    }

    void check_point(const Vec& x) const {
        if (static_cast<int>(x.size()) != dim)
            throw DimensionMismatch("point has dimension " + std::to_string(x.size()) +
                                    ", system has dimension " + std::to_string(dim));
        if (!domain.contains(x))
            throw DomainViolation("point outside the system domain");
    }
};

namespace detail {

inline void check_same_dim(const VectorField& f, const VectorField& g, const Vec& x) {
    if (f.dim != g.dim)
        throw DimensionMismatch("fields '" + f.label + "' (dim " + std::to_string(f.dim) +
                                ") and '" + g.label + "' (dim " + std::to_string(g.dim) +
                                ") do not match");
    if (static_cast<int>(x.size()) != f.dim)
        throw DimensionMismatch("point dimension " + std::to_string(x.size()) +
                                " does not match field dimension " + std::to_string(f.dim));
}

}  // namespace detail

/// Checks an analytic Jacobian against central differences of eval at
/// sampled points. Returns the worst relative error seen.
inline double validate_jacobian(const VectorField& f, const Domain& domain,
                                std::mt19937& rng, int samples = 20) {
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Vec x = domain.sample(rng);
        const Mat ja = f.jacobian(x);
        const double h = 1e-5 * std::max(1.0, x.norm());
        Mat jfd(f.dim, f.dim);
        for (int j = 0; j < f.dim; ++j) {
            Vec xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            jfd.col(j) = (f.eval(xp) - f.eval(xm)) / (2.0 * h);
        }
        const double scale = std::max(1.0, ja.norm());
        worst = std::max(worst, (ja - jfd).norm() / scale);
    }
    return worst;
}

}  // namespace oscstab
