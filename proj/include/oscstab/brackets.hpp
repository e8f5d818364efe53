#pragma once

#include <cmath>
#include <string>

#include "oscstab/vector_field.hpp"

namespace oscstab {

// Central-difference steps. First derivatives use the standard double
// precision sweet spot; one extra decade for anything built on top of an
// already-differenced quantity.
inline double fd_step_first(const Vec& x) { return 1e-5 * std::max(1.0, x.norm()); }
inline double fd_step_nested(const Vec& x) { return 1e-4 * std::max(1.0, x.norm()); }

/// Jacobian of f at x: analytic when attached, else central differences.
inline Mat jacobian_at(const VectorField& f, const Vec& x, double step = 0.0) {
    if (f.has_jacobian()) return f.jacobian(x);
    const double h = step > 0.0 ? step : fd_step_first(x);
    Mat j(f.dim, f.dim);
    for (int k = 0; k < f.dim; ++k) {
        Vec xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        j.col(k) = (f.eval(xp) - f.eval(xm)) / (2.0 * h);
    }
    return j;
}

/// L_g f(x) = (df/dx)(x) g(x).
inline Vec directional_derivative(const VectorField& f, const VectorField& g, const Vec& x) {
    detail::check_same_dim(f, g, x);
    return jacobian_at(f, x) * g.eval(x);
}

/// [f,g](x) = L_f g(x) - L_g f(x).
inline Vec lie_bracket(const VectorField& f, const VectorField& g, const Vec& x) {
    detail::check_same_dim(f, g, x);
    return jacobian_at(g, x) * f.eval(x) - jacobian_at(f, x) * g.eval(x);
}

namespace detail {

// Matrix whose column j is hessian_action(x, u, e_j), i.e. the x-derivative
// of the map x |-> J_f(x) u.
inline Mat hessian_matrix(const VectorField& f, const Vec& x, const Vec& u) {
    Mat h(f.dim, f.dim);
    Vec ej = Vec::Zero(f.dim);
    for (int j = 0; j < f.dim; ++j) {
        ej[j] = 1.0;
        h.col(j) = f.hessian_action(x, u, ej);
        ej[j] = 0.0;
    }
    return h;
}

}  // namespace detail

/// The derived field x |-> L_u v(x) = J_v(x) u(x). Its Jacobian is analytic
/// when v carries second derivatives and u a Jacobian; otherwise consumers
/// fall back to a finite-difference layer over eval.
inline VectorField lie_derivative_field(const VectorField& u, const VectorField& v) {
    VectorField out;
    out.dim = v.dim;
    out.label = "L_{" + u.label + "}" + v.label;
    out.eval = [u, v](const Vec& x) { return Vec(jacobian_at(v, x) * u.eval(x)); };
    if (v.has_hessian() && v.has_jacobian() && u.has_jacobian()) {
        out.jacobian = [u, v](const Vec& x) {
            return Mat(detail::hessian_matrix(v, x, u.eval(x)) + v.jacobian(x) * u.jacobian(x));
        };
    }
    return out;
}

/// The derived field x |-> [f,g](x). Analytic Jacobian when both factors
/// carry second derivatives.
inline VectorField bracket_field(const VectorField& f, const VectorField& g) {
    VectorField out;
    out.dim = f.dim;
    out.label = "[" + f.label + "," + g.label + "]";
    out.eval = [f, g](const Vec& x) { return lie_bracket(f, g, x); };
    if (f.has_hessian() && g.has_hessian() && f.has_jacobian() && g.has_jacobian()) {
        out.jacobian = [f, g](const Vec& x) {
            const Mat jf = f.jacobian(x);
            const Mat jg = g.jacobian(x);
            return Mat(detail::hessian_matrix(g, x, f.eval(x)) + jg * jf -
                       detail::hessian_matrix(f, x, g.eval(x)) - jf * jg);
        };
    }
    return out;
}

/// [f,[g,h]](x). Sets *used_nested_fd when the outer derivative of the inner
/// bracket had to be finite-differenced (wider step, reduced precision).
inline Vec nested_bracket(const VectorField& f, const VectorField& g, const VectorField& h,
                          const Vec& x, bool* used_nested_fd = nullptr) {
    detail::check_same_dim(f, g, x);
    detail::check_same_dim(g, h, x);
    const VectorField inner = bracket_field(g, h);
    if (used_nested_fd) *used_nested_fd = !inner.has_jacobian();
    // L_f inner - L_inner f; the first term needs d(inner)/dx.
    const Mat j_inner = inner.has_jacobian() ? inner.jacobian(x)
                                             : jacobian_at(inner, x, fd_step_nested(x));
    return j_inner * f.eval(x) - jacobian_at(f, x) * inner.eval(x);
}

}  // namespace oscstab
