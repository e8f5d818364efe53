#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "oscstab/brackets.hpp"
#include "oscstab/vector_field.hpp"

namespace oscstab {

/// Index sets selecting which fields and brackets enter the controllability
/// matrix. Entries are 1-based control indices. Each set is kept sorted so
/// the induced coefficient/column ordering is deterministic.
struct RankSpec {
    std::vector<int> s1;
    std::vector<std::array<int, 2>> s2;
    std::vector<std::array<int, 3>> s3;
    std::vector<int> s10;
    std::vector<std::array<int, 2>> s20;

    RankSpec() = default;
    RankSpec(std::vector<int> s1_, std::vector<std::array<int, 2>> s2_,
             std::vector<std::array<int, 3>> s3_, std::vector<int> s10_,
             std::vector<std::array<int, 2>> s20_)
        : s1(std::move(s1_)), s2(std::move(s2_)), s3(std::move(s3_)),
          s10(std::move(s10_)), s20(std::move(s20_)) {
        std::sort(s1.begin(), s1.end());
        std::sort(s2.begin(), s2.end());
        std::sort(s3.begin(), s3.end());
        std::sort(s10.begin(), s10.end());
        std::sort(s20.begin(), s20.end());
    }

    int total() const {
        return static_cast<int>(s1.size() + s2.size() + s3.size() + s10.size() + s20.size());
    }

    // Coefficient-vector offsets; ordering S1, S2, S3, S10, S20 is part of
    // the contract.
    int offset_s1() const { return 0; }
    int offset_s2() const { return static_cast<int>(s1.size()); }
    int offset_s3() const { return offset_s2() + static_cast<int>(s2.size()); }
    int offset_s10() const { return offset_s3() + static_cast<int>(s3.size()); }
    int offset_s20() const { return offset_s10() + static_cast<int>(s10.size()); }

    bool case_a() const { return s2.empty() && s3.empty() && s20.empty(); }  // rank1 shape
    bool case_b() const { return s2.empty() && s3.empty() && s10.empty(); }  // rank2 shape

    void validate(int num_controls, int dim) const {
        auto in_range = [&](int k) { return k >= 1 && k <= num_controls; };
        for (int i : s1)
            if (!in_range(i)) throw ConfigError("S1 index out of range: " + std::to_string(i));
        for (auto& p : s2)
            if (!in_range(p[0]) || !in_range(p[1])) throw ConfigError("S2 index out of range");
        for (auto& t : s3)
            if (!in_range(t[0]) || !in_range(t[1]) || !in_range(t[2]))
                throw ConfigError("S3 index out of range");
        for (int l : s10)
            if (!in_range(l)) throw ConfigError("S10 index out of range: " + std::to_string(l));
        for (auto& p : s20)
            if (!in_range(p[0]) || !in_range(p[1])) throw ConfigError("S20 index out of range");
        if (total() != dim)
            throw ConfigError("|S1|+|S2|+|S3|+|S10|+|S20| = " + std::to_string(total()) +
                              " but the system dimension is " + std::to_string(dim));
    }
};

/// One integer relation sum(c_i kappa_i) = 0 with gcd of the nonzero
/// coefficients equal to 1; order = sum |c_i|.
struct ResonanceRelation {
    std::vector<int> coefficients;
    int order = 0;
};

/// Exhaustive search for resonances up to the given order among the listed
/// frequencies. Coefficient vectors are canonicalized so the first nonzero
/// entry is positive.
inline std::vector<ResonanceRelation> find_resonances(const std::vector<int>& freqs, int order_bound) {
    if (freqs.empty()) throw ConfigError("find_resonances: empty frequency list");
    if (order_bound < 2) throw ConfigError("find_resonances: order bound must be >= 2");
    const int q = static_cast<int>(freqs.size());
    std::vector<ResonanceRelation> out;
    std::vector<int> c(q, -order_bound);
    while (true) {
        int l1 = 0, dot = 0;
        for (int i = 0; i < q; ++i) {
            l1 += std::abs(c[i]);
            dot += c[i] * freqs[i];
        }
        if (l1 >= 2 && l1 <= order_bound && dot == 0) {
            int g = 0, first_nonzero = 0;
            for (int i = 0; i < q; ++i)
                if (c[i] != 0) {
                    if (g == 0) first_nonzero = c[i];
                    g = std::gcd(g, std::abs(c[i]));
                }
            if (g == 1 && first_nonzero > 0) out.push_back({c, l1});
        }
        int i = 0;
        for (; i < q; ++i) {
            if (c[i] < order_bound) {
                ++c[i];
                break;
            }
            c[i] = -order_bound;
        }
        if (i == q) break;
    }
    return out;
}

/// Integer frequencies for every oscillatory family, keyed by the index
/// tuples of the RankSpec. S3 triples carry a pair (kappa1, kappa2) with
/// derived kappa3 = kappa1 + kappa2 and kappa4 = kappa1 - kappa2.
struct FrequencyAssignment {
    std::map<std::array<int, 2>, int> s2;
    std::map<std::array<int, 3>, std::pair<int, int>> s3;
    std::map<int, int> s10;
    std::map<std::array<int, 2>, int> s20;

    std::vector<int> listed_frequencies() const {
        std::vector<int> out;
        for (auto& [k, v] : s2) out.push_back(v);
        for (auto& [k, v] : s3) {
            out.push_back(v.first);
            out.push_back(v.second);
            out.push_back(v.first + v.second);
            out.push_back(v.first - v.second);
        }
        for (auto& [k, v] : s10) out.push_back(v);
        for (auto& [k, v] : s20) out.push_back(v);
        return out;
    }

    int max_frequency() const {
        int m = 1;
        for (int f : listed_frequencies()) m = std::max(m, f);
        return m;
    }

    void validate(const RankSpec& spec) const {
        for (auto& p : spec.s2)
            if (!s2.count(p)) throw ConfigError("missing frequency for an S2 pair");
        for (auto& t : spec.s3)
            if (!s3.count(t)) throw ConfigError("missing frequency pair for an S3 triple");
        for (int l : spec.s10)
            if (!s10.count(l)) throw ConfigError("missing frequency for an S10 index");
        for (auto& p : spec.s20)
            if (!s20.count(p)) throw ConfigError("missing frequency for an S20 pair");
        for (auto& [t, v] : s3)
            if (v.first == v.second)
                throw ConfigError("S3 frequency pair has kappa1 = kappa2 (degenerate cube root)");
        const std::vector<int> all = listed_frequencies();
        std::vector<int> sorted = all;
        std::sort(sorted.begin(), sorted.end());
        for (size_t i = 0; i < sorted.size(); ++i) {
            if (sorted[i] <= 0) throw ConfigError("frequencies must be positive");
            if (i > 0 && sorted[i] == sorted[i - 1])
                throw ConfigError("frequencies must be pairwise distinct");
        }
        // Redundant for distinct positive integers, but enforced uniformly.
        if ((!spec.s20.empty() || !spec.s3.empty()) && !all.empty()) {
            if (!find_resonances(all, 2).empty())
                throw ConfigError("order-2 resonance among controller frequencies");
        }
    }
};

/// Deterministic smallest-integers-first assignment of pairwise distinct,
/// order-2-resonance-free frequencies for the given spec.
inline FrequencyAssignment assign_frequencies(const RankSpec& spec, int /*order_bound*/ = 2) {
    constexpr int kSearchBound = 10000;
    FrequencyAssignment fa;
    std::vector<int> used;
    auto taken = [&](int f) { return std::find(used.begin(), used.end(), f) != used.end(); };
    auto next_free = [&]() {
        for (int f = 1; f <= kSearchBound; ++f)
            if (!taken(f)) return f;
        throw SearchExhausted("no admissible frequency below internal bound");
    };
    for (auto& p : spec.s2) {
        int f = next_free();
        fa.s2[p] = f;
        used.push_back(f);
    }
    for (auto& t : spec.s3) {
        bool found = false;
        for (int k1 = 2; k1 <= kSearchBound && !found; ++k1) {
            for (int k2 = 1; k2 < k1 && !found; ++k2) {
                const int cand[4] = {k1, k2, k1 + k2, k1 - k2};
                bool ok = true;
                for (int a = 0; a < 4 && ok; ++a) {
                    if (cand[a] <= 0 || taken(cand[a])) ok = false;
                    for (int b = a + 1; b < 4 && ok; ++b)
                        if (cand[a] == cand[b]) ok = false;
                }
                if (ok) {
                    fa.s3[t] = {k1, k2};
                    for (int f : cand) used.push_back(f);
                    found = true;
                }
            }
        }
        if (!found) throw SearchExhausted("no admissible S3 frequency pair below internal bound");
    }
    for (int l : spec.s10) {
        int f = next_free();
        fa.s10[l] = f;
        used.push_back(f);
    }
    for (auto& p : spec.s20) {
        int f = next_free();
        fa.s20[p] = f;
        used.push_back(f);
    }
    fa.validate(spec);
    return fa;
}

/// Gain, period, potential gradient, and frequency assignment for the
/// oscillating controller. Only grad V enters the formulas; V itself is
/// metadata.
struct ControllerConfig {
    double gamma = 1.0;
    double epsilon = 1.0;
    std::function<Vec(const Vec&)> potential_gradient;  // default: grad(1/2 |x|^2) = x
    FrequencyAssignment frequencies;

    Vec grad_v(const Vec& x) const { return potential_gradient ? potential_gradient(x) : x; }

    void validate() const {
        if (gamma <= 0.0) throw ConfigError("gamma must be positive");
        if (epsilon <= 0.0) throw ConfigError("epsilon must be positive");
    }
};

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Controllability matrix F(x): columns (f_i)_{S1}, ([f_{i1},f_{i2}])_{S2},
/// ([f_{j1},[f_{j2},f_{j3}]])_{S3}, ([f_l,f_0])_{S10},
/// ([f_{l1},[f_{l2},f_0]] + [f_{l2},[f_{l1},f_0]])_{S20}.
inline Mat assemble_bracket_matrix(const ControlAffineSystem& system, const RankSpec& spec,
                                   const Vec& x) {
    system.check_point(x);
    spec.validate(system.num_controls(), system.dim);
    Mat f(system.dim, spec.total());
    int col = 0;
    for (int i : spec.s1) f.col(col++) = system.field(i).eval(x);
    for (auto& [i1, i2] : spec.s2)
        f.col(col++) = lie_bracket(system.field(i1), system.field(i2), x);
    for (auto& [j1, j2, j3] : spec.s3)
        f.col(col++) = nested_bracket(system.field(j1), system.field(j2), system.field(j3), x);
    for (int l : spec.s10) f.col(col++) = lie_bracket(system.field(l), system.drift, x);
    for (auto& [l1, l2] : spec.s20)
        f.col(col++) = nested_bracket(system.field(l1), system.field(l2), system.drift, x) +
                       nested_bracket(system.field(l2), system.field(l1), system.drift, x);
    Eigen::JacobiSVD<Mat> svd(f);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (smin <= 0.0 || smax / smin > 1e8)
        throw RankDeficient("bracket matrix condition estimate exceeds 1e8 at the queried point");
    return f;
}

/// a(x) = -F(x)^{-1} (gamma grad V(x) + f0(x)), solved by LU with partial
/// pivoting. Component ordering matches the column ordering of F.
inline Vec solve_coefficients(const ControlAffineSystem& system, const RankSpec& spec,
                              const ControllerConfig& config, const Vec& x) {
    config.validate();
    const Mat f = assemble_bracket_matrix(system, spec, x);
    const Vec rhs = -(config.gamma * config.grad_v(x) + system.drift.eval(x));
    return f.partialPivLu().solve(rhs);
}

/// Evaluates the trigonometric control formula for already-solved
/// coefficients a (frozen-state evaluation; the pi_eps integrator reuses
/// this per period without re-solving).
inline Vec control_from_coefficients(const RankSpec& spec, const FrequencyAssignment& freqs,
                                     double eps, const Vec& a, double t, int num_controls) {
    using std::numbers::pi;
    Vec u = Vec::Zero(num_controls);

    int p = spec.offset_s1();
    for (int i : spec.s1) u[i - 1] += a[p++];

    p = spec.offset_s2();
    for (auto& pair : spec.s2) {
        const int kappa = freqs.s2.at(pair);
        const double av = a[p++];
        const double amp = 2.0 * std::sqrt(pi * kappa * std::abs(av)) / std::sqrt(eps);
        const double phase = 2.0 * pi * kappa * t / eps;
        u[pair[0] - 1] += amp * sign0(av) * std::cos(phase);
        u[pair[1] - 1] += amp * std::sin(phase);
    }

    p = spec.offset_s3();
    for (auto& triple : spec.s3) {
        const auto [k1, k2] = freqs.s3.at(triple);
        if (k1 == k2) throw ConfigError("S3 triple with kappa1 = kappa2");
        const double av = a[p++];
        const double amp =
            2.0 * std::cbrt(2.0 * pi * pi * (double(k1) * k1 - double(k2) * k2) * av) /
            std::cbrt(eps * eps);
        const double s1p = std::sin(2.0 * pi * k1 * t / eps);
        const double c2p = std::cos(2.0 * pi * k2 * t / eps);
        u[triple[0] - 1] += amp * s1p * c2p;
        u[triple[1] - 1] += amp * s1p;
        u[triple[2] - 1] += amp * c2p;
    }

    p = spec.offset_s10();
    for (int l : spec.s10) {
        const int kappa = freqs.s10.at(l);
        const double av = a[p++];
        u[l - 1] += 2.0 * pi * kappa * av * std::sin(2.0 * pi * kappa * t / eps) / eps;
    }

    p = spec.offset_s20();
    for (auto& pair : spec.s20) {
        const int kappa = freqs.s20.at(pair);
        const double av = a[p++];
        const double amp = 4.0 * pi * kappa * std::sqrt(std::abs(av)) *
                           std::cos(2.0 * pi * kappa * t / eps) / eps;
        u[pair[0] - 1] += amp;
        u[pair[1] - 1] += amp * sign0(av);
    }
    return u;
}

/// The time-periodic control u^eps(t, x_frozen) of the combined controller
/// family; the pure S1/S10 and S1/S20 cases are the specializations with
/// the other index sets empty.
inline Vec control_value(const ControlAffineSystem& system, const RankSpec& spec,
                         const ControllerConfig& config, double t, const Vec& x_frozen) {
    config.frequencies.validate(spec);
    const Vec a = solve_coefficients(system, spec, config, x_frozen);
    return control_from_coefficients(spec, config.frequencies, config.epsilon, a, t,
                                     system.num_controls());
}

/// One numerically checked condition of assumption (A2).
struct A2Condition {
    std::string label;
    bool is_residual = false;       // condition stated at x = 0
    double residual_at_zero = 0.0;  // for residual conditions
    bool identically_zero = false;  // sampled values all at noise level
    double mu_estimate = 0.0;       // fitted decay exponent, when meaningful
    bool holds = false;
};

struct AssumptionReport {
    bool a1_holds = false;
    double a1_residual_f0 = 0.0;
    double a1_residual_lf0f0 = 0.0;
    bool a2_holds = false;
    std::vector<A2Condition> a2_conditions;
    double f_inverse_bound = 0.0;  // sampled max of ||F^{-1}(x)||
};

namespace detail {

// Least-squares slope of ln ||g(s d)|| vs ln s over random directions.
// Returns (identically_zero, slope).
inline std::pair<bool, double> fit_decay_exponent(const std::function<Vec(const Vec&)>& g, int dim,
                                                  std::mt19937& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Vec> dirs;
    for (int d = 0; d < 10; ++d) {
        Vec v(dim);
        for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
        dirs.push_back(v.normalized());
    }
    std::vector<double> ln_s, ln_r;
    for (int k = 0; k < 8; ++k) {
        const double s = std::pow(10.0, -1.0 - 3.0 * k / 7.0);  // 1e-1 .. 1e-4
        double r = 0.0;
        for (auto& d : dirs) r = std::max(r, g(s * d).norm());
        if (r > 1e-13) {
            ln_s.push_back(std::log(s));
            ln_r.push_back(std::log(r));
        }
    }
    if (ln_s.size() < 3) return {true, 0.0};
    const double n = static_cast<double>(ln_s.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < ln_s.size(); ++i) {
        sx += ln_s[i];
        sy += ln_r[i];
        sxx += ln_s[i] * ln_s[i];
        sxy += ln_s[i] * ln_r[i];
    }
    return {false, (n * sxy - sx * sy) / (n * sxx - sx * sx)};
}

}  // namespace detail

/// Numerical check of assumptions (A1)/(A2) plus a sampled bound on
/// ||F^{-1}(x)|| over the domain box.
inline AssumptionReport verify_assumptions(const ControlAffineSystem& system, const RankSpec& spec,
                                           int samples = 100) {
    constexpr double kZeroTol = 1e-9;
    AssumptionReport rep;
    const Vec zero = Vec::Zero(system.dim);
    const VectorField& f0 = system.drift;

    rep.a1_residual_f0 = f0.eval(zero).norm();
    rep.a1_residual_lf0f0 = directional_derivative(f0, f0, zero).norm();
    rep.a1_holds = rep.a1_residual_f0 <= kZeroTol && rep.a1_residual_lf0f0 <= kZeroTol;

    std::mt19937 rng(20240811);
    rep.a2_holds = true;
    auto add_residual = [&](const std::string& label, double r) {
        A2Condition c;
        c.label = label;
        c.is_residual = true;
        c.residual_at_zero = r;
        c.holds = r <= kZeroTol;
        rep.a2_holds = rep.a2_holds && c.holds;
        rep.a2_conditions.push_back(c);
    };
    auto add_decay = [&](const std::string& label, const std::function<Vec(const Vec&)>& g) {
        A2Condition c;
        c.label = label;
        auto [zero_fn, mu] = detail::fit_decay_exponent(g, system.dim, rng);
        c.identically_zero = zero_fn;
        c.mu_estimate = mu;
        c.holds = zero_fn || mu > 0.5;  // O(||x||^mu) with some mu > 0
        rep.a2_holds = rep.a2_holds && c.holds;
        rep.a2_conditions.push_back(c);
    };

    const VectorField lf0f0 = lie_derivative_field(f0, f0);
    add_residual("|L_f0 L_f0 f0(0)|", directional_derivative(lf0f0, f0, zero).norm());

    for (int l : spec.s10) {
        const VectorField& fl = system.field(l);
        add_residual("|[f0,[f0,f" + std::to_string(l) + "]](0)|",
                     nested_bracket(f0, f0, fl, zero).norm());
        add_decay("[f0,[f0,f" + std::to_string(l) + "]]",
                  [&f0, &fl](const Vec& x) { return nested_bracket(f0, f0, fl, x); });
    }

    // Controlled indices k adjacent to an S20 pair.
    std::vector<int> adjacent;
    for (auto& [l1, l2] : spec.s20)
        for (int k = 1; k <= system.num_controls(); ++k) {
            const bool adj = std::find(spec.s20.begin(), spec.s20.end(),
                                       std::array<int, 2>{l1, k}) != spec.s20.end() ||
                             std::find(spec.s20.begin(), spec.s20.end(),
                                       std::array<int, 2>{k, l2}) != spec.s20.end();
            if (adj && std::find(adjacent.begin(), adjacent.end(), k) == adjacent.end())
                adjacent.push_back(k);
        }
    std::sort(adjacent.begin(), adjacent.end());
    for (int k : adjacent) {
        const VectorField& fk = system.field(k);
        add_residual("|[f0,[f0,f" + std::to_string(k) + "]](0)|",
                     nested_bracket(f0, f0, fk, zero).norm());
        add_decay("[f0,[f0,f" + std::to_string(k) + "]]",
                  [&f0, &fk](const Vec& x) { return nested_bracket(f0, f0, fk, x); });
    }
    for (auto& [l1, l2] : spec.s20) {
        const VectorField& fl1 = system.field(l1);
        const VectorField& fl2 = system.field(l2);
        add_decay("[f" + std::to_string(l1) + ",[f" + std::to_string(l1) + ",f0]] + [f" +
                      std::to_string(l2) + ",[f" + std::to_string(l2) + ",f0]]",
                  [&](const Vec& x) {
                      return Vec(nested_bracket(fl1, fl1, f0, x) + nested_bracket(fl2, fl2, f0, x));
                  });
        add_decay("[f0,[f" + std::to_string(l1) + ",f" + std::to_string(l2) + "]]",
                  [&](const Vec& x) { return nested_bracket(f0, fl1, fl2, x); });
    }

    rep.f_inverse_bound = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Vec x = system.domain.sample(rng);
        try {
            const Mat f = assemble_bracket_matrix(system, spec, x);
            Eigen::JacobiSVD<Mat> svd(f);
            rep.f_inverse_bound =
                std::max(rep.f_inverse_bound, 1.0 / svd.singularValues().minCoeff());
        } catch (const RankDeficient&) {
            rep.f_inverse_bound = std::numeric_limits<double>::infinity();
        }
    }
    return rep;
}

}  // namespace oscstab
