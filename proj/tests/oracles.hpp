// Test-only reference implementations, kept deliberately independent of the
// library code paths they check: straight-line constant formulas, a plain
// binomial backward recursion, and brute-force searches.

#ifndef GFBSDE_TESTS_ORACLES_HPP
#define GFBSDE_TESTS_ORACLES_HPP

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace oracles {

// Straight-line transcriptions of the explicit constants. cp is the BDG
// constant value at the exponent in question.
inline double lambda1(double delta, double p, int n, double L1, double sh, double cp) {
    return std::pow(8.0, p - 1.0) * ((1.0 + std::pow(sh, 2.0 * p)) * std::pow(n * L1 * delta, p) +
                                     2.0 * cp * std::pow(L1 * n * n * sh, p) *
                                         std::pow(delta, p / 2.0));
}

inline double lambda2(double p, int n, double sh, double cp) {
    return std::pow(8.0, p - 1.0) *
           (1.0 + std::pow(sh, 2.0 * p) + 2.0 * cp * std::pow(n * sh, p));
}

inline double lambda3(double p, double T, int n, double L1, double sh, double cp) {
    return std::pow(6.0, p - 1.0) *
           ((1.0 + std::pow(sh, 2.0 * p)) * std::pow(n * L1, p) * std::pow(T, p - 1.0) +
            2.0 * cp * std::pow(L1 * n * n * sh, p) * std::pow(T, (p - 2.0) / 2.0));
}

inline double lambda4(double p, int n, double sh, double cp) {
    return std::pow(6.0, p - 1.0) *
           (1.0 + std::pow(sh, 2.0 * p) + 2.0 * cp * std::pow(n * sh, p));
}

inline double lambda5(double p, double L1, double sh, double sl) {
    const double s2 = sh * sh;
    const double inv = 1.0 + 1.0 / (sl * sl);
    return p * L1 * (1.0 + s2) +
           0.5 * p * L1 * L1 * s2 * inv * inv * std::max(1.0 / (p - 1.0), 1.0);
}

// Bisection for lambda1(delta) = 0.75 used as an independent root check.
inline double solve_delta0(double p, int n, double L1, double sh, double cp) {
    double hi = 1.0;
    while (lambda1(hi, p, n, L1, sh, cp) < 0.75) hi *= 2.0;
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (lambda1(mid, p, n, L1, sh, cp) < 0.75 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double c1_patch(double p, double T, int n, double L1, double sh, double cp) {
    const double d0 = L1 == 0.0 ? T : solve_delta0(p, n, L1, sh, cp);
    const double l2 = lambda2(p, n, sh, cp);
    const double f = std::pow(4.0, p);
    return 4.0 * l2 / (f - 1.0) *
           ((std::pow(4.0, p * (T + 2.0 * d0) / d0) - f) / (f - 1.0) - T / d0);
}

inline double c1_gronwall(double p, double T, int n, double L1, double sh, double cp) {
    return std::exp(lambda3(p, T, n, L1, sh, cp) * T) * lambda4(p, n, sh, cp);
}

inline double c1(double p, double T, int n, double L1, double sh, double cp) {
    const double patch = c1_patch(p, T, n, L1, sh, cp);
    return p >= 2.0 ? std::min(patch, c1_gronwall(p, T, n, L1, sh, cp)) : patch;
}

inline double c2(double p, double T, double L1, double sh, double sl) {
    const double s2 = sh * sh;
    return std::pow(2.0, p - 1.0) *
           (1.0 + std::pow(1.0 + s2, p) * std::exp(p * L1 * (1.0 + s2) * T)) *
           std::exp(lambda5(p, L1, sh, sl) * T);
}

inline double lambda_p(double p, double T, int n, double L1, double L2, double L3, double sh,
                       double sl, double cp) {
    return c1(p, T, n, L1, sh, cp) * c2(p, T, L1, sh, sl) * std::pow(n * L2 * L3, p) *
           (std::pow(T, p) + std::pow(T, p / 2.0)) * std::pow(1.0 + T, p);
}

inline double lambda_tilde_p(double p, double T, int n, double L1, double L2, double L3,
                             double sh, double sl, double cp) {
    return c1(p, T, n, L1, sh, cp) * c2(p, T, L1, sh, sl) * std::pow(n * L2 * L3, p) *
           std::pow(T, p) * std::pow(1.0 + T, p);
}

// Classical expectation by backward induction on a lattice with a fixed
// volatility (two-point rule, linear interpolation). Independent of the
// library lattice code; used for the degenerate-band reduction checks.
inline double classical_binomial_value(
    const std::function<double(double)>& terminal,
    const std::function<double(double, double, double, double)>& step, // (t, x, E, Z)
    double sigma, double T, int n_steps, double lo, double hi, int n_space, double x_eval) {
    const double dt = T / n_steps;
    const double dx = (hi - lo) / (n_space - 1);
    std::vector<double> next(static_cast<std::size_t>(n_space));
    std::vector<double> cur(static_cast<std::size_t>(n_space));
    for (int k = 0; k < n_space; ++k) next[static_cast<std::size_t>(k)] = terminal(lo + k * dx);
    auto interp = [&](const std::vector<double>& v, double x) {
        double s = (x - lo) / dx;
        double fl = std::floor(s);
        fl = std::fmin(std::fmax(fl, 0.0), static_cast<double>(n_space - 2));
        const int i0 = static_cast<int>(fl);
        const double w = s - fl;
        return (1.0 - w) * v[static_cast<std::size_t>(i0)] + w * v[static_cast<std::size_t>(i0 + 1)];
    };
    const double s = sigma * std::sqrt(dt);
    for (int i = n_steps - 1; i >= 0; --i) {
        const double t = T * i / n_steps;
        for (int k = 0; k < n_space; ++k) {
            const double x = lo + k * dx;
            const double e = 0.5 * (interp(next, x + s) + interp(next, x - s));
            const double z = 0.5 * (interp(next, x + s) - interp(next, x - s)) / s;
            cur[static_cast<std::size_t>(k)] = step(t, x, e, z);
        }
        next.swap(cur);
    }
    return interp(next, x_eval);
}

} // namespace oracles

#endif // GFBSDE_TESTS_ORACLES_HPP
