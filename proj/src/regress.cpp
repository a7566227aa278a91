#include "gfbsde/regress.hpp"

#include <cmath>

#include "gfbsde/kernels.hpp"

namespace gfbsde::regress {

void PolyBasis::eval(std::span<const double> x, std::span<double> out) const {
    for (std::size_t k = 0; k < exponents.size(); ++k) {
        double v = 1.0;
        for (int d = 0; d < n_vars; ++d) {
            const int e = exponents[k][static_cast<std::size_t>(d)];
            for (int r = 0; r < e; ++r) v *= x[static_cast<std::size_t>(d)];
        }
        out[k] = v;
    }
}

PolyBasis PolyBasis::total_degree(int n_vars, int degree) {
    PolyBasis b;
    b.n_vars = n_vars;
    std::vector<int> tuple(static_cast<std::size_t>(n_vars), 0);
    // Enumerate exponent tuples with total degree <= degree, lexicographically.
    while (true) {
        int total = 0;
        for (int e : tuple) total += e;
        if (total <= degree) b.exponents.push_back(tuple);
        int d = n_vars - 1;
        while (d >= 0) {
            ++tuple[static_cast<std::size_t>(d)];
            int t = 0;
            for (int e : tuple) t += e;
            if (t <= degree) break;
            tuple[static_cast<std::size_t>(d)] = 0;
            --d;
        }
        if (d < 0) break;
    }
    return b;
}

double Fit::eval(const PolyBasis& basis, std::span<const double> x) const {
    double buf[64];
    basis.eval(x, std::span<double>(buf, static_cast<std::size_t>(basis.size())));
    double s = 0.0;
    for (int k = 0; k < basis.size(); ++k) s += beta[static_cast<std::size_t>(k)] * buf[k];
    return s;
}

void fill_design(const PolyBasis& basis, std::span<const double> states, long n_rows,
                 std::vector<double>& design) {
    const int m = basis.size();
    design.resize(static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(m));
    kernels::for_each_index(n_rows, [&](long r) {
        basis.eval(states.subspan(static_cast<std::size_t>(r) * static_cast<std::size_t>(basis.n_vars),
                                  static_cast<std::size_t>(basis.n_vars)),
                   std::span<double>(design.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(m),
                                     static_cast<std::size_t>(m)));
    });
}

Fit least_squares(const PolyBasis& basis, std::span<const double> design, long n_rows,
                  std::span<const double> target) {
    const int m = basis.size();
    std::vector<double> gram(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0.0);
    std::vector<double> rhs(static_cast<std::size_t>(m), 0.0);
    std::vector<double> scratch(static_cast<std::size_t>(n_rows));

    for (int a = 0; a < m; ++a) {
        for (int b = a; b < m; ++b) {
            for (long r = 0; r < n_rows; ++r)
                scratch[static_cast<std::size_t>(r)] =
                    design[static_cast<std::size_t>(r) * m + a] * design[static_cast<std::size_t>(r) * m + b];
            const double s = pairwise_sum(scratch);
            gram[static_cast<std::size_t>(a) * m + b] = s;
            gram[static_cast<std::size_t>(b) * m + a] = s;
        }
        for (long r = 0; r < n_rows; ++r)
            scratch[static_cast<std::size_t>(r)] =
                design[static_cast<std::size_t>(r) * m + a] * target[static_cast<std::size_t>(r)];
        rhs[static_cast<std::size_t>(a)] = pairwise_sum(scratch);
    }

    double trace = 0.0;
    for (int a = 0; a < m; ++a) trace += gram[static_cast<std::size_t>(a) * m + a];
    const double ridge = 1e-10 * (trace / m + 1.0);

    Fit fit;
    fit.beta = rhs;
    std::vector<double> chol = gram;
    if (!solve_spd(chol, fit.beta, m, ridge)) {
        // Degenerate even with the ridge: retry with a heavy one.
        chol = gram;
        fit.beta = rhs;
        if (!solve_spd(chol, fit.beta, m, 1e-6 * (trace / m + 1.0)))
            throw Error("regression normal equations are singular");
    }
    return fit;
}

} // namespace gfbsde::regress
