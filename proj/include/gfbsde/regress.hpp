// Least-squares conditional expectations on polynomial bases, used by the
// path-level solver backends. Gram matrices are assembled entry-wise with
// pairwise sums so fits are independent of how path loops are scheduled.

#ifndef GFBSDE_REGRESS_HPP
#define GFBSDE_REGRESS_HPP

#include <span>
#include <vector>

#include "gfbsde/common.hpp"

namespace gfbsde::regress {

struct PolyBasis {
    int n_vars = 1;
    std::vector<std::vector<int>> exponents; // one tuple per basis function

    int size() const { return static_cast<int>(exponents.size()); }
    void eval(std::span<const double> x, std::span<double> out) const;
    static PolyBasis total_degree(int n_vars, int degree);
};

struct Fit {
    std::vector<double> beta;
    double eval(const PolyBasis& basis, std::span<const double> x) const;
};

// design: n_rows x basis.size() row-major. Adds a small ridge scaled by the
// Gram trace so degenerate designs (e.g. constant states at t = 0) stay
// solvable.
Fit least_squares(const PolyBasis& basis, std::span<const double> design, long n_rows,
                  std::span<const double> target);

// Fills design rows from states (n_rows x n_vars).
void fill_design(const PolyBasis& basis, std::span<const double> states, long n_rows,
                 std::vector<double>& design);

} // namespace gfbsde::regress

#endif // GFBSDE_REGRESS_HPP
